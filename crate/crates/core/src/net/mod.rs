//! One-hot CNN: convolution over region vectors, tv-embedding inputs,
//! pooling, response normalization and a linear top layer.

pub mod io;
mod layers;
mod model;

pub use layers::{
    pool, relu, response_normalize, Activation, ConvLayer, PoolMode, Pooling, SemiConvLayer, TvEmbedding,
};
pub use model::{
    decide, Architecture, Cache, EncodedDoc, Features, Gradients, Model, RegionInput, TopLayer, MULTI_LABEL_THRESHOLD,
};
