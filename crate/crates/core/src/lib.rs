//! One-hot convolutional text categorization with two-view region
//! embeddings learned from unlabeled text.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod corpus;
pub mod data;
pub mod error;
pub mod net;
pub mod regions;
pub mod sparse;
pub mod theory;
pub mod train;
pub mod tv;

pub use error::{Error, Result};
