//! Losses, SGD training of the three model kinds, model selection and metrics.

mod config;
mod loss;
mod metrics;
mod select;
mod supervised;
mod tv_train;

pub use config::{parse_config, Config, NegSampleCfg, TargetConfig, TargetKind, TrainConfig, CONFIG_KEYS};
pub use loss::{sample_weights, weighted_square_loss};
pub use metrics::{evaluate, ClassScore, Metrics};
pub use select::{holdout_split, model_select, Selection};
pub use supervised::{dropout_mask, label_target, train_semi, train_supervised, with_threads};
pub use tv_train::{train_tv, train_tv_network, TvNetwork};
