//! Multimodal fusion and the MLP walkability regressor.

pub mod fusion;
pub mod grid;
pub mod mlp;
pub mod optim;
pub mod train;

pub use fusion::{fuse, FusionLayout, Modality};
pub use grid::{grid_search, CellScore, FoldData, GridOutcome, HyperGrid};
pub use mlp::{mlp_backward, mlp_forward, mse_loss, ForwardMode, MlpGrad, MlpModel};
pub use optim::{adamw_step, AdamW, AdamWState};
pub use train::{train_regressor, TrainConfig, TrainOutcome};
