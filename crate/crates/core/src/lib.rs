//! Walkability prediction pipeline downstream of image encoders.
//!
//! The crate covers everything after per-location embeddings exist:
//!
//! - [`datamodel`]: dataset schema, line-delimited IO and a seeded synthetic-city generator.
//! - [`spatial`]: degree-space distance and a uniform-grid radius index.
//! - [`safe`]: spatially-aware feature enhancement (inverse-distance weighted neighbor
//!   aggregation).
//! - [`contrastive`]: InfoNCE alignment of embedding pairs through linear projection heads.
//! - [`regressor`]: concatenation fusion, the MLP regressor, AdamW and grid search.
//! - [`splits`]: grouped hold-out and stratified grouped k-fold planning.
//! - [`evaluation`]: R², RMSE and sliced Wasserstein distance.
//! - [`pipeline`]: the end-to-end ablation run used by the `walkclip` binary.
//!
//! All randomness is drawn from seeded ChaCha generators, so every result is
//! reproducible from the seeds recorded alongside it.

pub mod cli;
pub mod config;
pub mod contrastive;
pub mod datamodel;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod pipeline;
pub mod regressor;
pub mod safe;
pub mod spatial;
pub mod splits;
mod textio;

pub use datamodel::{Dataset, Dims, GeoCoord, LocationRecord, SynthConfig};
pub use error::{Error, Result};
pub use evaluation::{EvalReport, GeoPrediction, SwdConfig};
pub use regressor::{HyperGrid, MlpModel, TrainConfig};
pub use safe::SafeConfig;
pub use spatial::SpatialIndex;
pub use splits::SplitPlan;
