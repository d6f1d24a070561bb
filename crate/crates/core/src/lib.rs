//! Heterogeneous transferring prediction on irregular, event-ordered record streams.
//!
//! The pipeline turns per-user measurement events into sparse and dense windowed
//! feature matrices, trains a composite network made of per-feature autoencoders,
//! a shared sparse-row embedding and a prediction head, and initializes models for
//! a new dataset by matching its features against the autoencoders of a model
//! trained elsewhere.
//!
//! All numeric code is generic over [`Scalar`]; the aliases below fix it to `f64`
//! (the default used by the CLI and the experiment harness) or `f32`.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod featurize;
pub mod model;
pub mod nn;
pub mod records;
pub mod scalar;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Record64 = records::Record<f64>;
pub type DenseFeatureMatrix64 = featurize::DenseFeatureMatrix<f64>;
pub type SparseFeatureMatrix64 = featurize::SparseFeatureMatrix<f64>;
pub type Mlp64 = nn::Mlp<f64>;
pub type HtpsModel64 = model::HtpsModel<f64>;
pub type Model64 = model::Model<f64>;
pub type Checkpoint64 = nn::Checkpoint<f64>;
pub type TransferPlan64 = transfer::TransferPlan<f64>;

pub type Record32 = records::Record<f32>;
pub type Mlp32 = nn::Mlp<f32>;
pub type HtpsModel32 = model::HtpsModel<f32>;
pub type Model32 = model::Model<f32>;
