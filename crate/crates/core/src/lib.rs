//! A first-order TSK (Takagi-Sugeno-Kang) neuro-fuzzy classification engine
//! built for high-dimensional data.
//!
//! Firing strengths are computed with an adaptive softmin whose negative
//! integer exponent is re-chosen per rule and instance from the smallest
//! membership value, so that no intermediate power can overflow. This avoids
//! the numeric underflow of the product T-norm and the fake-minimum artifact
//! of a fixed-exponent softmin, both of which are kept around as baselines.
//!
//! On top of the inference core sits a three-phase training pipeline:
//!
//! 1. feature selection on a compact rule base, driven by per-feature
//!    consequent gates,
//! 2. rule extraction on an enhanced rule base over the selected features,
//!    driven by per-rule gates,
//! 3. fine tuning of the pruned system by gradient descent or least squares.
//!
//! All numerics are generic over the scalar type via [`Real`]; `f64` is the
//! type used by the CLI and the concrete aliases below.

pub mod data;
pub mod error;
pub mod firing;
pub mod gate;
pub mod model;
pub mod pipeline;
pub mod rulebase;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision dataset.
pub type Dataset64 = data::Dataset<f64>;
/// Double-precision fuzzy partition.
pub type Partition64 = rulebase::FuzzyPartition<f64>;
/// Double-precision consequent bank.
pub type Consequents64 = rulebase::ConsequentBank<f64>;
/// Double-precision TSK model.
pub type Model64 = model::TskModel<f64>;
/// Double-precision forward trace.
pub type Trace64 = model::ForwardTrace<f64>;
/// Double-precision training configuration.
pub type Config64 = training::TrainConfig<f64>;
/// Double-precision cross-validation report.
pub type Report64 = pipeline::PipelineReport<f64>;
