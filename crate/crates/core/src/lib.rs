//! Estimating the Algorithmic Intelligence Quotient of reinforcement-learning
//! agents by sampling environment programs on an extended BF machine.
//!
//! The statistics layer ([`stats`], [`estimator::run_adaptive`]) is generic
//! over `f32`/`f64`; the aliases below fix the common choices.

pub mod agents;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod machine;
pub mod sampler;
pub mod seed;
pub mod stats;

pub use error::{ConfigError, Error, ParseError, Result};

pub type Stats = stats::StratumStats<f64>;
pub type Stats32 = stats::StratumStats<f32>;
pub type MeanEstimate = stats::MeanEstimate<f64>;
pub type MeanEstimate32 = stats::MeanEstimate<f32>;
