//! Energy-aware dynamic model selection over chains of classifiers.
//!
//! Two selection strategies share one [`cascade::ModelChain`] of classifiers
//! ordered from cheapest to most expensive:
//!
//! * [`cascade`] escalates through the chain until a model is confident
//!   enough, falling back to the last member.
//! * [`router`] trains a small learner on validation data to dispatch each
//!   input straight to the cheapest model expected to get it right.
//!
//! The crate is `no_std` and only needs `alloc`. Wall clocks, OS energy
//! counters and file formats live in the `greenselect` companion crate and
//! plug in through the [`clock::Clock`] and [`energy::EnergyMeter`] traits.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cascade;
pub mod clock;
pub mod data;
pub mod energy;
mod error;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod router;

pub use cascade::{CascadeConfig, CascadeOutcome, ModelChain};
pub use clock::Clock;
pub use data::{accuracy, Dataset, Partition, Prediction, SplitSpec};
pub use energy::{CostModel, EnergyMeter, EnergySample, EnergySource, ModeledMeter};
pub use error::{Error, Result};
pub use metrics::{Evaluation, RunMetrics};
pub use models::{Classifier, DecisionTree, FeedforwardNet, Scored, SoftmaxRegressor};
pub use router::{OracleLabels, RouterModel};
