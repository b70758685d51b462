//! Confidence-gated cascading over a chain of classifiers.
//!
//! Models are tried cheapest first. The first of the leading `k - 1` models
//! whose confidence reaches `1 - epsilon` serves the prediction; otherwise
//! the last model does, unconditionally.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::clock::{Clock, NullClock};
use crate::energy::EnergyMeter;
use crate::metrics::{check_dim, metered_pass, Evaluation};
use crate::models::Classifier;
use crate::{Dataset, Error, Prediction, Result};

/// Classifiers ordered by non-decreasing per-prediction energy cost.
pub struct ModelChain {
    pub(crate) models: Vec<Box<dyn Classifier>>,
    costs: Vec<f64>,
}

impl core::fmt::Debug for ModelChain {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ModelChain")
            .field("len", &self.models.len())
            .field("costs", &self.costs)
            .finish()
    }
}

impl ModelChain {
    /// `members` pairs each model with its declared cost per prediction.
    pub fn new(members: Vec<(Box<dyn Classifier>, f64)>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::ChainTooShort(members.len()));
        }
        let mut prev = 0.0;
        for (index, (_, cost)) in members.iter().enumerate() {
            if !cost.is_finite() || *cost < prev {
                return Err(Error::ChainCost { index, cost: *cost });
            }
            prev = *cost;
        }
        let dim = members[0].0.feature_dim();
        let classes = members[0].0.num_classes();
        for (m, _) in &members[1..] {
            check_dim(dim, m.feature_dim())?;
            if m.num_classes() != classes {
                return Err(Error::Config(alloc::format!(
                    "chain members disagree on class count: {classes} vs {}",
                    m.num_classes()
                )));
            }
        }
        let (models, costs) = members.into_iter().unzip();
        Ok(Self { models, costs })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    /// Always false; a chain holds at least two models.
    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn model(&self, index: usize) -> Option<&dyn Classifier> {
        self.models.get(index).map(|m| m.as_ref())
    }

    pub fn models(&self) -> impl Iterator<Item = &dyn Classifier> {
        self.models.iter().map(|m| m.as_ref())
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn feature_dim(&self) -> usize {
        self.models[0].feature_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.models[0].num_classes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    epsilon: f64,
}

impl CascadeConfig {
    /// `epsilon` must lie in `[0, 1]`; both ends are accepted.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Epsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Minimum confidence at which an early model's prediction is accepted.
    pub fn threshold(&self) -> f64 {
        1.0 - self.epsilon
    }
}

/// Record of one served prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOutcome {
    pub prediction: Prediction,
    /// Chain positions that were evaluated, in order. A prefix `0..=i` for a
    /// cascade, a single position for a routed prediction.
    pub models_invoked: Range<usize>,
    /// Selection work in nanoseconds, excluding model inference.
    pub selection_time_ns: u64,
}

/// One cascade decision without timing.
pub fn cascade_predict(chain: &ModelChain, config: &CascadeConfig, x: &[f64]) -> Result<CascadeOutcome> {
    cascade_predict_timed(chain, config, x, &NullClock)
}

/// One cascade decision. `selection_time_ns` is the time between entry and
/// exit not spent inside model calls.
pub fn cascade_predict_timed<C: Clock + ?Sized>(
    chain: &ModelChain,
    config: &CascadeConfig,
    x: &[f64],
    clock: &C,
) -> Result<CascadeOutcome> {
    check_dim(chain.feature_dim(), x.len())?;
    let threshold = config.threshold();
    let last = chain.len() - 1;
    let entered = clock.now_ns();
    let mut inference = 0u64;

    let mut index = 0;
    let scored = loop {
        let before = clock.now_ns();
        let s = chain.models[index].predict_scored(x);
        inference += clock.now_ns().saturating_sub(before);
        if index == last || s.confidence >= threshold {
            break s;
        }
        index += 1;
    };

    let total = clock.now_ns().saturating_sub(entered);
    Ok(CascadeOutcome {
        prediction: Prediction { label: scored.label, confidence: scored.confidence, model_index: index },
        models_invoked: 0..index + 1,
        selection_time_ns: total.saturating_sub(inference),
    })
}

/// Cascades over every row of `test` inside one metered section.
pub fn cascade_evaluate<M, C>(
    chain: &ModelChain,
    config: &CascadeConfig,
    test: &Dataset,
    meter: &mut M,
    clock: &C,
) -> Result<Evaluation>
where
    M: EnergyMeter + ?Sized,
    C: Clock + ?Sized,
{
    check_dim(chain.feature_dim(), test.feature_dim())?;
    metered_pass(chain.len(), test, meter, clock, 0, |_, x| {
        cascade_predict_timed(chain, config, x, clock)
    })
}
