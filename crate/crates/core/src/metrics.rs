//! Run metrics and the shared pass bookkeeping behind every evaluator.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeOutcome;
use crate::clock::{ns_to_ms, Clock};
use crate::energy::{EnergyMeter, EnergySource};
use crate::models::Classifier;
use crate::{accuracy, Dataset, Error, Prediction, Result};

/// Outcome of one full pass over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub accuracy: f64,
    pub total_time_ms: f64,
    pub total_energy_uwh: f64,
    pub energy_source: EnergySource,
    /// Share of served predictions produced by each chain position.
    pub fraction_per_model: Vec<f64>,
    /// Time spent choosing models rather than running them.
    pub selection_overhead_ms: f64,
}

/// Metrics plus the per-instance records they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: RunMetrics,
    pub outcomes: Vec<CascadeOutcome>,
}

impl Evaluation {
    pub fn labels(&self) -> Vec<usize> {
        self.outcomes.iter().map(|o| o.prediction.label).collect()
    }

    /// Number of times each chain position was evaluated during the pass.
    pub fn invocation_counts(&self, num_models: usize) -> Vec<u64> {
        let mut counts = vec![0u64; num_models];
        for o in &self.outcomes {
            for i in o.models_invoked.clone() {
                counts[i] += 1;
            }
        }
        counts
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::FeatureDim { expected, got })
    }
}

/// Runs `step` over every row of `test` inside one metered, timed section.
/// `step` returns the outcome of one instance; invocation and router counts
/// are reported to the meter after the loop so recording stays out of the
/// timed per-instance path.
pub(crate) fn metered_pass<M, C, F>(
    num_models: usize,
    test: &Dataset,
    meter: &mut M,
    clock: &C,
    router_calls_per_instance: u64,
    mut step: F,
) -> Result<Evaluation>
where
    M: EnergyMeter + ?Sized,
    C: Clock + ?Sized,
    F: FnMut(usize, &[f64]) -> Result<CascadeOutcome>,
{
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut outcomes = Vec::with_capacity(test.len());
    meter.begin()?;
    let start = clock.now_ns();
    for (row, (x, _)) in test.iter().enumerate() {
        outcomes.push(step(row, x)?);
    }
    let elapsed = clock.now_ns().saturating_sub(start);

    let mut counts = vec![0u64; num_models];
    let mut served = vec![0usize; num_models];
    for o in &outcomes {
        served[o.prediction.model_index] += 1;
        for i in o.models_invoked.clone() {
            counts[i] += 1;
        }
    }
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            meter.record_model_invocation(i, c)?;
        }
    }
    if router_calls_per_instance > 0 {
        meter.record_router_invocation(router_calls_per_instance * test.len() as u64)?;
    }
    let sample = meter.end()?;

    let labels: Vec<usize> = outcomes.iter().map(|o| o.prediction.label).collect();
    let n = test.len() as f64;
    let metrics = RunMetrics {
        accuracy: accuracy(&labels, test.labels())?,
        total_time_ms: ns_to_ms(elapsed),
        total_energy_uwh: sample.energy_uwh,
        energy_source: sample.source,
        fraction_per_model: served.iter().map(|&s| s as f64 / n).collect(),
        selection_overhead_ms: ns_to_ms(outcomes.iter().map(|o| o.selection_time_ns).sum()),
    };
    Ok(Evaluation { metrics, outcomes })
}

/// Baseline pass: one model serves every instance, with no selection step.
///
/// `model_index` is the model's chain position, used for meter accounting and
/// `fraction_per_model`; `num_models` is the chain length.
pub fn evaluate_model<M, C>(
    model: &dyn Classifier,
    model_index: usize,
    num_models: usize,
    test: &Dataset,
    meter: &mut M,
    clock: &C,
) -> Result<Evaluation>
where
    M: EnergyMeter + ?Sized,
    C: Clock + ?Sized,
{
    if model_index >= num_models {
        return Err(Error::ModelIndex { index: model_index, len: num_models });
    }
    check_dim(model.feature_dim(), test.feature_dim())?;
    metered_pass(num_models, test, meter, clock, 0, |_, x| {
        let s = model.predict_scored(x);
        Ok(CascadeOutcome {
            prediction: Prediction { label: s.label, confidence: s.confidence, model_index },
            models_invoked: model_index..model_index + 1,
            selection_time_ns: 0,
        })
    })
}
