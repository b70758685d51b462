//! Learned routing: one upfront decision sends each input to exactly one
//! model of the chain.
//!
//! Training targets come from the validation set. Each instance is labelled
//! with the lowest chain position that classifies it correctly, or position 0
//! when none does. A balanced softmax regressor (or any other
//! [`Classifier`]) is then fitted to those targets.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::energy::EnergyMeter;
use crate::metrics::{check_dim, metered_pass, Evaluation};
use crate::models::{Classifier, SoftmaxConfig, SoftmaxRegressor};
use crate::{CascadeOutcome, Dataset, Error, ModelChain, Prediction, Result};

/// Per-instance routing targets for a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLabels {
    pub targets: Vec<usize>,
}

impl OracleLabels {
    /// Lowest chain position whose prediction matches the true label; 0 when
    /// no model is correct.
    pub fn build(chain: &ModelChain, data: &Dataset) -> Result<Self> {
        check_dim(chain.feature_dim(), data.feature_dim())?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let targets = data
            .iter()
            .map(|(x, y)| chain.models().position(|m| m.predict(x) == y).unwrap_or(0))
            .collect();
        Ok(Self { targets })
    }

    /// Histogram of targets over chain positions.
    pub fn counts(&self, num_models: usize) -> Vec<usize> {
        let mut counts = alloc::vec![0; num_models];
        for &t in &self.targets {
            counts[t] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterLearner<L> {
    /// Every validation instance had the same target.
    Constant { model_index: usize },
    Learned(L),
}

/// Maps an input to the chain position that should serve it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterModel<L = SoftmaxRegressor> {
    learner: RouterLearner<L>,
    feature_dim: usize,
    /// Declared per-prediction costs of the chain this router was trained on.
    chain_costs: Vec<f64>,
}

impl RouterModel<SoftmaxRegressor> {
    /// Fits a class-balanced softmax regressor on the oracle targets of `val`.
    pub fn train(chain: &ModelChain, val: &Dataset, config: &SoftmaxConfig) -> Result<Self> {
        Self::train_with(chain, val, |data| SoftmaxRegressor::fit(data, true, config))
    }
}

impl<L: Classifier> RouterModel<L> {
    /// Builds oracle targets on `val` and hands them to `fit` as a dataset whose
    /// classes are chain positions. `val` must not overlap the data the chain
    /// models were trained on.
    pub fn train_with<F>(chain: &ModelChain, val: &Dataset, fit: F) -> Result<Self>
    where
        F: FnOnce(&Dataset) -> Result<L>,
    {
        let oracle = OracleLabels::build(chain, val)?;
        let k = chain.len();
        let counts = oracle.counts(k);
        let learner = if counts.iter().filter(|&&c| c > 0).count() == 1 {
            RouterLearner::Constant { model_index: oracle.targets[0] }
        } else {
            let targets = Dataset::from_flat(val.features().to_vec(), oracle.targets, val.feature_dim(), k)?;
            let learner = fit(&targets)?;
            if learner.num_classes() != k || learner.feature_dim() != val.feature_dim() {
                return Err(Error::Config(alloc::format!(
                    "router learner must map {} features to {k} classes",
                    val.feature_dim()
                )));
            }
            RouterLearner::Learned(learner)
        };
        Ok(Self { learner, feature_dim: val.feature_dim(), chain_costs: chain.costs().to_vec() })
    }

    pub fn from_parts(learner: RouterLearner<L>, feature_dim: usize, chain_costs: Vec<f64>) -> Result<Self> {
        let router = Self { learner, feature_dim, chain_costs };
        let k = router.num_models();
        match &router.learner {
            RouterLearner::Constant { model_index } if *model_index >= k => {
                return Err(Error::ModelIndex { index: *model_index, len: k });
            }
            RouterLearner::Learned(l) if l.num_classes() != k || l.feature_dim() != feature_dim => {
                return Err(Error::Config("router learner shape disagrees with chain".into()));
            }
            _ => {}
        }
        Ok(router)
    }

    pub fn learner(&self) -> &RouterLearner<L> {
        &self.learner
    }

    pub fn chain_costs(&self) -> &[f64] {
        &self.chain_costs
    }

    pub fn num_models(&self) -> usize {
        self.chain_costs.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Chain position for `x`.
    pub fn decide(&self, x: &[f64]) -> usize {
        match &self.learner {
            RouterLearner::Constant { model_index } => *model_index,
            RouterLearner::Learned(l) => l.predict(x),
        }
    }

    fn check_chain(&self, chain: &ModelChain) -> Result<()> {
        if chain.len() != self.num_models() {
            return Err(Error::Config(alloc::format!(
                "router was trained for {} models, chain has {}",
                self.num_models(),
                chain.len()
            )));
        }
        check_dim(self.feature_dim, chain.feature_dim())
    }
}

/// Routes `x` and evaluates only the chosen model.
pub fn route_predict<L: Classifier>(router: &RouterModel<L>, chain: &ModelChain, x: &[f64]) -> Result<CascadeOutcome> {
    route_predict_timed(router, chain, x, &crate::clock::NullClock)
}

/// As [`route_predict`]; `selection_time_ns` covers the router's own inference.
pub fn route_predict_timed<L: Classifier, C: Clock + ?Sized>(
    router: &RouterModel<L>,
    chain: &ModelChain,
    x: &[f64],
    clock: &C,
) -> Result<CascadeOutcome> {
    router.check_chain(chain)?;
    check_dim(chain.feature_dim(), x.len())?;
    let started = clock.now_ns();
    let index = router.decide(x);
    let decided = clock.now_ns();
    Ok(dispatch(chain, index, x, decided.saturating_sub(started)))
}

fn dispatch(chain: &ModelChain, index: usize, x: &[f64], selection_time_ns: u64) -> CascadeOutcome {
    let s = chain.models[index].predict_scored(x);
    CascadeOutcome {
        prediction: Prediction { label: s.label, confidence: s.confidence, model_index: index },
        models_invoked: index..index + 1,
        selection_time_ns,
    }
}

/// Routes every row of `test` inside one metered section. The meter is told
/// about one router decision per instance.
pub fn route_evaluate<L, M, C>(
    router: &RouterModel<L>,
    chain: &ModelChain,
    test: &Dataset,
    meter: &mut M,
    clock: &C,
) -> Result<Evaluation>
where
    L: Classifier,
    M: EnergyMeter + ?Sized,
    C: Clock + ?Sized,
{
    router.check_chain(chain)?;
    check_dim(chain.feature_dim(), test.feature_dim())?;
    metered_pass(chain.len(), test, meter, clock, 1, |_, x| {
        let started = clock.now_ns();
        let index = router.decide(x);
        let decided = clock.now_ns();
        Ok(dispatch(chain, index, x, decided.saturating_sub(started)))
    })
}

/// DIAGNOSTIC ONLY: routes with the exact oracle computed from the labels of
/// `test`. The result is the accuracy ceiling of any router over this chain;
/// it reads test labels and must never be reported as a method.
pub fn oracle_route_evaluate<M, C>(chain: &ModelChain, test: &Dataset, meter: &mut M, clock: &C) -> Result<Evaluation>
where
    M: EnergyMeter + ?Sized,
    C: Clock + ?Sized,
{
    let oracle = OracleLabels::build(chain, test)?;
    metered_pass(chain.len(), test, meter, clock, 0, |row, x| Ok(dispatch(chain, oracle.targets[row], x, 0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::NullClock;
    use crate::energy::{CostModel, ModeledMeter};
    use crate::models::Scored;
    use alloc::boxed::Box;
    use alloc::vec;

    /// Predicts `table[round(x[0])]`.
    struct Lookup(Vec<usize>);

    impl Classifier for Lookup {
        fn feature_dim(&self) -> usize {
            1
        }
        fn num_classes(&self) -> usize {
            3
        }
        fn predict_scored(&self, x: &[f64]) -> Scored {
            Scored { label: self.0[x[0] as usize], confidence: 1.0 }
        }
    }

    fn chain(first: Vec<usize>, second: Vec<usize>) -> ModelChain {
        ModelChain::new(vec![(Box::new(Lookup(first)) as Box<dyn Classifier>, 1.0), (Box::new(Lookup(second)), 100.0)])
            .unwrap()
    }

    fn data(labels: &[usize]) -> Dataset {
        let rows: Vec<([f64; 1], usize)> = labels.iter().enumerate().map(|(i, &y)| ([i as f64], y)).collect();
        Dataset::from_rows(&rows, 3).unwrap()
    }

    #[test]
    fn oracle_targets() {
        // row 0: first correct; row 1: only second correct; row 2: both wrong;
        // row 3: both correct.
        let c = chain(vec![0, 0, 0, 2], vec![1, 1, 1, 2]);
        let oracle = OracleLabels::build(&c, &data(&[0, 1, 2, 2])).unwrap();
        assert_eq!(oracle.targets, vec![0, 1, 0, 0]);
        assert_eq!(oracle.counts(2), vec![3, 1]);
    }

    #[test]
    fn single_target_class_gives_constant_router() {
        let c = chain(vec![0, 1, 2], vec![2, 2, 2]);
        let router = RouterModel::train(&c, &data(&[0, 1, 2]), &SoftmaxConfig::default()).unwrap();
        assert_eq!(router.learner(), &RouterLearner::Constant { model_index: 0 });
        for x in 0..3 {
            let out = route_predict(&router, &c, &[x as f64]).unwrap();
            assert_eq!(out.prediction.model_index, 0);
            assert_eq!(out.models_invoked, 0..1);
        }
    }

    #[test]
    fn constant_router_can_pick_last_model() {
        let c = chain(vec![2, 2], vec![0, 1]);
        let router = RouterModel::train(&c, &data(&[0, 1]), &SoftmaxConfig::default()).unwrap();
        assert_eq!(router.learner(), &RouterLearner::Constant { model_index: 1 });
        assert_eq!(route_predict(&router, &c, &[0.0]).unwrap().models_invoked, 1..2);
    }

    #[test]
    fn modeled_energy_counts_router_calls() {
        let c = chain(vec![0; 10], vec![1; 10]);
        let router = RouterModel::from_parts(RouterLearner::<SoftmaxRegressor>::Constant { model_index: 0 }, 1, vec![1.0, 100.0]).unwrap();
        let mut meter = ModeledMeter::new(CostModel::new(vec![1.0, 100.0], 0.25).unwrap()).unwrap();
        let test = data(&[0; 10]);
        let eval = route_evaluate(&router, &c, &test, &mut meter, &NullClock).unwrap();
        assert_eq!(eval.metrics.total_energy_uwh, 10.0 * 1.0 + 10.0 * 0.25);
        assert_eq!(eval.metrics.fraction_per_model, vec![1.0, 0.0]);
        assert!(eval.outcomes.iter().all(|o| o.models_invoked.len() == 1));
    }

    #[test]
    fn oracle_routing_reaches_coverage() {
        let c = chain(vec![0, 0, 0, 2], vec![1, 1, 1, 2]);
        let test = data(&[0, 1, 2, 2]);
        let mut meter = ModeledMeter::new(CostModel::new(vec![1.0, 100.0], 0.0).unwrap()).unwrap();
        let eval = oracle_route_evaluate(&c, &test, &mut meter, &NullClock).unwrap();
        assert_eq!(eval.metrics.accuracy, 0.75);
    }

    #[test]
    fn router_chain_mismatch() {
        let c = chain(vec![0; 3], vec![1; 3]);
        let router = RouterModel::from_parts(RouterLearner::<SoftmaxRegressor>::Constant { model_index: 0 }, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(route_predict(&router, &c, &[0.0]).is_err());
        assert!(RouterModel::from_parts(RouterLearner::<SoftmaxRegressor>::Constant { model_index: 5 }, 1, vec![1.0, 2.0]).is_err());
    }
}
