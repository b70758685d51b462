//! Reference classifiers behind the shared [`Classifier`] contract.

mod net;
mod softmax;
mod tree;

pub use net::{FeedforwardNet, NetConfig};
pub use softmax::{balanced_class_weights, SoftmaxConfig, SoftmaxRegressor};
pub use tree::{DecisionTree, TreeNode};

/// A predicted class with the model's confidence in it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub label: usize,
    pub confidence: f64,
}

/// A fitted classifier.
///
/// `confidence` is the score of the predicted class and lies in `[0, 1]`.
/// Implementations must be deterministic: the same input always yields the
/// same label and confidence.
pub trait Classifier: Send + Sync {
    fn feature_dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    /// Label and confidence from a single evaluation.
    fn predict_scored(&self, x: &[f64]) -> Scored;

    fn predict(&self, x: &[f64]) -> usize {
        self.predict_scored(x).label
    }

    fn confidence(&self, x: &[f64]) -> f64 {
        self.predict_scored(x).confidence
    }
}

impl<C: Classifier + ?Sized> Classifier for alloc::boxed::Box<C> {
    fn feature_dim(&self) -> usize {
        (**self).feature_dim()
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn predict_scored(&self, x: &[f64]) -> Scored {
        (**self).predict_scored(x)
    }
    fn predict(&self, x: &[f64]) -> usize {
        (**self).predict(x)
    }
    fn confidence(&self, x: &[f64]) -> f64 {
        (**self).confidence(x)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn argmax_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Max-shifted softmax, in place.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = libm::exp(*z - max);
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}

/// `ln(sum(exp(z)))` without overflow.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn uniform_and_saturated_softmax() {
        let mut z = vec![0.3; 10];
        softmax_in_place(&mut z);
        assert!(z.iter().all(|&p| (p - 0.1).abs() < 1e-15));

        let mut z = vec![0.0; 10];
        z[0] = 1000.0;
        softmax_in_place(&mut z);
        assert!((z[0] - 1.0).abs() < 1e-12);
        assert!(z.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn softmax_sums_to_one_on_extreme_logits() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..1000 {
            let scale = libm::pow(10.0, rng.uniform(-3.0, 3.0));
            let mut z: Vec<f64> = (0..10).map(|_| rng.uniform(-1.0, 1.0) * scale).collect();
            softmax_in_place(&mut z);
            let sum: f64 = z.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "sum {sum}");
        }
    }

    #[test]
    fn log_sum_exp_matches_naive_when_safe() {
        let z = [0.1, -2.0, 3.5];
        let naive = libm::log(z.iter().map(|&v| libm::exp(v)).sum::<f64>());
        assert!((log_sum_exp(&z) - naive).abs() < 1e-12);
        assert!(log_sum_exp(&[1000.0, 1000.0]).is_finite());
    }
}
