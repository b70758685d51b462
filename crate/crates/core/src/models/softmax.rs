//! Multinomial logistic regression with optional balanced class weights.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{argmax, log_sum_exp, softmax_in_place, Classifier, Scored};
use crate::rng::SplitMix64;
use crate::{Dataset, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on the weights (not the biases).
    pub l2: f64,
    pub seed: u64,
    pub input_divisor: f64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self { learning_rate: 0.5, epochs: 500, l2: 0.0, seed: 42, input_divisor: 1.0 }
    }
}

impl SoftmaxConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Config(format!("softmax regressor: {msg}")));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return fail(format!("l2 {} must be non-negative", self.l2));
        }
        if !(self.input_divisor.is_finite() && self.input_divisor > 0.0) {
            return fail(format!("input divisor {} must be positive", self.input_divisor));
        }
        Ok(())
    }
}

/// `w_c = n / (classes_present * n_c)` for every class that occurs; zero for
/// classes absent from `labels`.
pub fn balanced_class_weights(labels: &[usize], num_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; num_classes];
    for &y in labels {
        counts[y] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let n = labels.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n / (present as f64 * c as f64) })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRegressor {
    config: SoftmaxConfig,
    feature_dim: usize,
    num_classes: usize,
    /// Row-major `num_classes x feature_dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    class_weights: Vec<f64>,
}

impl SoftmaxRegressor {
    /// Full-batch gradient descent on the class-weighted mean cross-entropy.
    /// With `balanced` unset every class weight is 1.
    pub fn fit(data: &Dataset, balanced: bool, config: &SoftmaxConfig) -> Result<Self> {
        config.validate()?;
        let (d, k) = (data.feature_dim(), data.num_classes());
        let class_weights = if balanced {
            balanced_class_weights(data.labels(), k)
        } else {
            vec![1.0; k]
        };
        let mut rng = SplitMix64::new(config.seed);
        let mut model = Self {
            config: config.clone(),
            feature_dim: d,
            num_classes: k,
            weights: (0..k * d).map(|_| rng.uniform(-0.01, 0.01)).collect(),
            bias: vec![0.0; k],
            class_weights,
        };

        let n = data.len() as f64;
        let mut grad_w = vec![0.0; k * d];
        let mut grad_b = vec![0.0; k];
        let mut x = vec![0.0; d];
        let mut p = vec![0.0; k];
        let inv = 1.0 / config.input_divisor;
        for epoch in 0..config.epochs {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            grad_b.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for (row, y) in data.iter() {
                for (xi, v) in x.iter_mut().zip(row) {
                    *xi = v * inv;
                }
                model.scaled_logits(&x, &mut p);
                let w = model.class_weights[y];
                loss += w * (log_sum_exp(&p) - p[y]);
                softmax_in_place(&mut p);
                p[y] -= 1.0;
                for (c, &g) in p.iter().enumerate() {
                    let g = w * g;
                    grad_b[c] += g;
                    for (gw, xi) in grad_w[c * d..(c + 1) * d].iter_mut().zip(&x) {
                        *gw += g * xi;
                    }
                }
            }
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let lr = config.learning_rate;
            for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                *w -= lr * (g / n + config.l2 * *w);
            }
            for (b, g) in model.bias.iter_mut().zip(&grad_b) {
                *b -= lr * g / n;
            }
        }
        Ok(model)
    }

    /// Rebuilds a regressor from stored parts, checking shapes.
    pub fn from_parts(
        config: SoftmaxConfig,
        feature_dim: usize,
        num_classes: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        class_weights: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        if weights.len() != feature_dim * num_classes || bias.len() != num_classes || class_weights.len() != num_classes {
            return Err(Error::Config("softmax regressor: parameter shapes disagree".into()));
        }
        Ok(Self { config, feature_dim, num_classes, weights, bias, class_weights })
    }

    pub fn config(&self) -> &SoftmaxConfig {
        &self.config
    }

    pub fn class_weights(&self) -> &[f64] {
        &self.class_weights
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn scaled_logits(&self, x: &[f64], out: &mut [f64]) {
        for ((o, row), b) in out.iter_mut().zip(self.weights.chunks_exact(self.feature_dim)).zip(&self.bias) {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.config.input_divisor;
        let scaled: Vec<f64> = x.iter().map(|v| v * inv).collect();
        let mut out = vec![0.0; self.num_classes];
        self.scaled_logits(&scaled, &mut out);
        out
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.logits(x);
        softmax_in_place(&mut z);
        z
    }
}

impl Classifier for SoftmaxRegressor {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_scored(&self, x: &[f64]) -> Scored {
        let p = self.probabilities(x);
        let label = argmax(&p);
        Scored { label, confidence: p[label] }
    }

    /// Argmax of the logits in one allocation-free pass; ties go to the
    /// lowest class.
    fn predict(&self, x: &[f64]) -> usize {
        let inv = 1.0 / self.config.input_divisor;
        let mut best = (0, f64::NEG_INFINITY);
        for (c, (row, b)) in self.weights.chunks_exact(self.feature_dim).zip(&self.bias).enumerate() {
            let z = b + row.iter().zip(x).map(|(w, v)| w * (v * inv)).sum::<f64>();
            if z > best.1 {
                best = (c, z);
            }
        }
        best.0
    }
}
