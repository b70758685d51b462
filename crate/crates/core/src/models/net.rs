//! Fully connected ReLU network with a softmax output, trained by mini-batch
//! SGD with momentum on cross-entropy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{argmax, log_sum_exp, softmax_in_place, Classifier, Scored};
use crate::rng::SplitMix64;
use crate::{Dataset, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Hidden layer widths, input side first.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Every input component is divided by this before the first layer.
    pub input_divisor: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64, 32, 24, 16],
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 200,
            batch_size: 32,
            seed: 42,
            input_divisor: 1.0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Config(format!("network: {msg}")));
        if self.hidden.contains(&0) {
            return fail(format!("hidden widths must be positive, got {:?}", self.hidden));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum {} must be in [0, 1)", self.momentum));
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if !(self.input_divisor.is_finite() && self.input_divisor > 0.0) {
            return fail(format!("input divisor {} must be positive", self.input_divisor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardNet {
    config: NetConfig,
    /// Input width, hidden widths, output width.
    layer_sizes: Vec<usize>,
    /// Per layer: row-major `outputs x inputs` weights, then `outputs` biases.
    parameters: Vec<f64>,
}

/// Activations and deltas reused across samples during training.
struct Scratch {
    offsets: Vec<usize>,
    activations: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl FeedforwardNet {
    /// Untrained network with fan-in scaled uniform weights
    /// `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))` and zero biases.
    pub fn init(feature_dim: usize, num_classes: usize, config: &NetConfig) -> Result<Self> {
        config.validate()?;
        if feature_dim == 0 || num_classes < 2 {
            return Err(Error::Config(format!(
                "network: need positive input width and at least 2 classes, got {feature_dim} and {num_classes}"
            )));
        }
        let mut layer_sizes = Vec::with_capacity(config.hidden.len() + 2);
        layer_sizes.push(feature_dim);
        layer_sizes.extend_from_slice(&config.hidden);
        layer_sizes.push(num_classes);

        let mut rng = SplitMix64::new(config.seed);
        let mut parameters = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = libm::sqrt(6.0 / fan_in as f64);
            parameters.extend((0..fan_in * fan_out).map(|_| rng.uniform(-limit, limit)));
            parameters.extend(core::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self { config: config.clone(), layer_sizes, parameters })
    }

    pub fn fit(train: &Dataset, config: &NetConfig) -> Result<Self> {
        Self::fit_with_history(train, config).map(|(net, _)| net)
    }

    /// Trains and also returns the mean training loss of every epoch.
    pub fn fit_with_history(train: &Dataset, config: &NetConfig) -> Result<(Self, Vec<f64>)> {
        let mut net = Self::init(train.feature_dim(), train.num_classes(), config)?;
        // Separate stream from the initialisation draws.
        let mut rng = SplitMix64::new(config.seed ^ 0x5DEE_CE66_D1CE_5EED);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut velocity = vec![0.0; net.parameters.len()];
        let mut grads = vec![0.0; net.parameters.len()];
        let mut scratch = net.scratch();
        let mut history = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            rng.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                grads.iter_mut().for_each(|g| *g = 0.0);
                for &row in batch {
                    epoch_loss += net.accumulate(train.row(row), train.label(row), &mut grads, &mut scratch);
                }
                let scale = 1.0 / batch.len() as f64;
                for ((p, v), g) in net.parameters.iter_mut().zip(&mut velocity).zip(&grads) {
                    *v = config.momentum * *v - config.learning_rate * g * scale;
                    *p += *v;
                }
            }
            let mean = epoch_loss / train.len() as f64;
            if !mean.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            history.push(mean);
        }
        Ok((net, history))
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn parameters(&self) -> &[f64] {
        &self.parameters
    }

    pub fn set_parameters(&mut self, parameters: &[f64]) -> Result<()> {
        if parameters.len() != self.parameters.len() {
            return Err(Error::Config(format!(
                "network: expected {} parameters, got {}",
                self.parameters.len(),
                parameters.len()
            )));
        }
        self.parameters.copy_from_slice(parameters);
        Ok(())
    }

    /// Rebuilds a network from stored parts, checking the parameter count.
    pub fn from_parts(config: NetConfig, layer_sizes: Vec<usize>, parameters: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if layer_sizes.len() != config.hidden.len() + 2 || layer_sizes[1..layer_sizes.len() - 1] != config.hidden[..] {
            return Err(Error::Config("network: layer sizes disagree with hidden widths".into()));
        }
        let expected: usize = layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if parameters.len() != expected {
            return Err(Error::Config(format!(
                "network: expected {expected} parameters, got {}",
                parameters.len()
            )));
        }
        Ok(Self { config, layer_sizes, parameters })
    }

    /// Mean cross-entropy over `data`.
    pub fn loss(&self, data: &Dataset) -> f64 {
        let total: f64 = data
            .iter()
            .map(|(x, y)| {
                let z = self.logits(x);
                log_sum_exp(&z) - z[y]
            })
            .sum();
        total / data.len() as f64
    }

    /// Mean cross-entropy over `data` and its gradient, laid out like
    /// [`parameters`](Self::parameters).
    pub fn loss_and_gradient(&self, data: &Dataset) -> (f64, Vec<f64>) {
        let mut grads = vec![0.0; self.parameters.len()];
        let mut scratch = self.scratch();
        let mut loss = 0.0;
        for (x, y) in data.iter() {
            loss += self.accumulate(x, y, &mut grads, &mut scratch);
        }
        let n = data.len() as f64;
        grads.iter_mut().for_each(|g| *g /= n);
        (loss / n, grads)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.layer_sizes[0]);
        let inv = 1.0 / self.config.input_divisor;
        let mut input: Vec<f64> = x.iter().map(|v| v * inv).collect();
        let mut output = Vec::new();
        let last = self.layer_sizes.len() - 2;
        let mut offset = 0;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.parameters[offset..offset + n_in * n_out];
            let biases = &self.parameters[offset + n_in * n_out..offset + n_in * n_out + n_out];
            output.clear();
            output.extend(weights.chunks_exact(n_in).zip(biases).map(|(row, b)| {
                let z = b + dot(row, &input);
                if l < last { z.max(0.0) } else { z }
            }));
            core::mem::swap(&mut input, &mut output);
            offset += n_in * n_out + n_out;
        }
        input
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.logits(x);
        softmax_in_place(&mut z);
        z
    }

    fn scratch(&self) -> Scratch {
        let offsets = self
            .layer_sizes
            .windows(2)
            .scan(0, |off, w| {
                let start = *off;
                *off += w[0] * w[1] + w[1];
                Some(start)
            })
            .collect();
        Scratch {
            offsets,
            activations: self.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }

    /// Adds this sample's gradient into `grads` and returns its loss.
    fn accumulate(&self, x: &[f64], label: usize, grads: &mut [f64], s: &mut Scratch) -> f64 {
        let n_layers = self.layer_sizes.len() - 1;
        let inv = 1.0 / self.config.input_divisor;
        for (a, &v) in s.activations[0].iter_mut().zip(x) {
            *a = v * inv;
        }
        for l in 0..n_layers {
            let offset = s.offsets[l];
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let weights = &self.parameters[offset..offset + n_in * n_out];
            let biases = &self.parameters[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let (before, after) = s.activations.split_at_mut(l + 1);
            let input = &before[l];
            for ((out, row), b) in after[0].iter_mut().zip(weights.chunks_exact(n_in)).zip(biases) {
                let z = b + dot(row, input);
                *out = if l + 1 < n_layers { z.max(0.0) } else { z };
            }
        }

        let logits = &s.activations[n_layers];
        let loss = log_sum_exp(logits) - logits[label];
        s.delta.clear();
        s.delta.extend_from_slice(logits);
        softmax_in_place(&mut s.delta);
        s.delta[label] -= 1.0;

        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = s.offsets[l];
            let input = &s.activations[l];
            let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for ((grow, d), gbias) in gw.chunks_exact_mut(n_in).zip(&s.delta).zip(gb) {
                *gbias += d;
                for (g, a) in grow.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l == 0 {
                break;
            }
            let weights = &self.parameters[off..off + n_in * n_out];
            s.delta_prev.clear();
            s.delta_prev.resize(n_in, 0.0);
            for (row, d) in weights.chunks_exact(n_in).zip(&s.delta) {
                for (dp, w) in s.delta_prev.iter_mut().zip(row) {
                    *dp += d * w;
                }
            }
            // ReLU derivative: zero where the unit was inactive.
            for (dp, a) in s.delta_prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *dp = 0.0;
                }
            }
            core::mem::swap(&mut s.delta, &mut s.delta_prev);
        }
        loss
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Classifier for FeedforwardNet {
    fn feature_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn num_classes(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 1]
    }

    /// Argmax of the softmax output and its probability.
    fn predict_scored(&self, x: &[f64]) -> Scored {
        let p = self.probabilities(x);
        let label = argmax(&p);
        Scored { label, confidence: p[label] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::accuracy;

    fn xor() -> Dataset {
        Dataset::from_rows(&[([0.0, 0.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1), ([1.0, 1.0], 0)], 2).unwrap()
    }

    fn small_config() -> NetConfig {
        NetConfig { hidden: vec![8], learning_rate: 0.1, batch_size: 4, epochs: 2000, seed: 7, ..NetConfig::default() }
    }

    /// Reference softmax written without max-shifting; only valid for small logits.
    fn naive_softmax(z: &[f64]) -> Vec<f64> {
        let e: Vec<f64> = z.iter().map(|&v| libm::exp(v)).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }

    #[test]
    fn learns_xor() {
        let data = xor();
        let (net, history) = FeedforwardNet::fit_with_history(&data, &small_config()).unwrap();
        let preds: Vec<usize> = data.iter().map(|(x, _)| net.predict(x)).collect();
        assert_eq!(accuracy(&preds, data.labels()).unwrap(), 1.0);

        let block_means: Vec<f64> = history.chunks(200).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        for w in block_means.windows(2) {
            assert!(w[1] < w[0], "block losses not decreasing: {block_means:?}");
        }
    }

    #[test]
    fn output_matches_reference_softmax() {
        let net = FeedforwardNet::init(5, 4, &NetConfig { hidden: vec![6, 3], ..NetConfig::default() }).unwrap();
        let mut rng = SplitMix64::new(99);
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let reference = naive_softmax(&net.logits(&x));
            let p = net.probabilities(&x);
            for (a, b) in p.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-9);
            }
            let s = net.predict_scored(&x);
            assert_eq!(s.label, argmax(&reference));
            assert!((s.confidence - reference[s.label]).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_logits_give_uniform_confidence() {
        let mut net = FeedforwardNet::init(3, 10, &NetConfig { hidden: vec![4], ..NetConfig::default() }).unwrap();
        let zeros = vec![0.0; net.parameters().len()];
        net.set_parameters(&zeros).unwrap();
        let s = net.predict_scored(&[1.0, 2.0, 3.0]);
        assert_eq!(s.label, 0);
        assert!((s.confidence - 0.1).abs() < 1e-12);
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let cfg = NetConfig { epochs: 50, ..small_config() };
        let a = FeedforwardNet::fit(&xor(), &cfg).unwrap();
        let b = FeedforwardNet::fit(&xor(), &cfg).unwrap();
        assert_eq!(a, b);
        let bits = |n: &FeedforwardNet| n.parameters().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = NetConfig { hidden: vec![], learning_rate: 1e300, momentum: 0.0, epochs: 50, ..small_config() };
        // Labels chosen against the seeded initialisation so the first step is large.
        let scaled = Dataset::from_rows(&[([1e6, -1e6], 1), ([-1e6, 1e6], 0)], 2).unwrap();
        assert!(matches!(FeedforwardNet::fit(&scaled, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            NetConfig { hidden: vec![4, 0], ..NetConfig::default() },
            NetConfig { learning_rate: 0.0, ..NetConfig::default() },
            NetConfig { momentum: 1.0, ..NetConfig::default() },
            NetConfig { batch_size: 0, ..NetConfig::default() },
            NetConfig { input_divisor: 0.0, ..NetConfig::default() },
        ] {
            assert!(FeedforwardNet::fit(&xor(), &cfg).is_err());
        }
    }

    #[test]
    fn from_parts_checks_shapes() {
        let net = FeedforwardNet::init(2, 2, &small_config()).unwrap();
        let rebuilt = FeedforwardNet::from_parts(net.config().clone(), net.layer_sizes().to_vec(), net.parameters().to_vec()).unwrap();
        assert_eq!(rebuilt, net);
        assert!(FeedforwardNet::from_parts(net.config().clone(), net.layer_sizes().to_vec(), vec![0.0; 3]).is_err());
    }
}
