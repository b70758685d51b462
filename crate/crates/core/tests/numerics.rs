//! Backpropagation against central finite differences.

use greenselect_core::models::NetConfig;
use greenselect_core::rng::SplitMix64;
use greenselect_core::{Dataset, FeedforwardNet};
use proptest::prelude::*;

const STEP: f64 = 1e-5;

/// Central-difference gradient of the mean loss, one parameter at a time.
fn numerical_gradient(net: &FeedforwardNet, data: &Dataset) -> Vec<f64> {
    let base = net.parameters().to_vec();
    let mut probe = net.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + STEP;
            probe.set_parameters(&p).unwrap();
            let plus = probe.loss(data);
            p[i] = base[i] - STEP;
            probe.set_parameters(&p).unwrap();
            let minus = probe.loss(data);
            (plus - minus) / (2.0 * STEP)
        })
        .collect()
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_gradient_matches_finite_differences(seed in any::<u64>()) {
        let cfg = NetConfig { hidden: vec![4, 3], seed, input_divisor: 2.0, ..NetConfig::default() };
        let mut net = FeedforwardNet::init(3, 2, &cfg).unwrap();
        // 3*4+4 + 4*3+3 + 3*2+2 = 39 parameters; non-zero biases keep
        // units off the ReLU kink.
        prop_assert!(net.parameters().len() <= 50);
        let mut rng = SplitMix64::new(seed ^ 1);
        let params: Vec<f64> = net.parameters().iter().map(|p| p + rng.uniform(-0.1, 0.1)).collect();
        net.set_parameters(&params).unwrap();

        let rows: Vec<(Vec<f64>, usize)> = (0..6)
            .map(|_| ((0..3).map(|_| rng.uniform(-2.0, 2.0)).collect(), rng.below(2)))
            .collect();
        let data = Dataset::from_rows(&rows, 2).unwrap();

        let (loss, analytic) = net.loss_and_gradient(&data);
        prop_assert!((loss - net.loss(&data)).abs() < 1e-12);
        let numeric = numerical_gradient(&net, &data);
        for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            prop_assert!(relative_error(*a, *n) < 1e-4, "param {}: analytic {} numeric {}", i, a, n);
        }
    }
}

#[test]
fn zero_epoch_network_is_at_chance() {
    let mut rng = SplitMix64::new(2);
    let rows: Vec<(Vec<f64>, usize)> = (0..400)
        .map(|i| ((0..8).map(|_| rng.uniform(0.0, 1.0)).collect(), i % 4))
        .collect();
    let data = Dataset::from_rows(&rows, 4).unwrap();
    let net = FeedforwardNet::fit(&data, &NetConfig { epochs: 0, hidden: vec![8, 6], ..NetConfig::default() }).unwrap();
    let hits = data.iter().filter(|(x, y)| greenselect_core::Classifier::predict(&net, x) == *y).count();
    let acc = hits as f64 / data.len() as f64;
    // Labels are independent of the inputs, so any fixed function scores 1/4.
    assert!((acc - 0.25).abs() < 0.08, "accuracy {acc}");
}
