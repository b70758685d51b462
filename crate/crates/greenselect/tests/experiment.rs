use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use greenselect::experiment::{
    sweep_chain, train_models, ClockChoice, ExperimentConfig, TrainedModels, CASCADE_ROW, NET_ROW, TREE_ROW,
};
use greenselect::meter::MeterChoice;
use greenselect::persist::ModelDocument;
use greenselect::run_experiment;
use greenselect::dataset::{load_digits_csv, BUNDLED_DIGITS};
use greenselect_core::cascade::cascade_evaluate;
use greenselect_core::clock::NullClock;
use greenselect_core::models::Scored;
use greenselect_core::router::route_predict;
use greenselect_core::{CascadeConfig, Classifier, ModelChain, ModeledMeter, RouterModel};

fn models() -> &'static TrainedModels {
    static MODELS: OnceLock<TrainedModels> = OnceLock::new();
    MODELS.get_or_init(|| {
        let data = load_digits_csv(BUNDLED_DIGITS).unwrap();
        train_models(&data, &ExperimentConfig::default()).unwrap()
    })
}

fn meter() -> ModeledMeter {
    ModeledMeter::new(ExperimentConfig::default().costs).unwrap()
}

#[test]
fn partitions_are_disjoint_and_cover_the_data() {
    let p = &models().partition;
    assert_eq!((p.train.len(), p.val.len(), p.test.len()), (1079, 359, 359));
    let mut seen = HashSet::new();
    for i in p.train_indices.iter().chain(&p.val_indices).chain(&p.test_indices) {
        assert!(seen.insert(*i), "index {i} appears twice");
    }
    assert_eq!(seen.len(), 1797);
}

#[test]
fn sweep_endpoints() {
    let m = models();
    let test = &m.partition.test;
    let rows = sweep_chain(&m.chain, test, &[1.0, 0.0], &mut meter(), &NullClock).unwrap();
    assert_eq!(rows[0].epsilon, 0.0);

    // Only pure leaves are trusted at zero tolerance.
    let pure = test
        .iter()
        .filter(|(x, _)| m.tree.leaf_counts(x).iter().filter(|&&c| c > 0).count() == 1)
        .count();
    assert_eq!(rows[0].fraction_of_g, pure as f64 / test.len() as f64);

    let tree_hits = test.iter().filter(|(x, y)| m.tree.predict(x) == *y).count();
    assert_eq!(rows[1].fraction_of_g, 1.0);
    assert_eq!(rows[1].accuracy, tree_hits as f64 / test.len() as f64);
}

/// Forwards to an inner model and records every input it is shown.
struct Recorder {
    inner: Box<dyn Classifier>,
    seen: Arc<Mutex<Vec<Vec<f64>>>>,
    calls: Arc<AtomicUsize>,
}

impl Classifier for Recorder {
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }
    fn predict_scored(&self, x: &[f64]) -> Scored {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.seen.lock().unwrap().push(x.to_vec());
        self.inner.predict_scored(x)
    }
}

#[test]
fn cascade_only_reads_the_test_split() {
    let m = models();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let calls = [Arc::new(AtomicUsize::new(0)), Arc::new(AtomicUsize::new(0))];
    let wrap = |inner: Box<dyn Classifier>, i: usize| -> Box<dyn Classifier> {
        Box::new(Recorder { inner, seen: seen.clone(), calls: calls[i].clone() })
    };
    let costs = m.chain.costs().to_vec();
    let chain = ModelChain::new(vec![
        (wrap(Box::new(m.tree.clone()), 0), costs[0]),
        (wrap(Box::new(m.net.clone()), 1), costs[1]),
    ])
    .unwrap();

    let test = &m.partition.test;
    let eval = cascade_evaluate(&chain, &CascadeConfig::new(0.2).unwrap(), test, &mut meter(), &NullClock).unwrap();
    let counts = eval.invocation_counts(2);
    assert_eq!(calls[0].load(Ordering::Relaxed) as u64, counts[0]);
    assert_eq!(calls[1].load(Ordering::Relaxed) as u64, counts[1]);

    let test_rows: Vec<&[f64]> = test.iter().map(|(x, _)| x).collect();
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len() as u64, counts[0] + counts[1]);
    assert!(seen.iter().all(|x| test_rows.contains(&x.as_slice())));
}

#[test]
fn router_round_trip_routes_identically() {
    let m = models();
    let doc = ModelDocument::from_json(&ModelDocument::from_router(&m.router).to_json()).unwrap();
    let router: RouterModel = doc.into_router().unwrap();
    assert_eq!(router, m.router);
    for (x, _) in m.partition.test.iter() {
        assert_eq!(route_predict(&router, &m.chain, x).unwrap(), route_predict(&m.router, &m.chain, x).unwrap());
    }
}

#[test]
fn exported_models_reload() {
    let m = models();
    let dir = tempfile::tempdir().unwrap();
    m.export(dir.path()).unwrap();
    let tree = ModelDocument::load(dir.path().join("tree.json")).unwrap().into_tree().unwrap();
    let net = ModelDocument::load(dir.path().join("net.json")).unwrap().into_net().unwrap();
    let router: RouterModel = ModelDocument::load(dir.path().join("router.json")).unwrap().into_router().unwrap();
    assert_eq!(tree, m.tree);
    assert_eq!(net, m.net);
    assert_eq!(router, m.router);
}

#[test]
fn repeats_change_only_averaged_columns() {
    let base = ExperimentConfig { clock: ClockChoice::Step, meter: MeterChoice::Modeled, ..ExperimentConfig::default() };
    let once = run_experiment(&ExperimentConfig { repeats: 1, ..base.clone() }).unwrap();
    let many = run_experiment(&ExperimentConfig { repeats: 4, ..base }).unwrap();
    for (a, b) in once.rows.iter().zip(&many.rows) {
        assert_eq!(a.metrics.accuracy, b.metrics.accuracy);
        assert_eq!(a.metrics.fraction_per_model, b.metrics.fraction_per_model);
        // Every pass costs the same under the modeled meter and step clock.
        assert!((a.metrics.total_energy_uwh - b.metrics.total_energy_uwh).abs() < 1e-9);
        assert!((a.metrics.total_time_ms - b.metrics.total_time_ms).abs() < 1e-9);
    }

    let energy = |name: &str| once.rows.iter().find(|r| r.name == name).unwrap().metrics.total_energy_uwh;
    assert!(energy(TREE_ROW) < energy(CASCADE_ROW) && energy(CASCADE_ROW) < energy(NET_ROW));
}

#[test]
fn invalid_configuration_is_rejected_before_training() {
    let bad = [
        ExperimentConfig { repeats: 0, ..ExperimentConfig::default() },
        ExperimentConfig { epsilon: 1.5, ..ExperimentConfig::default() },
        ExperimentConfig { data: "/nonexistent/digits.csv".into(), ..ExperimentConfig::default() },
    ];
    for cfg in &bad {
        assert!(run_experiment(cfg).is_err());
    }
}
