//! Trains the two-model chain on the digits data and compares the tree, the
//! network, cascading and routing on the held-out test split.

use std::path::{Path, PathBuf};

use greenselect_core::cascade::cascade_evaluate;
use greenselect_core::clock::StepClock;
use greenselect_core::data::split;
use greenselect_core::metrics::evaluate_model;
use greenselect_core::models::{NetConfig, SoftmaxConfig};
use greenselect_core::router::route_evaluate;
use greenselect_core::{
    CascadeConfig, Classifier, Clock, CostModel, Dataset, DecisionTree, EnergyMeter, Evaluation, FeedforwardNet,
    ModelChain, Partition, RouterModel, RunMetrics, SplitSpec,
};
use serde::Serialize;

use crate::dataset::{load_digits_csv, DatasetError, BUNDLED_DIGITS};
use crate::meter::{build_meter, MeterChoice, MonotonicClock, DEFAULT_PROXY_WATTS};
use crate::persist::{ModelDocument, PersistError};
use crate::report::ReportRow;

/// Pixel intensities top out at 16; the network and router see `x / 16`.
pub const DIGITS_INPUT_DIVISOR: f64 = 16.0;

/// Measured test-set totals of the reference run: tree 0.13 uWh, network
/// 40.80 uWh over 359 test instances.
pub const REFERENCE_TEST_SIZE: f64 = 359.0;
pub const REFERENCE_TREE_UWH: f64 = 0.13;
pub const REFERENCE_NET_UWH: f64 = 40.80;

pub const TREE_ROW: &str = "(G) Decision Tree";
pub const NET_ROW: &str = "(A) Neural Network";
pub const CASCADE_ROW: &str = "(C) Cascading";
pub const ROUTING_ROW: &str = "(R) Routing";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("loading data: {0}")]
    Data(#[from] DatasetError),

    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: greenselect_core::Error },

    #[error("exporting models: {0}")]
    Export(#[from] PersistError),

    #[error("invalid configuration: {0}")]
    Config(String),
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, ExperimentError>;
}

impl<T> StageExt<T> for greenselect_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, ExperimentError> {
        self.map_err(|source| ExperimentError::Stage { stage, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClockChoice {
    /// Real elapsed time.
    Monotonic,
    /// Counts clock readings (1 us each); timing columns become reproducible.
    Step,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub split: SplitSpec,
    pub epsilon: f64,
    /// Full test-set passes averaged for time and energy.
    pub repeats: usize,
    pub meter: MeterChoice,
    pub proxy_watts: f64,
    pub clock: ClockChoice,
    pub tree_depth: usize,
    pub net: NetConfig,
    pub router: SoftmaxConfig,
    /// Per-prediction costs of (tree, network) and of one router decision.
    pub costs: CostModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from(BUNDLED_DIGITS),
            split: SplitSpec::default(),
            epsilon: 0.2,
            repeats: 1000,
            meter: MeterChoice::Modeled,
            proxy_watts: DEFAULT_PROXY_WATTS,
            clock: ClockChoice::Monotonic,
            tree_depth: 5,
            net: NetConfig { input_divisor: DIGITS_INPUT_DIVISOR, ..NetConfig::default() },
            router: SoftmaxConfig { input_divisor: DIGITS_INPUT_DIVISOR, ..SoftmaxConfig::default() },
            costs: reference_costs(),
        }
    }
}

impl ExperimentConfig {
    /// Uses `seed` for the split and every learner.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split.seed = seed;
        self.net.seed = seed;
        self.router.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.repeats == 0 {
            return Err(ExperimentError::Config("repeats must be at least 1".into()));
        }
        CascadeConfig::new(self.epsilon).stage("configuration")?;
        self.split.validate().stage("configuration")?;
        self.costs.validate().stage("configuration")?;
        if self.costs.per_model_cost.len() != 2 {
            return Err(ExperimentError::Config("cost model must price exactly two chain models".into()));
        }
        Ok(())
    }
}

/// Per-prediction costs derived from the reference test-set totals; a router
/// decision is priced like a tree prediction.
pub fn reference_costs() -> CostModel {
    let tree = REFERENCE_TREE_UWH / REFERENCE_TEST_SIZE;
    let net = REFERENCE_NET_UWH / REFERENCE_TEST_SIZE;
    CostModel { per_model_cost: vec![tree, net], router_cost: tree }
}

/// Everything fitted for one experiment.
pub struct TrainedModels {
    pub partition: Partition,
    pub tree: DecisionTree,
    pub net: FeedforwardNet,
    pub chain: ModelChain,
    pub router: RouterModel,
}

impl TrainedModels {
    /// Writes `tree.json`, `net.json` and `router.json` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)
            .map_err(|source| PersistError::Io { path: dir.display().to_string(), source })?;
        ModelDocument::from_tree(&self.tree).save(dir.join("tree.json"))?;
        ModelDocument::from_net(&self.net).save(dir.join("net.json"))?;
        ModelDocument::from_router(&self.router).save(dir.join("router.json"))?;
        Ok(())
    }
}

pub fn train_tree(train: &Dataset, config: &ExperimentConfig) -> Result<DecisionTree, ExperimentError> {
    DecisionTree::fit(train, config.tree_depth).stage("training decision tree")
}

pub fn train_net(train: &Dataset, config: &ExperimentConfig) -> Result<FeedforwardNet, ExperimentError> {
    FeedforwardNet::fit(train, &config.net).stage("training neural network")
}

pub fn build_chain(tree: &DecisionTree, net: &FeedforwardNet, costs: &CostModel) -> Result<ModelChain, ExperimentError> {
    ModelChain::new(vec![
        (Box::new(tree.clone()) as Box<dyn Classifier>, costs.per_model_cost[0]),
        (Box::new(net.clone()), costs.per_model_cost[1]),
    ])
    .stage("assembling model chain")
}

/// Splits the data, fits the tree and network on the training part and the
/// router on the validation part only.
pub fn train_models(dataset: &Dataset, config: &ExperimentConfig) -> Result<TrainedModels, ExperimentError> {
    config.validate()?;
    let partition = split(dataset, &config.split).stage("splitting dataset")?;
    log::info!(
        "split: {} train / {} validation / {} test",
        partition.train.len(),
        partition.val.len(),
        partition.test.len()
    );
    let tree = train_tree(&partition.train, config)?;
    let net = train_net(&partition.train, config)?;
    let chain = build_chain(&tree, &net, &config.costs)?;
    let router = RouterModel::train(&chain, &partition.val, &config.router).stage("training router")?;
    Ok(TrainedModels { partition, tree, net, chain, router })
}

/// Metrics of one comparison row: accuracy and fractions from the first
/// pass, time, overhead and energy averaged over all passes.
#[derive(Debug, Clone, PartialEq)]
pub struct RowResult {
    pub name: &'static str,
    pub metrics: RunMetrics,
    /// Per-instance records of the first pass.
    pub first_pass: Evaluation,
}

impl RowResult {
    pub fn to_report_row(&self) -> ReportRow {
        ReportRow {
            classifier: self.name.to_string(),
            fraction_of_g: self.metrics.fraction_per_model[0],
            overhead_ms: self.metrics.selection_overhead_ms,
            accuracy: self.metrics.accuracy,
            time_ms: self.metrics.total_time_ms,
            energy_uwh: self.metrics.total_energy_uwh,
            energy_source: self.metrics.energy_source,
        }
    }
}

fn repeated<F>(name: &'static str, repeats: usize, mut pass: F) -> Result<RowResult, ExperimentError>
where
    F: FnMut() -> greenselect_core::Result<Evaluation>,
{
    let first = pass().stage(name)?;
    let (mut time, mut energy, mut overhead) = (
        first.metrics.total_time_ms,
        first.metrics.total_energy_uwh,
        first.metrics.selection_overhead_ms,
    );
    for _ in 1..repeats {
        let m = pass().stage(name)?.metrics;
        time += m.total_time_ms;
        energy += m.total_energy_uwh;
        overhead += m.selection_overhead_ms;
    }
    let n = repeats as f64;
    let metrics = RunMetrics {
        total_time_ms: time / n,
        total_energy_uwh: energy / n,
        selection_overhead_ms: overhead / n,
        ..first.metrics.clone()
    };
    Ok(RowResult { name, metrics, first_pass: first })
}

/// Evaluates the four comparison rows in order: tree, network, cascade, router.
pub fn evaluate_rows(
    models: &TrainedModels,
    config: &ExperimentConfig,
    meter: &mut dyn EnergyMeter,
    clock: &dyn Clock,
) -> Result<Vec<RowResult>, ExperimentError> {
    let test = &models.partition.test;
    let chain = &models.chain;
    let k = chain.len();
    let cascade = CascadeConfig::new(config.epsilon).stage("configuration")?;
    Ok(vec![
        repeated(TREE_ROW, config.repeats, || evaluate_model(&models.tree, 0, k, test, meter, clock))?,
        repeated(NET_ROW, config.repeats, || evaluate_model(&models.net, 1, k, test, meter, clock))?,
        repeated(CASCADE_ROW, config.repeats, || cascade_evaluate(chain, &cascade, test, meter, clock))?,
        repeated(ROUTING_ROW, config.repeats, || route_evaluate(&models.router, chain, test, meter, clock))?,
    ])
}

fn make_clock(choice: ClockChoice) -> Box<dyn Clock> {
    match choice {
        ClockChoice::Monotonic => Box::new(MonotonicClock::default()),
        ClockChoice::Step => Box::new(StepClock::new(1_000)),
    }
}

/// Result of [`run_experiment`]: the fitted models and one row per method.
pub struct ExperimentOutcome {
    pub models: TrainedModels,
    pub rows: Vec<RowResult>,
}

impl ExperimentOutcome {
    pub fn report_rows(&self) -> Vec<ReportRow> {
        self.rows.iter().map(RowResult::to_report_row).collect()
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    config.validate()?;
    let dataset = load_digits_csv(&config.data)?;
    let models = train_models(&dataset, config)?;
    let mut meter = build_meter(config.meter, &config.costs, config.proxy_watts).stage("building energy meter")?;
    let clock = make_clock(config.clock);
    let rows = evaluate_rows(&models, config, meter.as_mut(), clock.as_ref())?;
    Ok(ExperimentOutcome { models, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub accuracy: f64,
    pub energy_uwh: f64,
    pub fraction_of_g: f64,
}

/// One cascade pass per epsilon over a single trained chain, sorted by epsilon.
pub fn sweep_chain(
    chain: &ModelChain,
    test: &Dataset,
    epsilons: &[f64],
    meter: &mut dyn EnergyMeter,
    clock: &dyn Clock,
) -> Result<Vec<SweepRow>, ExperimentError> {
    if epsilons.is_empty() {
        return Err(ExperimentError::Config("epsilon list is empty".into()));
    }
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|epsilon| {
            let cfg = CascadeConfig::new(epsilon).stage("configuration")?;
            let m = cascade_evaluate(chain, &cfg, test, meter, clock).stage("cascade sweep")?.metrics;
            Ok(SweepRow {
                epsilon,
                accuracy: m.accuracy,
                energy_uwh: m.total_energy_uwh,
                fraction_of_g: m.fraction_per_model[0],
            })
        })
        .collect()
}

pub fn sweep_epsilon(config: &ExperimentConfig, epsilons: &[f64]) -> Result<Vec<SweepRow>, ExperimentError> {
    config.validate()?;
    let dataset = load_digits_csv(&config.data)?;
    let partition = split(&dataset, &config.split).stage("splitting dataset")?;
    let tree = train_tree(&partition.train, config)?;
    let net = train_net(&partition.train, config)?;
    let chain = build_chain(&tree, &net, &config.costs)?;
    let mut meter = build_meter(config.meter, &config.costs, config.proxy_watts).stage("building energy meter")?;
    let clock = make_clock(config.clock);
    sweep_chain(&chain, &partition.test, epsilons, meter.as_mut(), clock.as_ref())
}

pub const SWEEP_CSV_HEADER: &str = "epsilon,accuracy,energy_uwh,fraction_of_g";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.epsilon, r.accuracy, r.energy_uwh, r.fraction_of_g));
    }
    out
}
