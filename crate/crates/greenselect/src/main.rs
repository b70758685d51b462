use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use greenselect::dataset::{load_digits_csv, BUNDLED_DIGITS};
use greenselect::experiment::{
    build_chain, sweep_csv, train_models, train_net, train_tree, ClockChoice, ExperimentConfig,
};
use greenselect::meter::MeterChoice;
use greenselect::persist::{ModelDocument, ModelBody};
use greenselect::{emit_report, run_experiment, sweep_epsilon, Format};
use greenselect_core::data::split;
use greenselect_core::energy::to_carbon;
use greenselect_core::router::route_predict;
use greenselect_core::{accuracy, Classifier, EnergySample, RouterModel};

#[derive(Parser)]
#[command(name = "greenselect", version, about = "Energy-aware cascading and routing benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Comparison benchmarks on the digits data.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Train or evaluate a single model.
    #[command(subcommand)]
    Model(ModelCommand),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Tree, network, cascading and routing on the test split.
    Run(RunArgs),
    /// Cascade accuracy and energy across confidence tolerances.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum ModelCommand {
    Train(TrainArgs),
    Eval(EvalArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Digits CSV: 64 pixels in 0..=16 then the label, per line.
    #[arg(long, default_value = BUNDLED_DIGITS)]
    data: PathBuf,
    /// Seed for the split and every learner.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MeterArg::Modeled)]
    meter: MeterArg,
    /// Constant power assumed by the proxy meter.
    #[arg(long, default_value_t = 10.0)]
    watts: f64,
    /// `step` makes timing columns reproducible.
    #[arg(long, value_enum, default_value_t = ClockArg::Monotonic)]
    clock: ClockArg,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// Test-set passes averaged for time and energy.
    #[arg(long, default_value_t = 1000)]
    repeats: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Write tree.json, net.json and router.json here.
    #[arg(long, value_name = "DIR")]
    export_models: Option<PathBuf>,
    /// Grid intensity (gCO2e/kWh); appends a carbon summary.
    #[arg(long)]
    carbon_intensity: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    epsilons: Vec<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Model document to evaluate on the test split.
    #[arg(long)]
    model: PathBuf,
    /// Tree document for routing (router evaluation only).
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Network document for routing (router evaluation only).
    #[arg(long)]
    net: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeterArg {
    Modeled,
    Proxy,
    Oscounter,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Monotonic,
    Step,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Tree,
    Net,
    Router,
}

impl CommonArgs {
    fn config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default().with_seed(self.seed);
        cfg.data = self.data.clone();
        cfg.meter = match self.meter {
            MeterArg::Modeled => MeterChoice::Modeled,
            MeterArg::Proxy => MeterChoice::Proxy,
            MeterArg::Oscounter => MeterChoice::OsCounter,
        };
        cfg.proxy_watts = self.watts;
        cfg.clock = match self.clock {
            ClockArg::Monotonic => ClockChoice::Monotonic,
            ClockArg::Step => ClockChoice::Step,
        };
        cfg
    }
}

fn bench_run(args: RunArgs) -> Result<()> {
    let mut cfg = args.common.config();
    cfg.epsilon = args.epsilon;
    cfg.repeats = args.repeats;
    let outcome = run_experiment(&cfg).context("bench run")?;
    let format = match args.format {
        FormatArg::Table => Format::Table,
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let rows = outcome.report_rows();
    print!("{}", emit_report(&rows, format));
    if matches!(format, Format::Table) {
        println!("Overhead covers selection time only; selection energy is not reported separately.");
    }
    if let Some(intensity) = args.carbon_intensity {
        for row in &rows {
            let sample = EnergySample { energy_uwh: row.energy_uwh, duration_ms: row.time_ms, source: row.energy_source };
            let grams = to_carbon(&sample, intensity).context("carbon conversion")?;
            eprintln!("carbon  {:<20} {grams:.3e} gCO2e per pass at {intensity} g/kWh", row.classifier);
        }
    }
    if let Some(dir) = args.export_models {
        outcome.models.export(&dir).context("exporting models")?;
        eprintln!("models written to {}", dir.display());
    }
    Ok(())
}

fn bench_sweep(args: SweepArgs) -> Result<()> {
    let cfg = args.common.config();
    let rows = sweep_epsilon(&cfg, &args.epsilons).context("bench sweep")?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}

fn model_train(args: TrainArgs) -> Result<()> {
    let cfg = args.common.config();
    let data = load_digits_csv(&cfg.data).context("loading data")?;
    let doc = match args.kind {
        KindArg::Tree => {
            let part = split(&data, &cfg.split).context("splitting dataset")?;
            ModelDocument::from_tree(&train_tree(&part.train, &cfg)?)
        }
        KindArg::Net => {
            let part = split(&data, &cfg.split).context("splitting dataset")?;
            ModelDocument::from_net(&train_net(&part.train, &cfg)?)
        }
        KindArg::Router => ModelDocument::from_router(&train_models(&data, &cfg)?.router),
    };
    doc.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("{} written to {}", doc.kind(), args.out.display());
    Ok(())
}

fn model_eval(args: EvalArgs) -> Result<()> {
    let cfg = args.common.config();
    let data = load_digits_csv(&cfg.data).context("loading data")?;
    let test = split(&data, &cfg.split).context("splitting dataset")?.test;
    let doc = ModelDocument::load(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let predictions: Vec<usize> = match &doc.body {
        ModelBody::DecisionTree { .. } => {
            let tree = doc.into_tree()?;
            test.iter().map(|(x, _)| tree.predict(x)).collect()
        }
        ModelBody::FeedforwardNet { .. } => {
            let net = doc.into_net()?;
            test.iter().map(|(x, _)| net.predict(x)).collect()
        }
        ModelBody::SoftmaxRegressor { .. } => {
            let m = doc.into_softmax()?;
            test.iter().map(|(x, _)| m.predict(x)).collect()
        }
        ModelBody::Router { .. } => {
            let (Some(tree), Some(net)) = (&args.tree, &args.net) else {
                bail!("evaluating a router needs --tree and --net");
            };
            let router: RouterModel = doc.into_router()?;
            let tree = ModelDocument::load(tree)?.into_tree()?;
            let net = ModelDocument::load(net)?.into_net()?;
            let chain = build_chain(&tree, &net, &cfg.costs)?;
            let mut served_by_first = 0usize;
            let mut labels = Vec::with_capacity(test.len());
            for (x, _) in test.iter() {
                let out = route_predict(&router, &chain, x).context("routing")?;
                served_by_first += usize::from(out.prediction.model_index == 0);
                labels.push(out.prediction.label);
            }
            println!("fraction_of_g {:.4}", served_by_first as f64 / test.len() as f64);
            labels
        }
    };
    println!("accuracy {:.4}", accuracy(&predictions, test.labels())?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(BenchCommand::Run(a)) => bench_run(a),
        Command::Bench(BenchCommand::Sweep(a)) => bench_sweep(a),
        Command::Model(ModelCommand::Train(a)) => model_train(a),
        Command::Model(ModelCommand::Eval(a)) => model_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
