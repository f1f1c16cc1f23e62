use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pbcoreset::baselines::BaselineMethod;
use pbcoreset::harness::config::{config_args, parse_config};
use pbcoreset::harness::pipelines::{self, FeatureSpec, StreamSpec, VALIDATION_SIZE};
use pbcoreset::harness::report::{self, MODEL_FILE, PROBABILITIES_FILE};
use pbcoreset::harness::source::{load_data, DataFormat, LoadedData};
use pbcoreset::harness::{
    emit_report, write_atomic, ContinualSpec, MemoryPolicy, RunArtifacts, Scenario, SummarizeSpec, TaskSplit,
};
use pbcoreset::learner::{self, LearnerKind};
use pbcoreset::projection;
use pbcoreset::scenarios::NoiseSpec;
use pbcoreset::{Error, ExtractionMode, InnerConfig, Result, SelectionConfig, SelectionTrace};

/// Probabilistic bilevel coreset selection.
///
/// Every flag may also be given in a `--config` file as `flag-name = value`,
/// optionally under `[common]` or `[<subcommand>]` headers. Command-line
/// flags win over the file.
#[derive(Parser, Debug)]
#[command(name = "pbcoreset", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select a coreset, retrain on it and report test metrics.
    #[command(args_override_self = true)]
    Select(SelectArgs),
    /// Evaluate a saved model on the test split.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Run one baseline selector at the same budget.
    #[command(args_override_self = true)]
    Baseline(BaselineArgs),
    /// Project a vector (one value per line) onto the capped simplex.
    #[command(args_override_self = true)]
    Project(ProjectArgs),
    /// Continual learning with a replay memory.
    #[command(args_override_self = true)]
    Cl(ClArgs),
    /// Streaming memory maintenance against reservoir sampling.
    #[command(args_override_self = true)]
    Stream(StreamArgs),
    /// Feature selection with the same machinery over input coordinates.
    #[command(args_override_self = true)]
    Features(FeatureArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training data; `images,labels` for idx.
    #[arg(long)]
    data: Option<String>,
    /// Test data; without it 20% of the training data is held out.
    #[arg(long)]
    test_data: Option<String>,
    /// idx | csv | synth:<gen>:<params>
    #[arg(long, default_value = "csv")]
    format: DataFormat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LearnerArgs {
    /// logistic | mlp | ridge
    #[arg(long, default_value = "logistic")]
    learner: LearnerKind,
    #[arg(long, default_value_t = 100)]
    inner_epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    inner_lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    /// L2 penalty; the regularizer for ridge.
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long, default_value_t = 100)]
    hidden_width: usize,
    #[arg(long, default_value_t = 2)]
    hidden_layers: usize,
}

impl LearnerArgs {
    fn inner(&self) -> InnerConfig {
        let base = match self.learner {
            LearnerKind::Ridge => InnerConfig::ridge(self.l2.unwrap_or(0.1)),
            kind => InnerConfig {
                kind,
                l2: self.l2.unwrap_or(0.0),
                ..InnerConfig::default()
            },
        };
        InnerConfig {
            epochs: self.inner_epochs,
            step_size: self.inner_lr,
            momentum: self.momentum,
            hidden_width: self.hidden_width,
            hidden_layers: self.hidden_layers,
            ..base
        }
    }
}

#[derive(Args, Debug)]
struct OuterArgs {
    /// Budget K.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 500)]
    outer_iters: usize,
    #[arg(long, default_value_t = 2.5)]
    outer_lr: f64,
    /// Outer mini-batch size; all outer examples when omitted.
    #[arg(long)]
    batch: Option<usize>,
    /// sample | topk
    #[arg(long, default_value = "topk")]
    extract: ExtractionMode,
    /// Adam-style moment estimates on the outer gradient.
    #[arg(long)]
    adaptive: bool,
    /// Cosine decay of the outer step.
    #[arg(long)]
    cosine: bool,
    /// Subtract a running-mean loss baseline.
    #[arg(long)]
    control_variate: bool,
    /// Write the per-iteration trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl OuterArgs {
    fn selection(&self, inner: InnerConfig, seed: u64) -> SelectionConfig {
        SelectionConfig {
            budget: self.k,
            outer_iters: self.outer_iters,
            outer_step: self.outer_lr,
            outer_batch: self.batch,
            inner,
            seed,
            extraction: self.extract,
            adaptive: self.adaptive,
            cosine: self.cosine,
            control_variate: self.control_variate,
            ..SelectionConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// symmetric:<rate> | pairwise:<rate>
    #[arg(long)]
    noise: Option<NoiseSpec>,
    /// Per-class decay of the class sizes.
    #[arg(long)]
    imbalance_sigma: Option<f64>,
    /// Balanced validation set held out when a scenario is active.
    #[arg(long, default_value_t = VALIDATION_SIZE)]
    validation_size: usize,
}

impl ScenarioArgs {
    fn scenario(&self) -> Scenario {
        Scenario {
            noise: self.noise,
            imbalance_decay: self.imbalance_sigma,
        }
    }
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    outer: OuterArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated baselines to report alongside.
    #[arg(long, value_delimiter = ',')]
    baselines: Vec<BaselineMethod>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Model file written by `select`.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    outer: OuterArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// uniform | kcenter | hardest | herding | reservoir
    #[arg(long)]
    method: BaselineMethod,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Text file with one value per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Output directory; the result is also printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    outer: OuterArgs,
    /// Replay memory capacity.
    #[arg(long, default_value_t = 500)]
    memory: usize,
    #[arg(long, default_value_t = 5)]
    tasks: usize,
    /// labels | permuted
    #[arg(long, default_value = "labels")]
    split: String,
    /// selection, or a baseline name.
    #[arg(long, default_value = "selection")]
    policy: String,
}

#[derive(Args, Debug)]
struct StreamArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    outer: OuterArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 100)]
    memory: usize,
    #[arg(long, default_value_t = 125)]
    stream_batch: usize,
}

#[derive(Args, Debug)]
struct FeatureArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    outer: OuterArgs,
    #[arg(long, default_value_t = VALIDATION_SIZE)]
    validation_size: usize,
    /// Standard deviation of Gaussian noise added to every feature.
    #[arg(long)]
    feature_noise: Option<f64>,
}

/// Config-file arguments are inserted right after the subcommand so that
/// command-line flags, parsed later, override them.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let Some(sub) = argv.get(1).filter(|a| !a.starts_with('-')).cloned() else {
        return Ok(argv);
    };
    let mut path = None;
    for (i, a) in argv.iter().enumerate().skip(2) {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{path}: {e}")))?;
    let entries = parse_config(&text)?;
    if let Some(e) = entries.iter().find(|e| e.key == "config") {
        return Err(Error::Config(format!("config line {}: nested config files are not supported", e.line)));
    }
    let mut out = argv[..2].to_vec();
    out.extend(config_args(&entries, &sub));
    out.extend(argv[2..].iter().cloned());
    Ok(out)
}

fn load(common: &CommonArgs) -> Result<LoadedData> {
    load_data(&common.format, common.data.as_deref(), common.test_data.as_deref(), common.seed)
}

fn emit(artifacts: &RunArtifacts, out: Option<&Path>) -> Result<()> {
    for line in &artifacts.metrics {
        println!("{line}");
    }
    if let Some(dir) = out {
        emit_report(artifacts, dir)?;
    }
    Ok(())
}

fn write_trace(trace: &SelectionTrace, path: Option<&Path>) -> Result<()> {
    let Some(path) = path else {
        return Ok(());
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    write_atomic(path, trace.to_jsonl().as_bytes())
}

fn select(args: &SelectArgs) -> Result<()> {
    let data = load(&args.common)?;
    let mut spec = SummarizeSpec::new(args.outer.selection(args.learner.inner(), args.common.seed));
    spec.scenario = args.scenario.scenario();
    spec.baselines = args.baselines.clone();
    spec.validation_size = args.scenario.validation_size;
    let report = pipelines::run_summarization(&data.train, &data.test, &spec)?;
    write_trace(&report.trace, args.outer.trace.as_deref())?;
    emit(&report.to_artifacts(), args.common.out.as_deref())?;
    if let Some(dir) = &args.common.out {
        learner::save_model(&report.model, &dir.join(MODEL_FILE))?;
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let data = load(&args.common)?;
    let model = learner::load_model(&args.model)?;
    let loss = learner::evaluate_loss(&model, data.test.examples())?;
    let artifacts = RunArtifacts {
        metrics: vec![json!({
            "test_size": data.test.len(),
            "accuracy": learner::accuracy(&model, &data.test),
            "loss": loss,
        })],
        ..RunArtifacts::default()
    };
    emit(&artifacts, args.common.out.as_deref())
}

fn baseline(args: &BaselineArgs) -> Result<()> {
    let data = load(&args.common)?;
    let mut spec = SummarizeSpec::new(args.outer.selection(args.learner.inner(), args.common.seed));
    spec.scenario = args.scenario.scenario();
    spec.validation_size = args.scenario.validation_size;
    let result = pipelines::run_baseline(&data.train, &data.test, &spec, args.method)?;
    let artifacts = RunArtifacts {
        metrics: vec![result.to_json()],
        coreset: Some(result.coreset.clone()),
        ..RunArtifacts::default()
    };
    emit(&artifacts, args.common.out.as_deref())
}

fn project(args: &ProjectArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| Error::Data(format!("{}: {e}", args.input.display())))?;
    let z = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("{} line {}: `{}` is not a number", args.input.display(), i + 1, l.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    if z.is_empty() {
        return Err(Error::Data(format!("{}: no values", args.input.display())));
    }
    let s = projection::project_default(&z, args.k)?;
    let body = report::format_values(&s);
    print!("{body}");
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        write_atomic(&dir.join(PROBABILITIES_FILE), body.as_bytes())?;
    }
    Ok(())
}

fn cl(args: &ClArgs) -> Result<()> {
    let data = load(&args.common)?;
    let split = match args.split.as_str() {
        "labels" => TaskSplit::Labels { tasks: args.tasks },
        "permuted" => TaskSplit::Permuted { tasks: args.tasks },
        other => return Err(Error::Config(format!("unknown split `{other}` (labels|permuted)"))),
    };
    let policy = match args.policy.as_str() {
        "selection" => MemoryPolicy::Selection,
        other => MemoryPolicy::Baseline(other.parse()?),
    };
    let spec = ContinualSpec {
        selection: args.outer.selection(args.learner.inner(), args.common.seed),
        memory: args.memory,
        split,
        policy,
    };
    let report = pipelines::run_continual(&data.train, &data.test, &spec)?;
    emit(&report.to_artifacts(), args.common.out.as_deref())
}

fn stream(args: &StreamArgs) -> Result<()> {
    let data = load(&args.common)?;
    let spec = StreamSpec {
        selection: args.outer.selection(args.learner.inner(), args.common.seed),
        memory: args.memory,
        batch: args.stream_batch,
        scenario: args.scenario.scenario(),
        validation_size: args.scenario.validation_size,
    };
    let report = pipelines::run_stream(&data.train, &data.test, &spec)?;
    emit(&report.to_artifacts(), args.common.out.as_deref())
}

fn features(args: &FeatureArgs) -> Result<()> {
    let data = load(&args.common)?;
    let mut spec = FeatureSpec::new(args.outer.selection(args.learner.inner(), args.common.seed));
    spec.validation_size = args.validation_size;
    spec.feature_noise_std = args.feature_noise;
    spec.informative = data.informative.clone();
    spec.image_shape = data.image_shape;
    let report = pipelines::run_features(&data.train, &data.test, &spec)?;
    write_trace(&report.trace, args.outer.trace.as_deref())?;
    emit(&report.to_artifacts(), args.common.out.as_deref())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Select(a) => select(a),
        Command::Eval(a) => eval(a),
        Command::Baseline(a) => baseline(a),
        Command::Project(a) => project(a),
        Command::Cl(a) => cl(a),
        Command::Stream(a) => stream(a),
        Command::Features(a) => features(a),
    }
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
