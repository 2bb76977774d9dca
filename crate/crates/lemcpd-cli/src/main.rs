//! Command-line entry point: scenario generation, detection, prediction,
//! and benchmarking with reproducible seeded configs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use lemcpd::bench::{metrics_to_csv, run_benchmark, sweep, ParamGrid};
use lemcpd::detector::{detect_sequence, rank_topk, DetectorConfig, LaplacianMode};
use lemcpd::graphseq::{
    load_labels, load_sequence, save_labels, save_sequence, GraphSnapshot, SequenceFormat,
};
use lemcpd::lemcore::{adaptive_weights, fit, fit_longterm, predict_next};
use lemcpd::synth::{generate, ScenarioSpec};
use lemcpd::{Error, GraphSequence};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "lemcpd", about = "Change point detection for time-varying graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled scenario.
    Generate(GenerateArgs),
    /// Detect change points in a sequence.
    Detect(DetectArgs),
    /// Predict the next snapshot and report MAE when ground truth exists.
    Predict(PredictArgs),
    /// Run the benchmark harness (full model, ablation, baselines, sweeps).
    Bench(BenchArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Clone, Copy, Default)]
struct DetectorOverrides {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Latent dimension.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Short window size T.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long = "long-multiplier")]
    long_multiplier: Option<usize>,
    #[arg(long, value_parser = parse_laplacian)]
    laplacian: Option<LaplacianMode>,
}

fn parse_laplacian(s: &str) -> Result<LaplacianMode, String> {
    match s {
        "auto" => Ok(LaplacianMode::Auto),
        "undirected" => Ok(LaplacianMode::Undirected),
        "directed" => Ok(LaplacianMode::Directed),
        other => Err(format!("unknown laplacian mode: {other}")),
    }
}

impl DetectorOverrides {
    fn apply(&self, cfg: &mut DetectorConfig) {
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.k {
            cfg.hp.k = v;
        }
        if let Some(v) = self.lambda1 {
            cfg.hp.lambda1 = v;
        }
        if let Some(v) = self.lambda2 {
            cfg.hp.lambda2 = v;
        }
        if let Some(v) = self.window {
            cfg.hp.window = v;
        }
        if let Some(v) = self.long_multiplier {
            cfg.hp.long_multiplier = v;
        }
        if let Some(v) = self.laplacian {
            cfg.laplacian = v;
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    overrides: DetectorOverrides,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    overrides: DetectorOverrides,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    overrides: DetectorOverrides,
}

#[derive(Serialize, Deserialize)]
struct DetectRunConfig {
    sequence: PathBuf,
    seed: u64,
    #[serde(default)]
    detector: DetectorConfig,
    /// Size of the printed top-K summary.
    #[serde(default = "default_top_k")]
    top_k: usize,
}

fn default_top_k() -> usize {
    3
}

#[derive(Serialize, Deserialize)]
struct PredictRunConfig {
    sequence: PathBuf,
    seed: u64,
    #[serde(default)]
    detector: DetectorConfig,
    /// Timestamp to predict; defaults to the last timestamp of the
    /// sequence, for which ground truth is available.
    #[serde(default)]
    target: Option<i64>,
}

#[derive(Serialize, Deserialize)]
struct BenchRunConfig {
    /// Generate the benchmark data in-process...
    #[serde(default)]
    scenario: Option<ScenarioSpec>,
    /// ...or read it from disk.
    #[serde(default)]
    sequence: Option<PathBuf>,
    #[serde(default)]
    labels: Option<PathBuf>,
    seed: u64,
    #[serde(default)]
    detector: DetectorConfig,
    #[serde(default = "default_top_k")]
    k: usize,
    #[serde(default = "bench_scenario_id")]
    scenario_id: String,
    /// Optional parameter sweep appended to the metric table.
    #[serde(default)]
    grid: Option<ParamGrid>,
}

fn bench_scenario_id() -> String {
    "bench".into()
}

enum CliError {
    Config(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Lib(e) => match e {
                Error::InvalidConfig(_) => EXIT_CONFIG,
                Error::NonFiniteLoss | Error::NonConvergence { .. } => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

fn out_dir(common: &CommonArgs) -> Result<PathBuf, CliError> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_echo<T: Serialize>(dir: &Path, config: &T) -> Result<(), CliError> {
    let path = dir.join("run_config.json");
    let text = serde_json::to_string_pretty(config).expect("config serialization");
    fs::write(&path, text).map_err(|e| CliError::Lib(e.into()))?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut spec: ScenarioSpec = read_config(&args.common.config)?;
    if let Some(seed) = args.common.seed {
        spec.seed = seed;
    }
    let dir = out_dir(&args.common)?;
    let (seq, labels) = generate(&spec)?;
    let seq_path = dir.join("sequence.edges");
    let label_path = dir.join("labels.txt");
    save_sequence(&seq, &seq_path)?;
    save_labels(&labels, &label_path)?;
    write_echo(&dir, &spec)?;
    println!("{}", seq_path.display());
    println!("{}", label_path.display());
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    let mut config: DetectRunConfig = read_config(&args.common.config)?;
    if let Some(seed) = args.common.seed {
        config.seed = seed;
    }
    args.overrides.apply(&mut config.detector);
    let dir = out_dir(&args.common)?;
    let seq = load_sequence(&config.sequence, SequenceFormat::EdgeList)?;
    let report = detect_sequence(&seq, &config.detector, config.seed)?;
    let csv_path = dir.join("report.csv");
    let json_path = dir.join("report.json");
    fs::write(&csv_path, report.to_csv()).map_err(Error::from)?;
    fs::write(&json_path, report.to_json()).map_err(Error::from)?;
    write_echo(&dir, &config)?;
    let k = config.top_k.min(report.records.len());
    let top = rank_topk(&report, k)?;
    println!("report: {}", csv_path.display());
    println!("report: {}", json_path.display());
    print!("top-{k}:");
    for t in top {
        print!(" {t}");
    }
    println!();
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let mut config: PredictRunConfig = read_config(&args.common.config)?;
    if let Some(seed) = args.common.seed {
        config.seed = seed;
    }
    args.overrides.apply(&mut config.detector);
    config.detector.validate()?;
    let dir = out_dir(&args.common)?;
    let seq = load_sequence(&config.sequence, SequenceFormat::EdgeList)?;
    let target = config.target.unwrap_or_else(|| seq.last_timestamp());

    let hp = &config.detector.hp;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let long = seq.window(target - 1, hp.long_window())?;
    let short = seq.window(target - 1, hp.window)?;
    let r = adaptive_weights(&long)?;
    let guide = fit_longterm(&long, &r, hp, None, &mut rng)?;
    let (state, _trace) = fit(&short, &guide, hp, None, &mut rng)?;
    let predicted = predict_next(&state);
    let snapshot = GraphSnapshot::new(target, predicted, true);
    let out_seq = GraphSequence::new(vec![snapshot.clone()])?;
    let pred_path = dir.join("prediction.edges");
    save_sequence(&out_seq, &pred_path)?;
    write_echo(&dir, &config)?;
    println!("{}", pred_path.display());
    if target <= seq.last_timestamp() {
        let actual = seq.get(target)?;
        let mae = lemcpd::bench::mae(&snapshot, actual, None)?;
        println!("mae: {mae:.6}");
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let mut config: BenchRunConfig = read_config(&args.common.config)?;
    if let Some(seed) = args.common.seed {
        config.seed = seed;
    }
    args.overrides.apply(&mut config.detector);
    let dir = out_dir(&args.common)?;
    let (seq, labels) = match (&config.scenario, &config.sequence, &config.labels) {
        (Some(spec), _, _) => {
            let mut spec = spec.clone();
            spec.seed = config.seed;
            generate(&spec)?
        }
        (None, Some(seq_path), Some(label_path)) => {
            let seq = load_sequence(seq_path, SequenceFormat::EdgeList)?;
            let labels = load_labels(label_path)?;
            (seq, labels)
        }
        _ => {
            return Err(CliError::Config(
                "bench config needs either a scenario or sequence + labels paths".into(),
            ))
        }
    };
    let mut rows = run_benchmark(
        &seq,
        &labels,
        &config.detector,
        config.k,
        &config.scenario_id,
        config.seed,
    )?;
    if let Some(grid) = &config.grid {
        rows.extend(sweep(
            &seq,
            &labels,
            &config.detector,
            grid,
            config.k,
            &config.scenario_id,
            config.seed,
        )?);
    }
    let csv_path = dir.join("metrics.csv");
    fs::write(&csv_path, metrics_to_csv(&rows)).map_err(Error::from)?;
    write_echo(&dir, &config)?;
    println!("{}", csv_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.exit_code(), e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
