//! `autotwin` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 I/O failure, 4 domain
//! error (simulation, training, metrics), 5 the training budget only
//! allowed the mandatory candidate (outputs are still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use autotwin::automl::{build_twin, load_twin, save_twin, ModelError, Preset};
use autotwin::bench::{project_pipeline, published_projection, time_speedup, BenchError};
use autotwin::data::{full_grid, interval_sample, read_csv, write_csv, DataError, Target};
use autotwin::pipeline::{ensure_writable, PipelineConfig, PipelineError};
use autotwin::runtime::{predict_batch, read_configs_file, write_predictions_csv, RuntimeError};
use autotwin::signal::{add_gaussian_noise, denoise_dataset, FilterSpec, NoiseSpec, SignalError};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "autotwin",
    version,
    about = "Build and validate data-driven latency twins"
)]
struct Cli {
    /// Worker threads for data generation, training and batch prediction.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the sweep grid (or an interval sample of it) to a dataset CSV.
    Grid(GridArgs),
    /// Search for a twin on a dataset.
    Train(TrainArgs),
    /// Predict latencies for the configs in a CSV.
    Predict(PredictArgs),
    /// Score a twin against a dataset with true latencies.
    Eval(EvalArgs),
    /// Add seeded Gaussian noise to a dataset's latencies.
    Noise(NoiseArgs),
    /// Smooth a dataset's latencies with a Savitzky-Golay filter.
    Denoise(DenoiseArgs),
    /// Time the simulator against a twin and project pipeline savings.
    Bench(BenchArgs),
    /// Run the full experiment from a JSON config.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    out: PathBuf,
    /// Keep N evenly spaced configs of the grid.
    #[arg(long)]
    sample: Option<usize>,
    /// Pipeline config supplying the sweep and flow.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 300.0)]
    budget: f64,
    #[arg(long, default_value = "good")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write both paths' leaderboards as a JSON array.
    #[arg(long)]
    leaderboard: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    twin: PathBuf,
    /// CSV with bw1_mbps,q1_pkts,bw2_mbps,q2_pkts columns.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    twin: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 11)]
    window: usize,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    twin: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Evenly spaced grid configs to time.
    #[arg(long, default_value_t = 100)]
    configs: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Configs simulated to build the training set, for the projection.
    #[arg(long, default_value_t = 400)]
    collect: u64,
    /// Training wall time to book in the projection.
    #[arg(long, default_value_t = 0.0)]
    train_time: f64,
    /// Pipeline config supplying the sweep and flow.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    sample: Option<usize>,
}

enum Failure {
    Args(String),
    Io(String),
    Domain(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Args(_) => 2,
            Failure::Io(_) => 3,
            Failure::Domain(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Args(m) | Failure::Io(m) | Failure::Domain(m) => m,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(e) => Failure::Io(e.to_string()),
            DataError::InvalidSweep(_)
            | DataError::EmptyAxis(_)
            | DataError::InvalidArgument(_) => Failure::Args(e.to_string()),
            other => Failure::Domain(other.to_string()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(e) => Failure::Io(e.to_string()),
            ModelError::Data(e) => e.into(),
            ModelError::InvalidBudget(_) | ModelError::InvalidParam(_) => {
                Failure::Args(e.to_string())
            }
            other => Failure::Domain(other.to_string()),
        }
    }
}

impl From<SignalError> for Failure {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::TooShort { .. } => Failure::Domain(e.to_string()),
            other => Failure::Args(other.to_string()),
        }
    }
}

impl From<RuntimeError> for Failure {
    fn from(e: RuntimeError) -> Self {
        match e {
            RuntimeError::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Domain(other.to_string()),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Data(e) => e.into(),
            BenchError::Model(e) => e.into(),
            BenchError::Signal(e) => e.into(),
            BenchError::InvalidArgument(_) => Failure::Args(e.to_string()),
            other => Failure::Domain(other.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => Failure::Args(e.to_string()),
            PipelineError::Io { .. } => Failure::Io(e.to_string()),
            PipelineError::Domain { .. } => Failure::Domain(e.to_string()),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Domain(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            Ok(PipelineConfig::from_json_str(&text)?)
        }
    }
}

fn cmd_grid(a: GridArgs) -> CmdResult {
    let config = load_config(a.config.as_deref())?;
    config.sweep.validate()?;
    let start = Instant::now();
    let grid = full_grid(&config.sweep)?;
    let configs = match a.sample {
        Some(n) => interval_sample(&grid, n)?,
        None => grid,
    };
    let ds = autotwin::data::Dataset::new(
        autotwin::data::simulate_configs(&configs, &config.flow)?,
        autotwin::data::Provenance::Simulated,
    );
    write_csv(&ds, &a.out)?;
    println!(
        "wrote {} rows to {} in {:.1} s",
        ds.len(),
        a.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(0)
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    if !(a.budget.is_finite() && a.budget > 0.0) {
        return Err(Failure::Args(format!(
            "--budget must be positive, got {}",
            a.budget
        )));
    }
    let data = read_csv(&a.data)?;
    let build = build_twin(&data, a.budget, a.preset, a.seed)?;
    save_twin(&build.twin, &a.out)?;
    if let Some(lb) = &a.leaderboard {
        let v = serde_json::to_value(&build.leaderboards)
            .map_err(|e| Failure::Domain(e.to_string()))?;
        write_json(lb, &v)?;
    }
    let mut starved = false;
    for (lb, target) in build.leaderboards.iter().zip(Target::BOTH) {
        let head = &lb.entries[0];
        println!(
            "{}: {} (validation accuracy {:.3}%, {} candidates, {:.1} s)",
            target.name(),
            head.model,
            head.accuracy_pct,
            lb.candidates_trained,
            lb.elapsed_s
        );
        starved |= lb.starved();
    }
    println!("twin written to {}", a.out.display());
    Ok(if starved { 5 } else { 0 })
}

fn cmd_predict(a: PredictArgs) -> CmdResult {
    let twin = load_twin(&a.twin)?;
    let configs = read_configs_file(&a.data)?;
    let batch = predict_batch(&twin, &configs)?;
    let f = fs::File::create(&a.out)?;
    write_predictions_csv(&batch.predictions, std::io::BufWriter::new(f))?;
    let outside = batch.predictions.iter().filter(|p| p.extrapolation).count();
    println!(
        "predicted {} configs ({} outside the training range) in {:.3} s",
        batch.predictions.len(),
        outside,
        batch.total_time_s
    );
    Ok(0)
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let twin = load_twin(&a.twin)?;
    let truth = read_csv(&a.truth)?;
    let m1 = twin.evaluate(&truth, Target::Path1)?;
    let m2 = twin.evaluate(&truth, Target::Path2)?;
    write_json(
        &a.report,
        &json!({
            "rows": truth.len(),
            "truth_fingerprint": truth.fingerprint(),
            "twin_train_fingerprint": twin.metadata.train_fingerprint,
            "path1": m1,
            "path2": m2,
        }),
    )?;
    println!(
        "accuracy: path1 {:.3}% (rmse {:.4} s), path2 {:.3}% (rmse {:.4} s) over {} rows",
        m1.accuracy_pct,
        m1.rmse,
        m2.accuracy_pct,
        m2.rmse,
        truth.len()
    );
    Ok(0)
}

fn cmd_noise(a: NoiseArgs) -> CmdResult {
    let spec = NoiseSpec {
        sigma: a.sigma,
        mu: a.mu,
        seed: a.seed,
        ..NoiseSpec::default()
    };
    spec.validate()?;
    let data = read_csv(&a.input)?;
    let (noised, report) = add_gaussian_noise(&data, &spec)?;
    write_csv(&noised, &a.out)?;
    if let Some(p) = &a.report {
        write_json(p, &serde_json::to_value(report).expect("report serializes"))?;
    }
    println!(
        "noised {} rows (sigma {} s, {} values clamped) to {}",
        report.rows,
        spec.sigma,
        report.clamp_count,
        a.out.display()
    );
    Ok(0)
}

fn cmd_denoise(a: DenoiseArgs) -> CmdResult {
    let spec = FilterSpec::new(a.window, a.order)?;
    let data = read_csv(&a.input)?;
    let (cleaned, report) = denoise_dataset(&data, &spec, NoiseSpec::default().clamp_floor_s)?;
    write_csv(&cleaned, &a.out)?;
    if let Some(p) = &a.report {
        write_json(p, &serde_json::to_value(report).expect("report serializes"))?;
    }
    println!(
        "filtered {} rows (window {}, order {}, {} values clamped) to {}",
        report.rows,
        report.window,
        report.order,
        report.clamp_count,
        a.out.display()
    );
    Ok(0)
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let config = load_config(a.config.as_deref())?;
    let twin = load_twin(&a.twin)?;
    let grid = full_grid(&config.sweep)?;
    let configs = interval_sample(&grid, a.configs.min(grid.len()))?;
    let speedup = time_speedup(&twin, &config.flow, &configs, a.repeats)?;
    let batch = predict_batch(&twin, &grid)?;
    let projection = project_pipeline(
        grid.len() as u64,
        speedup.sim_mean_s,
        a.collect,
        a.train_time,
        batch.total_time_s,
    )?;
    write_json(
        &a.report,
        &json!({
            "n_timed": speedup.n_timed,
            "repeats": speedup.repeats,
            "published_projection": published_projection(),
            "timing": {
                "speedup": speedup,
                "projection": projection,
                "full_grid_batch_time_s": batch.total_time_s,
                "full_grid_batch_size": grid.len(),
            },
        }),
    )?;
    println!(
        "simulator {:.6} s/config, twin {:.9} s/config: {:.1}x faster; projected pipeline saving {:.1}x",
        speedup.sim_mean_s, speedup.twin_mean_s, speedup.speedup, projection.projection_factor
    );
    Ok(0)
}

fn cmd_pipeline(a: PipelineArgs) -> CmdResult {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(out) = a.out {
        config.out_dir = out;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(b) = a.budget {
        config.budget_s = b;
    }
    if let Some(p) = a.preset {
        config.preset = p;
    }
    if let Some(n) = a.sample {
        config.sample_n = n;
    }
    config.validate()?;
    ensure_writable(&config.out_dir).map_err(|e| {
        Failure::Io(format!(
            "output directory {}: {e}",
            config.out_dir.display()
        ))
    })?;
    let outcome = autotwin::pipeline::run(&config)?;
    print!(
        "{}",
        fs::read_to_string(config.out_dir.join("summary.txt"))?
    );
    let t = &outcome.report.timing;
    println!(
        "speedup {:.1}x, projected pipeline saving {:.1}x",
        t.speedup.speedup, t.projection.projection_factor
    );
    println!(
        "{} files written to {}",
        outcome.files.len(),
        config.out_dir.display()
    );
    let starved = outcome
        .study
        .runs
        .iter()
        .flat_map(|r| r.build.leaderboards.iter())
        .any(|lb| lb.starved());
    Ok(if starved { 5 } else { 0 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let jobs = match (&cli.command, cli.jobs) {
        (_, Some(j)) => Some(j),
        (Command::Pipeline(p), None) => p
            .config
            .as_deref()
            .and_then(|c| load_config(Some(c)).ok())
            .and_then(|c| c.jobs),
        _ => None,
    };
    if let Some(j) = jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
        {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Grid(a) => cmd_grid(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Noise(a) => cmd_noise(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
