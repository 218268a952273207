//! End-to-end experiment: generate, sample, train, evaluate, noise,
//! denoise, retrain, bench. Every artifact lands in one output directory.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::automl::{save_twin, Leaderboard, ModelError, Preset};
use crate::bench::{
    project_pipeline, published_projection, quality_study_on, strip_timing, time_speedup,
    train_and_heldout, BenchError, BenchReport, BenchTiming, QualityStudy, TrainTimes, Variant,
};
use crate::data::{full_grid, interval_sample, write_csv, DataError, SweepSpec, Target};
use crate::runtime::{predict_batch, write_predictions_csv, RuntimeError};
use crate::seeds::derive_seed;
use crate::signal::{FilterSpec, NoiseSpec, SignalError};
use crate::sim::FlowSpec;

/// Noise parameters as configured; the seed is derived from the pipeline
/// seed so one number controls every random stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    pub sigma: f64,
    pub mu: f64,
    pub clamp_floor_s: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        let d = NoiseSpec::default();
        Self {
            sigma: d.sigma,
            mu: d.mu,
            clamp_floor_s: d.clamp_floor_s,
        }
    }
}

impl NoiseSettings {
    pub fn spec(&self, pipeline_seed: u64) -> NoiseSpec {
        NoiseSpec {
            sigma: self.sigma,
            mu: self.mu,
            seed: derive_seed(pipeline_seed, "noise"),
            clamp_floor_s: self.clamp_floor_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sweep: SweepSpec,
    pub flow: FlowSpec,
    pub sample_n: usize,
    pub heldout_n: usize,
    pub budget_s: f64,
    pub preset: Preset,
    pub seed: u64,
    pub noise: NoiseSettings,
    pub filter: FilterSpec,
    pub bench_configs: usize,
    pub bench_repeats: usize,
    pub out_dir: PathBuf,
    /// Worker cap for data generation and training; `None` uses all cores.
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sweep: SweepSpec::default(),
            flow: FlowSpec::default(),
            sample_n: 400,
            heldout_n: 2000,
            budget_s: 300.0,
            preset: Preset::Good,
            seed: 2024,
            noise: NoiseSettings::default(),
            filter: FilterSpec::default(),
            bench_configs: 100,
            bench_repeats: 5,
            out_dir: PathBuf::from("pipeline_out"),
            jobs: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_str(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        self.sweep
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.flow
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.noise
            .spec(self.seed)
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        FilterSpec::new(self.filter.window(), self.filter.order())
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.sample_n < self.filter.window() {
            return bad(format!(
                "sample_n {} is shorter than the filter window {}",
                self.sample_n,
                self.filter.window()
            ));
        }
        if !(self.budget_s.is_finite() && self.budget_s > 0.0) {
            return bad(format!("budget_s must be positive, got {}", self.budget_s));
        }
        if self.heldout_n == 0 {
            return bad("heldout_n must be positive".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        Ok(())
    }

    /// Parameters embedded in the report. Output location and worker count
    /// do not affect results, so they are left out.
    pub fn rerun_parameters(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("out_dir");
            m.remove("jobs");
            m.insert("noise_seed".into(), derive_seed(self.seed, "noise").into());
        }
        v
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("stage `{stage}`: {source}")]
    Io {
        stage: &'static str,
        #[source]
        source: io::Error,
    },
    #[error("stage `{stage}`: {message}")]
    Domain {
        stage: &'static str,
        message: String,
    },
}

impl PipelineError {
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            PipelineError::Config(_) => None,
            PipelineError::Io { stage, .. } | PipelineError::Domain { stage, .. } => Some(stage),
        }
    }
}

/// Errors that may wrap an I/O failure.
trait StageError: std::fmt::Display {
    fn into_io(self) -> Result<io::Error, Self>
    where
        Self: Sized;
}

impl StageError for io::Error {
    fn into_io(self) -> Result<io::Error, Self> {
        Ok(self)
    }
}

impl StageError for DataError {
    fn into_io(self) -> Result<io::Error, Self> {
        match self {
            DataError::Io(e) => Ok(e),
            other => Err(other),
        }
    }
}

impl StageError for ModelError {
    fn into_io(self) -> Result<io::Error, Self> {
        match self {
            ModelError::Io(e) | ModelError::Data(DataError::Io(e)) => Ok(e),
            other => Err(other),
        }
    }
}

impl StageError for RuntimeError {
    fn into_io(self) -> Result<io::Error, Self> {
        match self {
            RuntimeError::Io(e) => Ok(e),
            other => Err(other),
        }
    }
}

impl StageError for BenchError {
    fn into_io(self) -> Result<io::Error, Self> {
        match self {
            BenchError::Data(DataError::Io(e)) | BenchError::Model(ModelError::Io(e)) => Ok(e),
            other => Err(other),
        }
    }
}

impl StageError for SignalError {
    fn into_io(self) -> Result<io::Error, Self> {
        Err(self)
    }
}

fn at<T, E: StageError>(stage: &'static str, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| match e.into_io() {
        Ok(source) => PipelineError::Io { stage, source },
        Err(e) => PipelineError::Domain {
            stage,
            message: e.to_string(),
        },
    })
}

/// Fails early, before any simulation, when `dir` cannot be written.
pub fn ensure_writable(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"")?;
    fs::remove_file(probe)
}

pub struct PipelineOutcome {
    pub report: BenchReport,
    pub study: QualityStudy,
    pub files: Vec<PathBuf>,
}

impl PipelineOutcome {
    pub fn leaderboards(&self, variant: Variant) -> &[Leaderboard; 2] {
        &self.study.run(variant).build.leaderboards
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}

pub fn run(config: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    config.validate()?;
    let out = config.out_dir.as_path();
    at("prepare output directory", ensure_writable(out))?;
    let mut files = Vec::new();
    let mut record = |name: String| {
        let p = out.join(name);
        files.push(p.clone());
        p
    };

    log::info!(
        "simulating {} training and {} held-out configs",
        config.sample_n,
        config.heldout_n
    );
    let (train, heldout) = at(
        "generate",
        train_and_heldout(
            &config.sweep,
            &config.flow,
            config.sample_n,
            config.heldout_n,
            config.seed,
        ),
    )?;
    at(
        "generate",
        write_csv(&train, record("train_raw.csv".into())),
    )?;
    at(
        "generate",
        write_csv(&heldout, record("heldout.csv".into())),
    )?;

    let noise = config.noise.spec(config.seed);
    let study = at(
        "train",
        quality_study_on(
            &train,
            &heldout,
            &noise,
            &config.filter,
            config.budget_s,
            config.preset,
            config.seed,
        ),
    )?;
    at(
        "noise",
        write_json(&record("noise.json".into()), &study.noise),
    )?;
    at(
        "denoise",
        write_json(&record("filter.json".into()), &study.filter),
    )?;

    for run in &study.runs {
        let v = run.variant.name();
        if run.variant != Variant::Raw {
            at(
                "write datasets",
                write_csv(&run.train, record(format!("train_{v}.csv"))),
            )?;
        }
        at(
            "write twins",
            save_twin(&run.build.twin, record(format!("twin_{v}.json"))),
        )?;
        at(
            "write leaderboards",
            write_json(
                &record(format!("leaderboard_{v}.json")),
                &run.build.leaderboards,
            ),
        )?;
        for target in Target::BOTH {
            let mut csv = String::from("index,latency_s\n");
            for (i, y) in study.plot_series(run.variant, target) {
                writeln!(csv, "{i},{y}").expect("string write");
            }
            at(
                "write plots",
                fs::write(record(format!("plot_{v}_{}.csv", target.name())), csv),
            )?;
        }
    }

    let raw_twin = &study.run(Variant::Raw).build.twin;
    let held_pred = at("predict", predict_batch(raw_twin, &heldout.configs()))?;
    let f = at(
        "predict",
        fs::File::create(record("predictions_heldout.csv".into())),
    )?;
    at(
        "predict",
        write_predictions_csv(&held_pred.predictions, io::BufWriter::new(f)),
    )?;

    log::info!("timing simulator against twin");
    let grid = at("bench", full_grid(&config.sweep))?;
    let bench_n = config.bench_configs.min(grid.len());
    let timed_configs = at("bench", interval_sample(&grid, bench_n))?;
    let speedup = at(
        "bench",
        time_speedup(raw_twin, &config.flow, &timed_configs, config.bench_repeats),
    )?;
    let full_batch = at("bench", predict_batch(raw_twin, &grid))?;
    let train_times = TrainTimes {
        raw: study.run(Variant::Raw).build.train_time_s,
        noised: study.run(Variant::Noised).build.train_time_s,
        cleaned: study.run(Variant::Cleaned).build.train_time_s,
    };
    let projection = at(
        "bench",
        project_pipeline(
            grid.len() as u64,
            speedup.sim_mean_s,
            config.sample_n as u64,
            train_times.raw,
            full_batch.total_time_s,
        ),
    )?;

    let report = BenchReport {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: config.rerun_parameters(),
        n_timed: speedup.n_timed,
        repeats: speedup.repeats,
        heldout_rows: heldout.len(),
        accuracy: study.accuracies(),
        noise: study.noise,
        filter: study.filter,
        published_projection: published_projection(),
        timing: BenchTiming {
            speedup,
            projection,
            train_time_s: train_times,
            full_grid_batch_time_s: full_batch.total_time_s,
            full_grid_batch_size: grid.len(),
        },
    };
    at("report", write_json(&record("report.json".into()), &report))?;
    at(
        "report",
        fs::write(
            record("summary.txt".into()),
            render_summary(&report, &study),
        ),
    )?;
    at(
        "report",
        fs::write(record("timing.txt".into()), render_timing(&report, &study)),
    )?;
    Ok(PipelineOutcome {
        report,
        study,
        files,
    })
}

/// Deterministic text tables: per-model validation accuracy of the raw
/// twin's search, then held-out accuracy per training-data variant.
pub fn render_summary(report: &BenchReport, study: &QualityStudy) -> String {
    let mut s = String::new();
    let [lb1, lb2] = &study.run(Variant::Raw).build.leaderboards;
    let _ = writeln!(
        s,
        "Model accuracy on the validation split (raw training data, %)"
    );
    let _ = writeln!(s, "{:<26} {:>10} {:>10}", "Model", "Path 1", "Path 2");
    for e in &lb1.entries {
        let other = lb2
            .entries
            .iter()
            .find(|o| o.model == e.model)
            .map_or("-".to_string(), |o| format!("{:.4}", o.accuracy_pct));
        let _ = writeln!(s, "{:<26} {:>10.4} {:>10}", e.model, e.accuracy_pct, other);
    }
    for e in lb2
        .entries
        .iter()
        .filter(|e| !lb1.entries.iter().any(|o| o.model == e.model))
    {
        let _ = writeln!(s, "{:<26} {:>10} {:>10.4}", e.model, "-", e.accuracy_pct);
    }
    let _ = writeln!(
        s,
        "Selected: path1 {}, path2 {}",
        study.run(Variant::Raw).build.twin.path1.family().display(),
        study.run(Variant::Raw).build.twin.path2.family().display()
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "Held-out accuracy by training data ({} clean configs, fraction)",
        report.heldout_rows
    );
    let _ = writeln!(
        s,
        "{:<26} {:>10} {:>10}",
        "Training data", "Path 1", "Path 2"
    );
    for a in &report.accuracy {
        let _ = writeln!(
            s,
            "{:<26} {:>10.4} {:>10.4}",
            a.variant.name(),
            a.path1.accuracy_pct / 100.0,
            a.path2.accuracy_pct / 100.0
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "Noise: sigma {} s, {} values clamped. Filter: window {}, order {}, {} values clamped.",
        report.noise.spec.sigma,
        report.noise.clamp_count,
        report.filter.window,
        report.filter.order,
        report.filter.clamp_count
    );
    let p = &report.published_projection;
    let _ = writeln!(
        s,
        "Published projection: {:.1} h / {:.1} h = {:.1}x",
        p.full_grid_sim_hours, p.pipeline_hours, p.projection_factor
    );
    s
}

/// Measured times. Every figure here varies between runs.
pub fn render_timing(report: &BenchReport, study: &QualityStudy) -> String {
    let mut s = String::new();
    let [lb1, lb2] = &study.run(Variant::Raw).build.leaderboards;
    let _ = writeln!(s, "Model fit time (raw training data, s)");
    let _ = writeln!(s, "{:<26} {:>10} {:>10}", "Model", "Path 1", "Path 2");
    for e in &lb1.entries {
        let other = lb2
            .entries
            .iter()
            .find(|o| o.model == e.model)
            .map_or("-".to_string(), |o| format!("{:.4}", o.fit_time_s));
        let _ = writeln!(s, "{:<26} {:>10.4} {:>10}", e.model, e.fit_time_s, other);
    }
    let _ = writeln!(
        s,
        "{:<26} {:>10.4} {:>10.4}",
        "Search total", lb1.elapsed_s, lb2.elapsed_s
    );
    let _ = writeln!(s);
    let t = &report.timing;
    let _ = writeln!(
        s,
        "Simulator {:.6} s/config, twin {:.9} s/config, speedup {:.1}x ({} configs x {} repeats)",
        t.speedup.sim_mean_s,
        t.speedup.twin_mean_s,
        t.speedup.speedup,
        t.speedup.n_timed,
        t.speedup.repeats
    );
    let _ = writeln!(
        s,
        "Twin batch over {} configs: {:.3} s",
        t.full_grid_batch_size, t.full_grid_batch_time_s
    );
    let _ = writeln!(
        s,
        "Training: raw {:.2} s, noised {:.2} s, cleaned {:.2} s",
        t.train_time_s.raw, t.train_time_s.noised, t.train_time_s.cleaned
    );
    let p = &t.projection;
    let _ = writeln!(
        s,
        "Measured projection: {:.3} h / {:.3} h = {:.1}x",
        p.full_grid_sim_hours, p.pipeline_hours, p.projection_factor
    );
    s
}

/// Files excluded whole from determinism comparisons.
pub const TIMING_FILES: [&str; 1] = ["timing.txt"];

/// Contents of `path` with quarantined timing removed: JSON documents
/// are parsed and stripped, other files are returned verbatim, and files
/// in [`TIMING_FILES`] yield `None`.
pub fn comparable_contents(path: &Path) -> io::Result<Option<Vec<u8>>> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if TIMING_FILES.contains(&name) {
        return Ok(None);
    }
    let bytes = fs::read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let mut v: Value = serde_json::from_slice(&bytes).map_err(io::Error::other)?;
        strip_timing(&mut v);
        return Ok(Some(
            serde_json::to_vec_pretty(&v).map_err(io::Error::other)?,
        ));
    }
    Ok(Some(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_fill_missing_fields() {
        let c = PipelineConfig::from_json_str(r#"{"seed": 9, "sample_n": 50}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.sample_n, 50);
        assert_eq!(c.budget_s, 300.0);
        assert_eq!(c.preset, Preset::Good);
        assert!(c.validate().is_ok());
        assert!(PipelineConfig::from_json_str(r#"{"sede": 9}"#).is_err());
    }

    #[test]
    fn filter_from_json_is_validated() {
        let c = PipelineConfig::from_json_str(r#"{"filter": {"window": 4, "order": 3}}"#).unwrap();
        assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
    }

    #[test]
    fn rerun_parameters_omit_location() {
        let v = PipelineConfig::default().rerun_parameters();
        assert!(v.get("out_dir").is_none());
        assert!(v.get("jobs").is_none());
        assert!(v.get("noise_seed").is_some());
    }
}
