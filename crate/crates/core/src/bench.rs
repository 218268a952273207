//! Twin-versus-simulator evaluation: execution-time speedup, full-grid
//! pipeline projection, and the raw/noised/cleaned training-data study.

use std::collections::BTreeSet;
use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::automl::{build_twin, Metrics, ModelError, Preset, Twin, TwinBuild};
use crate::data::{
    full_grid, interval_indices, random_grid_indices, simulate_configs, DataError, Dataset,
    Provenance, SweepSpec, Target,
};
use crate::seeds::derive_seed;
use crate::signal::{
    add_gaussian_noise, denoise_dataset, FilterReport, FilterSpec, NoiseReport, NoiseSpec,
    SignalError,
};
use crate::sim::{simulate, FlowSpec, NetworkConfig, SimError};

pub const MIN_TIMED_CONFIGS: usize = 30;
pub const MIN_REPEATS: usize = 3;
/// Shortest timed window accepted before the inner loop count is raised.
pub const MIN_TIMED_WINDOW_S: f64 = 0.01;
const MAX_INNER_LOOPS: u64 = 1 << 24;

/// Published constants: a 900 h full-grid simulation against a 3.4 h
/// collect-train-predict pipeline.
pub const PUBLISHED_FULL_GRID_HOURS: f64 = 900.0;
pub const PUBLISHED_PIPELINE_HOURS: f64 = 3.4;
pub const PUBLISHED_GRID_SIZE: u64 = 194_481;

/// Report keys holding wall-clock measurements or timestamps. They vary
/// between otherwise identical runs and are ignored by determinism checks.
pub const TIMING_KEYS: [&str; 7] = [
    "timing",
    "fit_time_s",
    "predict_time_s",
    "elapsed_s",
    "created_unix_s",
    "max_fit_time_s",
    "train_time_s",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark argument: {0}")]
    InvalidArgument(String),
    #[error("timer resolution too coarse: {0}")]
    Unmeasurable(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupTiming {
    pub sim_mean_s: f64,
    pub twin_mean_s: f64,
    pub speedup: f64,
    pub n_timed: usize,
    pub repeats: usize,
    /// Passes over the config list per twin repeat, raised until one
    /// repeat spans at least [`MIN_TIMED_WINDOW_S`].
    pub twin_inner_loops: u64,
}

/// Mean wall time per call of `f` over `items`, averaged over `repeats`.
/// The list is replayed until a repeat lasts at least `min_window_s`;
/// returns the mean and the number of passes used.
pub fn mean_time_per_call<T, F>(
    items: &[T],
    repeats: usize,
    min_window_s: f64,
    mut f: F,
) -> Result<(f64, u64), BenchError>
where
    F: FnMut(&T) -> Result<(), BenchError>,
{
    if items.is_empty() || repeats == 0 {
        return Err(BenchError::InvalidArgument("nothing to time".into()));
    }
    let run = |loops: u64, f: &mut F| -> Result<f64, BenchError> {
        let start = Instant::now();
        for _ in 0..loops {
            for it in items {
                f(it)?;
            }
        }
        Ok(start.elapsed().as_secs_f64())
    };
    let mut loops = 1u64;
    loop {
        let t = run(loops, &mut f)?;
        if t >= min_window_s {
            break;
        }
        if loops >= MAX_INNER_LOOPS {
            if t > 0.0 {
                break;
            }
            return Err(BenchError::Unmeasurable(format!(
                "{} calls x {loops} passes took no measurable time",
                items.len()
            )));
        }
        loops *= 2;
    }
    let mut total = 0.0;
    for _ in 0..repeats {
        total += run(loops, &mut f)? / (loops as f64 * items.len() as f64);
    }
    Ok((total / repeats as f64, loops))
}

/// Times `simulate` and twin inference over the same configs on a
/// dedicated single-thread pool.
pub fn time_speedup(
    twin: &Twin,
    flow: &FlowSpec,
    configs: &[NetworkConfig],
    repeats: usize,
) -> Result<SpeedupTiming, BenchError> {
    if configs.len() < MIN_TIMED_CONFIGS {
        return Err(BenchError::InvalidArgument(format!(
            "need at least {MIN_TIMED_CONFIGS} configs, got {}",
            configs.len()
        )));
    }
    if repeats < MIN_REPEATS {
        return Err(BenchError::InvalidArgument(format!(
            "need at least {MIN_REPEATS} repeats, got {repeats}"
        )));
    }
    flow.validate()?;
    for c in configs {
        c.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| BenchError::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        let (sim_mean_s, _) = mean_time_per_call(configs, repeats, 0.0, |c| {
            black_box(simulate(black_box(c), flow)?);
            Ok(())
        })?;
        let (twin_mean_s, twin_inner_loops) =
            mean_time_per_call(configs, repeats, MIN_TIMED_WINDOW_S, |c| {
                black_box(twin.predict_features(&black_box(c).features()));
                Ok(())
            })?;
        Ok(SpeedupTiming {
            sim_mean_s,
            twin_mean_s,
            speedup: sim_mean_s / twin_mean_s,
            n_timed: configs.len(),
            repeats,
            twin_inner_loops,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub grid_size: u64,
    pub sim_mean_s: f64,
    pub collect_n: u64,
    pub train_time_s: f64,
    pub twin_batch_time_s: f64,
    pub full_grid_sim_hours: f64,
    pub pipeline_hours: f64,
    pub projection_factor: f64,
}

/// Hours to simulate the whole grid against hours to simulate
/// `collect_n` configs, train, and predict the grid with the twin.
pub fn project_pipeline(
    grid_size: u64,
    sim_mean_s: f64,
    collect_n: u64,
    train_time_s: f64,
    twin_batch_time_s: f64,
) -> Result<Projection, BenchError> {
    if grid_size == 0 || !(sim_mean_s.is_finite() && sim_mean_s > 0.0) {
        return Err(BenchError::InvalidArgument(
            "grid size and mean simulation time must be positive".into(),
        ));
    }
    if !(train_time_s.is_finite()
        && train_time_s >= 0.0
        && twin_batch_time_s.is_finite()
        && twin_batch_time_s >= 0.0)
    {
        return Err(BenchError::InvalidArgument(
            "times must be finite and non-negative".into(),
        ));
    }
    let full_grid_sim_hours = grid_size as f64 * sim_mean_s / 3600.0;
    let pipeline_hours =
        (collect_n as f64 * sim_mean_s + train_time_s + twin_batch_time_s) / 3600.0;
    if pipeline_hours <= 0.0 {
        return Err(BenchError::InvalidArgument(
            "pipeline time must be positive".into(),
        ));
    }
    Ok(Projection {
        grid_size,
        sim_mean_s,
        collect_n,
        train_time_s,
        twin_batch_time_s,
        full_grid_sim_hours,
        pipeline_hours,
        projection_factor: full_grid_sim_hours / pipeline_hours,
    })
}

/// The published figures expressed as a projection: the whole pipeline
/// time is booked as training time.
pub fn published_projection() -> Projection {
    project_pipeline(
        PUBLISHED_GRID_SIZE,
        PUBLISHED_FULL_GRID_HOURS * 3600.0 / PUBLISHED_GRID_SIZE as f64,
        0,
        PUBLISHED_PIPELINE_HOURS * 3600.0,
        0.0,
    )
    .expect("published constants are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Raw,
    Noised,
    Cleaned,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Raw, Variant::Noised, Variant::Cleaned];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Raw => "raw",
            Variant::Noised => "noised",
            Variant::Cleaned => "cleaned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantAccuracy {
    pub variant: Variant,
    pub path1: Metrics,
    pub path2: Metrics,
}

impl VariantAccuracy {
    pub fn metrics(&self, target: Target) -> &Metrics {
        match target {
            Target::Path1 => &self.path1,
            Target::Path2 => &self.path2,
        }
    }
}

pub struct VariantRun {
    pub variant: Variant,
    pub train: Dataset,
    pub build: TwinBuild,
    /// Against the clean held-out truth.
    pub accuracy: VariantAccuracy,
}

pub struct QualityStudy {
    pub runs: Vec<VariantRun>,
    pub noise: NoiseReport,
    pub filter: FilterReport,
}

impl QualityStudy {
    pub fn run(&self, variant: Variant) -> &VariantRun {
        self.runs
            .iter()
            .find(|r| r.variant == variant)
            .expect("all variants present")
    }

    pub fn accuracies(&self) -> Vec<VariantAccuracy> {
        self.runs.iter().map(|r| r.accuracy).collect()
    }

    /// One (index, latency) series per variant and path, taken from the
    /// training data each twin saw.
    pub fn plot_series(&self, variant: Variant, target: Target) -> Vec<(usize, f64)> {
        self.run(variant)
            .train
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.latency(target)))
            .collect()
    }
}

/// Trains one twin per variant of `train` (as given, with Gaussian noise,
/// and noised then filtered) and scores each on the clean `heldout` set.
/// The variants share `seed`, so differences come from the data alone.
pub fn quality_study_on(
    train: &Dataset,
    heldout: &Dataset,
    noise: &NoiseSpec,
    filter: &FilterSpec,
    budget_s: f64,
    preset: Preset,
    seed: u64,
) -> Result<QualityStudy, BenchError> {
    let (noised, noise_report) = add_gaussian_noise(train, noise)?;
    let (cleaned, filter_report) = denoise_dataset(&noised, filter, noise.clamp_floor_s)?;
    let mut runs = Vec::with_capacity(3);
    for (variant, data) in Variant::ALL
        .into_iter()
        .zip([train.clone(), noised, cleaned])
    {
        log::info!(
            "training the {} twin on {} rows",
            variant.name(),
            data.len()
        );
        let build = build_twin(&data, budget_s, preset, seed)?;
        let accuracy = VariantAccuracy {
            variant,
            path1: build.twin.evaluate(heldout, Target::Path1)?,
            path2: build.twin.evaluate(heldout, Target::Path2)?,
        };
        runs.push(VariantRun {
            variant,
            train: data,
            build,
            accuracy,
        });
    }
    Ok(QualityStudy {
        runs,
        noise: noise_report,
        filter: filter_report,
    })
}

/// Interval-sampled training set of `sample_n` configs plus a seeded
/// held-out sample of `heldout_n` grid configs disjoint from it.
pub fn train_and_heldout(
    spec: &SweepSpec,
    flow: &FlowSpec,
    sample_n: usize,
    heldout_n: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), BenchError> {
    let grid = full_grid(spec)?;
    let train_idx = interval_indices(grid.len(), sample_n)?;
    let exclude: BTreeSet<usize> = train_idx.iter().copied().collect();
    let held_idx = random_grid_indices(
        grid.len(),
        heldout_n,
        &exclude,
        derive_seed(seed, "heldout"),
    )?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| grid[i]).collect::<Vec<_>>();
    let mut all = pick(&train_idx);
    all.extend(pick(&held_idx));
    let mut rows = simulate_configs(&all, flow)?;
    let held_rows = rows.split_off(train_idx.len());
    Ok((
        Dataset::new(rows, Provenance::Simulated),
        Dataset::new(held_rows, Provenance::Simulated),
    ))
}

/// Default-shaped study: 400 interval samples, 2,000 held-out configs,
/// preset good. The noise seed is derived from `seed`.
pub fn run_quality_study(
    spec: &SweepSpec,
    flow: &FlowSpec,
    noise: &NoiseSpec,
    filter: &FilterSpec,
    budget_s: f64,
    seed: u64,
) -> Result<QualityStudy, BenchError> {
    let (train, heldout) = train_and_heldout(spec, flow, 400, 2000, seed)?;
    let noise = NoiseSpec {
        seed: derive_seed(seed, "noise"),
        ..*noise
    };
    quality_study_on(
        &train,
        &heldout,
        &noise,
        filter,
        budget_s,
        Preset::Good,
        seed,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTimes {
    pub raw: f64,
    pub noised: f64,
    pub cleaned: f64,
}

/// Measured quantities; every field here varies run to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTiming {
    pub speedup: SpeedupTiming,
    pub projection: Projection,
    pub train_time_s: TrainTimes,
    pub full_grid_batch_time_s: f64,
    pub full_grid_batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub crate_version: String,
    pub seed: u64,
    /// Parameters sufficient to rerun the study.
    pub config: Value,
    pub n_timed: usize,
    pub repeats: usize,
    pub heldout_rows: usize,
    pub accuracy: Vec<VariantAccuracy>,
    pub noise: NoiseReport,
    pub filter: FilterReport,
    pub published_projection: Projection,
    pub timing: BenchTiming,
}

impl BenchReport {
    pub fn accuracy_of(&self, variant: Variant) -> Option<&VariantAccuracy> {
        self.accuracy.iter().find(|a| a.variant == variant)
    }

    /// True when speedup and projection agree with their operands.
    pub fn is_consistent(&self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        let s = &self.timing.speedup;
        let p = &self.timing.projection;
        let hours = p.grid_size as f64 * p.sim_mean_s / 3600.0;
        let pipe =
            (p.collect_n as f64 * p.sim_mean_s + p.train_time_s + p.twin_batch_time_s) / 3600.0;
        s.speedup > 0.0
            && s.n_timed >= MIN_TIMED_CONFIGS
            && close(s.speedup, s.sim_mean_s / s.twin_mean_s)
            && close(p.full_grid_sim_hours, hours)
            && close(p.pipeline_hours, pipe)
            && close(
                p.projection_factor,
                p.full_grid_sim_hours / p.pipeline_hours,
            )
    }
}

/// Removes every quarantined timing field (see [`TIMING_KEYS`]) at any depth.
pub fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !TIMING_KEYS.contains(&k.as_str()));
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn speedup_arithmetic_matches_published_times() {
        assert!((8.5316_f64 / 0.0167 - 510.9).abs() < 0.05);
    }

    #[test]
    fn published_projection_factor() {
        let p = published_projection();
        assert!((p.full_grid_sim_hours - 900.0).abs() < 1e-9);
        assert!((p.pipeline_hours - 3.4).abs() < 1e-9);
        assert!((p.projection_factor - 264.7).abs() < 0.1);
    }

    #[test]
    fn collecting_the_whole_grid_gains_nothing() {
        let p = project_pipeline(194_481, 0.008, 194_481, 0.0, 0.0).unwrap();
        assert!((p.projection_factor - 1.0).abs() < 1e-12);
        assert!(project_pipeline(0, 1.0, 1, 0.0, 0.0).is_err());
        assert!(project_pipeline(10, 1.0, 0, 0.0, 0.0).is_err());
    }

    #[test]
    fn timing_a_call_against_itself_is_even() {
        let items: Vec<u64> = (0..64).collect();
        let work = |x: &u64| {
            black_box((0..200).fold(*x, |a, b| a.wrapping_mul(31).wrapping_add(b)));
            Ok(())
        };
        let (a, _) = mean_time_per_call(&items, 5, 0.005, work).unwrap();
        let (b, _) = mean_time_per_call(&items, 5, 0.005, work).unwrap();
        let ratio = a / b;
        assert!(ratio > 0.5 && ratio < 2.0, "ratio {ratio}");
    }

    #[test]
    fn strip_timing_removes_quarantined_keys_at_depth() {
        let mut v = json!({
            "seed": 1,
            "timing": {"speedup": 3.0},
            "entries": [{"rmse": 0.1, "fit_time_s": 2.0}],
            "metadata": {"created_unix_s": 5, "train_rows": 4}
        });
        strip_timing(&mut v);
        assert_eq!(
            v,
            json!({"seed": 1, "entries": [{"rmse": 0.1}], "metadata": {"train_rows": 4}})
        );
    }
}
