use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    fit_scaled, greedy_ensemble, EnsembleParams, Family, Features, ForestParams, GbmParams,
    KnnParams, MinMaxScaler, ModelError, ModelSpec, RidgeParams, TrainedRegressor, TreeParams,
    Weighting,
};
use crate::data::{self, Dataset, Target};
use crate::seeds::{derive_index_seed, derive_seed};

/// No candidate is started with less than this much budget left.
pub const MIN_CANDIDATE_SLOT_S: f64 = 0.01;
const GOOD_FAMILY_CAP: usize = 20;
const BEST_MAX_CANDIDATES: usize = 2000;
const VALIDATION_FRACTION: f64 = 0.25;
const ENSEMBLE_ITERS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Family defaults only.
    Fast,
    /// Defaults plus a small grid per family.
    Good,
    /// The good grid followed by seeded random draws until the budget ends.
    Best,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fast => "fast",
            Preset::Good => "good",
            Preset::Best => "best",
        })
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(Preset::Fast),
            "good" | "good_quality" => Ok(Preset::Good),
            "best" | "best_quality" => Ok(Preset::Best),
            other => Err(format!(
                "unknown preset `{other}` (expected fast, good or best)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub budget_s: f64,
    pub preset: Preset,
    pub seed: u64,
}

fn defaults() -> Vec<ModelSpec> {
    vec![
        ModelSpec::Ridge(RidgeParams { lambda: 1.0 }),
        ModelSpec::Knn(KnnParams {
            k: 5,
            weighting: Weighting::Distance,
        }),
        ModelSpec::Cart(TreeParams {
            max_depth: None,
            min_leaf: 2,
        }),
        ModelSpec::RandomForest(ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            feature_fraction: 0.75,
        }),
        ModelSpec::ExtraTrees(ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            feature_fraction: 1.0,
        }),
        ModelSpec::Gbm(GbmParams {
            rounds: 300,
            learning_rate: 0.1,
            max_depth: 4,
            min_leaf: 2,
            subsample: 0.8,
        }),
    ]
}

fn family_grid(family: Family) -> Vec<ModelSpec> {
    let mut out = Vec::new();
    match family {
        Family::Ridge => {
            for lambda in [0.0, 1e-3, 0.1, 10.0] {
                out.push(ModelSpec::Ridge(RidgeParams { lambda }));
            }
        }
        Family::Knn => {
            for k in [1, 2, 3, 5, 8, 12] {
                for weighting in [Weighting::Uniform, Weighting::Distance] {
                    out.push(ModelSpec::Knn(KnnParams { k, weighting }));
                }
            }
        }
        Family::Cart => {
            for max_depth in [Some(4), Some(6), Some(8), Some(10), Some(12), None] {
                for min_leaf in [1, 2, 4] {
                    out.push(ModelSpec::Cart(TreeParams {
                        max_depth,
                        min_leaf,
                    }));
                }
            }
        }
        Family::RandomForest => {
            for n_trees in [100, 300] {
                for max_depth in [None, Some(12)] {
                    for feature_fraction in [0.5, 0.75, 1.0] {
                        out.push(ModelSpec::RandomForest(ForestParams {
                            n_trees,
                            max_depth,
                            min_leaf: 1,
                            feature_fraction,
                        }));
                    }
                }
            }
        }
        Family::ExtraTrees => {
            for n_trees in [100, 300] {
                for min_leaf in [1, 2] {
                    for feature_fraction in [0.75, 1.0] {
                        out.push(ModelSpec::ExtraTrees(ForestParams {
                            n_trees,
                            max_depth: None,
                            min_leaf,
                            feature_fraction,
                        }));
                    }
                }
            }
        }
        Family::Gbm => {
            for rounds in [200, 500] {
                for learning_rate in [0.05, 0.1] {
                    for max_depth in [3, 4, 6] {
                        for subsample in [0.8, 1.0] {
                            out.push(ModelSpec::Gbm(GbmParams {
                                rounds,
                                learning_rate,
                                max_depth,
                                min_leaf: 2,
                                subsample,
                            }));
                        }
                    }
                }
            }
        }
        Family::WeightedEnsemble => {}
    }
    out
}

fn random_draw(family: Family, rng: &mut ChaCha8Rng) -> ModelSpec {
    let depth = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.3) {
            None
        } else {
            Some(rng.random_range(3..=16))
        }
    };
    match family {
        Family::Ridge => ModelSpec::Ridge(RidgeParams {
            lambda: 10f64.powf(rng.random_range(-6.0..2.0)),
        }),
        Family::Knn => ModelSpec::Knn(KnnParams {
            k: rng.random_range(1..=20),
            weighting: if rng.random_bool(0.5) {
                Weighting::Uniform
            } else {
                Weighting::Distance
            },
        }),
        Family::Cart => ModelSpec::Cart(TreeParams {
            max_depth: depth(rng),
            min_leaf: rng.random_range(1..=8),
        }),
        Family::RandomForest | Family::ExtraTrees => {
            let p = ForestParams {
                n_trees: rng.random_range(50..=400),
                max_depth: depth(rng),
                min_leaf: rng.random_range(1..=4),
                feature_fraction: [0.25, 0.5, 0.75, 1.0][rng.random_range(0..4)],
            };
            if family == Family::RandomForest {
                ModelSpec::RandomForest(p)
            } else {
                ModelSpec::ExtraTrees(p)
            }
        }
        Family::Gbm | Family::WeightedEnsemble => ModelSpec::Gbm(GbmParams {
            rounds: rng.random_range(100..=800),
            learning_rate: 10f64.powf(rng.random_range(-2.0..-0.5)),
            max_depth: rng.random_range(2..=8),
            min_leaf: rng.random_range(1..=6),
            subsample: rng.random_range(0.5..=1.0),
        }),
    }
}

/// The ordered candidate list for a preset. Index 0 is always the default
/// ridge model, which is trained regardless of budget. Grid points are
/// interleaved across families so a binding budget still sees every family.
pub fn candidate_schedule(preset: Preset, seed: u64) -> Vec<ModelSpec> {
    let mut schedule = defaults();
    if preset == Preset::Fast {
        return schedule;
    }
    let families = [
        Family::Ridge,
        Family::Knn,
        Family::Cart,
        Family::RandomForest,
        Family::ExtraTrees,
        Family::Gbm,
    ];
    let grids: Vec<Vec<ModelSpec>> = families
        .iter()
        .zip(&schedule)
        .map(|(&f, default)| {
            family_grid(f)
                .into_iter()
                .filter(|s| s != default)
                .take(GOOD_FAMILY_CAP - 1)
                .collect()
        })
        .collect();
    let longest = grids.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..longest {
        for g in &grids {
            if let Some(s) = g.get(i) {
                schedule.push(*s);
            }
        }
    }
    if preset == Preset::Best {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "random-draws"));
        let mut i = 0;
        while schedule.len() < BEST_MAX_CANDIDATES {
            schedule.push(random_draw(families[i % families.len()], &mut rng));
            i += 1;
        }
    }
    schedule
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub model: String,
    pub accuracy_pct: f64,
    pub rmse: f64,
    pub r2: f64,
    pub mape: f64,
    pub fit_time_s: f64,
    pub predict_time_s: f64,
    #[serde(flatten)]
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub target: Target,
    pub preset: Preset,
    pub budget_s: f64,
    pub elapsed_s: f64,
    /// Sorted by validation rmse, ascending.
    pub entries: Vec<LeaderboardEntry>,
    pub candidates_trained: usize,
    pub candidates_skipped: usize,
    pub max_fit_time_s: f64,
    pub warnings: Vec<String>,
}

impl Leaderboard {
    /// Only the mandatory candidate fit before the budget ran out.
    pub fn starved(&self) -> bool {
        self.candidates_trained == 1 && self.candidates_skipped > 0
    }

    pub fn families(&self) -> Vec<Family> {
        let mut f: Vec<Family> = self.entries.iter().map(|e| e.spec.family()).collect();
        f.sort();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub leaderboard: Leaderboard,
    /// Leaderboard head (the weighted ensemble unless a single model ties it).
    pub best: TrainedRegressor,
    pub pool: Vec<TrainedRegressor>,
}

fn entry(name: String, m: &TrainedRegressor) -> LeaderboardEntry {
    let metrics = m.val_metrics.expect("search records validation metrics");
    LeaderboardEntry {
        model: name,
        accuracy_pct: metrics.accuracy_pct,
        rmse: metrics.rmse,
        r2: metrics.r2,
        mape: metrics.mape,
        fit_time_s: m.fit_time_s,
        predict_time_s: m.predict_time_s,
        spec: m.spec,
    }
}

/// Budgeted model selection for one path. Each candidate is trained on a
/// seeded 75% split of `train` and scored on the remaining 25%. A new
/// candidate is started only while the remaining budget covers the last
/// candidate's fit time (and at least [`MIN_CANDIDATE_SLOT_S`]).
pub fn search(
    train: &Dataset,
    target: Target,
    opts: &SearchOptions,
) -> Result<SearchOutcome, ModelError> {
    if !(opts.budget_s.is_finite() && opts.budget_s > 0.0) {
        return Err(ModelError::InvalidBudget(format!(
            "budget must be positive, got {}",
            opts.budget_s
        )));
    }
    if train.len() < 2 {
        return Err(ModelError::EmptyData(format!(
            "search needs at least 2 rows, got {}",
            train.len()
        )));
    }
    let start = Instant::now();
    let raw = train.features();
    let scaler = MinMaxScaler::fit(&raw)?;
    let (fit_part, val_part) = data::split(
        train,
        VALIDATION_FRACTION,
        derive_seed(opts.seed, "validation"),
    )?;
    let x_fit: Vec<Features> = fit_part
        .features()
        .iter()
        .map(|r| scaler.transform(r))
        .collect();
    let y_fit = fit_part.targets(target);
    let val_features = val_part.features();
    let val_truth = val_part.targets(target);

    let schedule = candidate_schedule(opts.preset, opts.seed);
    let candidate_root = derive_seed(opts.seed, "candidates");
    let mut pool: Vec<TrainedRegressor> = Vec::new();
    let mut names = Vec::new();
    let mut per_family = std::collections::BTreeMap::<Family, usize>::new();
    let mut last_fit = 0.0f64;
    let mut max_fit = 0.0f64;
    let mut skipped = 0;
    for (i, spec) in schedule.iter().enumerate() {
        if i > 0 {
            let remaining = opts.budget_s - start.elapsed().as_secs_f64();
            if remaining < last_fit.max(MIN_CANDIDATE_SLOT_S) {
                skipped = schedule.len() - i;
                break;
            }
        }
        let mut m = fit_scaled(
            spec,
            &x_fit,
            &y_fit,
            scaler,
            derive_index_seed(candidate_root, i as u64),
        )?;
        let t = Instant::now();
        let predicted = m.predict_many(&val_features);
        m.predict_time_s = t.elapsed().as_secs_f64();
        m.val_metrics = Some(super::Metrics::compute(&val_truth, &predicted)?);
        last_fit = m.fit_time_s;
        max_fit = max_fit.max(m.fit_time_s);
        let n = per_family.entry(spec.family()).or_insert(0);
        *n += 1;
        names.push(format!("{}_{}", spec.family().display(), n));
        pool.push(m);
    }

    let ensemble = greedy_ensemble(&pool, &val_part, target, ENSEMBLE_ITERS)?;
    let mut warnings = Vec::new();
    if pool.len() == 1 && skipped > 0 {
        let msg = format!(
            "budget of {}s only allowed the mandatory candidate; {skipped} candidates skipped",
            opts.budget_s
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    // the ensemble goes first so that a stable sort ranks it ahead of ties
    let mut ranked: Vec<(LeaderboardEntry, Option<usize>)> = vec![(
        entry(Family::WeightedEnsemble.display().to_string(), &ensemble),
        None,
    )];
    ranked.extend(
        pool.iter()
            .zip(names)
            .enumerate()
            .map(|(i, (m, n))| (entry(n, m), Some(i))),
    );
    ranked.sort_by(|a, b| a.0.rmse.total_cmp(&b.0.rmse));
    let best = match ranked[0].1 {
        None => ensemble,
        Some(i) => pool[i].clone(),
    };
    let leaderboard = Leaderboard {
        target,
        preset: opts.preset,
        budget_s: opts.budget_s,
        elapsed_s: start.elapsed().as_secs_f64(),
        entries: ranked.into_iter().map(|(e, _)| e).collect(),
        candidates_trained: pool.len(),
        candidates_skipped: skipped,
        max_fit_time_s: max_fit,
        warnings,
    };
    Ok(SearchOutcome {
        leaderboard,
        best,
        pool,
    })
}

impl SearchOutcome {
    pub fn ensemble_params(&self) -> Option<EnsembleParams> {
        match self.best.spec {
            ModelSpec::WeightedEnsemble(p) => Some(p),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_start_with_the_mandatory_ridge() {
        for preset in [Preset::Fast, Preset::Good, Preset::Best] {
            let s = candidate_schedule(preset, 1);
            assert_eq!(s[0], ModelSpec::Ridge(RidgeParams { lambda: 1.0 }));
        }
        assert_eq!(candidate_schedule(Preset::Fast, 1).len(), 6);
    }

    #[test]
    fn good_grid_is_capped_per_family_and_seed_free() {
        let s = candidate_schedule(Preset::Good, 1);
        assert_eq!(s, candidate_schedule(Preset::Good, 2));
        let mut counts = std::collections::BTreeMap::new();
        for spec in &s {
            *counts.entry(spec.family()).or_insert(0) += 1;
            spec.validate().unwrap();
        }
        assert_eq!(counts.len(), 6);
        assert!(counts.values().all(|&c| c <= GOOD_FAMILY_CAP));
    }

    #[test]
    fn best_draws_depend_on_seed_and_are_valid() {
        let a = candidate_schedule(Preset::Best, 1);
        let b = candidate_schedule(Preset::Best, 2);
        assert_eq!(a.len(), BEST_MAX_CANDIDATES);
        assert_ne!(a, b);
        assert!(a.iter().all(|s| s.validate().is_ok()));
    }

    #[test]
    fn preset_parsing() {
        assert_eq!("good_quality".parse::<Preset>().unwrap(), Preset::Good);
        assert_eq!("fast".parse::<Preset>().unwrap(), Preset::Fast);
        assert!("medium".parse::<Preset>().is_err());
    }
}
