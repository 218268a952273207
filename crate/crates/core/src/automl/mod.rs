//! Budgeted automated model selection over an in-repo regression zoo.
//!
//! Six families are searched (ridge, k-nearest neighbours, a single CART
//! tree, random forest, extra trees and gradient boosting); the trained pool
//! is then combined by greedy forward selection into a weighted ensemble
//! that tops the leaderboard. A [`Twin`] bundles one selected regressor per
//! path together with its feature normalization.

mod ensemble;
mod forest;
mod gbm;
mod knn;
mod metrics;
mod regressor;
mod ridge;
mod search;
mod tree;
mod twin;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::greedy_ensemble;
pub use metrics::Metrics;
pub use regressor::{evaluate, fit, fit_scaled, FittedModel, TrainedRegressor};
pub use search::{
    candidate_schedule, search, Leaderboard, LeaderboardEntry, Preset, SearchOptions,
    SearchOutcome, MIN_CANDIDATE_SLOT_S,
};
pub use tree::Tree;
pub use twin::{
    build_twin, load_twin, save_twin, Twin, TwinBuild, TwinMetadata, TWIN_SCHEMA_VERSION,
};

use crate::data::FEATURE_NAMES;

pub type Features = [f64; 4];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidParam(String),
    #[error("metric undefined: truth value {value} at row {row} is not positive")]
    MetricUndefined { row: usize, value: f64 },
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("twin schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("twin schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("twin document could not be parsed: {0}")]
    Parse(String),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ridge,
    Knn,
    Cart,
    RandomForest,
    ExtraTrees,
    Gbm,
    WeightedEnsemble,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Ridge,
        Family::Knn,
        Family::Cart,
        Family::RandomForest,
        Family::ExtraTrees,
        Family::Gbm,
        Family::WeightedEnsemble,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Family::Ridge => "ridge",
            Family::Knn => "knn",
            Family::Cart => "cart",
            Family::RandomForest => "random_forest",
            Family::ExtraTrees => "extra_trees",
            Family::Gbm => "gbm",
            Family::WeightedEnsemble => "weighted_ensemble",
        }
    }

    /// Leaderboard display name.
    pub fn display(self) -> &'static str {
        match self {
            Family::Ridge => "LinearModel",
            Family::Knn => "KNeighbors",
            Family::Cart => "DecisionTree",
            Family::RandomForest => "RandomForest",
            Family::ExtraTrees => "ExtraTrees",
            Family::Gbm => "GradientBoosting",
            Family::WeightedEnsemble => "WeightedEnsemble_L2",
        }
    }

    pub fn from_key(key: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.key() == key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeParams {
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or hit `min_leaf`.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Fraction of the features considered at each split.
    pub feature_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub subsample: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub max_iters: usize,
}

/// A candidate family and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ModelSpec {
    Ridge(RidgeParams),
    Knn(KnnParams),
    Cart(TreeParams),
    RandomForest(ForestParams),
    ExtraTrees(ForestParams),
    Gbm(GbmParams),
    WeightedEnsemble(EnsembleParams),
}

fn unit_interval(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParam(format!(
            "{name} must be in (0, 1], got {v}"
        )))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<(), ModelError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(ModelError::InvalidParam(format!("{name} must be >= 1")))
    }
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Ridge(_) => Family::Ridge,
            ModelSpec::Knn(_) => Family::Knn,
            ModelSpec::Cart(_) => Family::Cart,
            ModelSpec::RandomForest(_) => Family::RandomForest,
            ModelSpec::ExtraTrees(_) => Family::ExtraTrees,
            ModelSpec::Gbm(_) => Family::Gbm,
            ModelSpec::WeightedEnsemble(_) => Family::WeightedEnsemble,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModelSpec::Ridge(p) => {
                if !(p.lambda.is_finite() && p.lambda >= 0.0) {
                    return Err(ModelError::InvalidParam(format!(
                        "ridge lambda must be >= 0, got {}",
                        p.lambda
                    )));
                }
            }
            ModelSpec::Knn(p) => at_least_one("k", p.k)?,
            ModelSpec::Cart(p) => at_least_one("min_leaf", p.min_leaf)?,
            ModelSpec::RandomForest(p) | ModelSpec::ExtraTrees(p) => {
                at_least_one("n_trees", p.n_trees)?;
                at_least_one("min_leaf", p.min_leaf)?;
                unit_interval("feature_fraction", p.feature_fraction)?;
            }
            ModelSpec::Gbm(p) => {
                at_least_one("rounds", p.rounds)?;
                at_least_one("min_leaf", p.min_leaf)?;
                unit_interval("learning_rate", p.learning_rate)?;
                unit_interval("subsample", p.subsample)?;
            }
            ModelSpec::WeightedEnsemble(p) => at_least_one("max_iters", p.max_iters)?,
        }
        Ok(())
    }

    /// Compact human-readable hyperparameter summary.
    pub fn describe(&self) -> String {
        let depth = |d: Option<usize>| d.map_or("none".to_string(), |d| d.to_string());
        match self {
            ModelSpec::Ridge(p) => format!("lambda={}", p.lambda),
            ModelSpec::Knn(p) => format!("k={} weighting={:?}", p.k, p.weighting).to_lowercase(),
            ModelSpec::Cart(p) => {
                format!("max_depth={} min_leaf={}", depth(p.max_depth), p.min_leaf)
            }
            ModelSpec::RandomForest(p) | ModelSpec::ExtraTrees(p) => format!(
                "trees={} max_depth={} min_leaf={} feature_fraction={}",
                p.n_trees,
                depth(p.max_depth),
                p.min_leaf,
                p.feature_fraction
            ),
            ModelSpec::Gbm(p) => format!(
                "rounds={} lr={} max_depth={} min_leaf={} subsample={}",
                p.rounds, p.learning_rate, p.max_depth, p.min_leaf, p.subsample
            ),
            ModelSpec::WeightedEnsemble(p) => format!("max_iters={}", p.max_iters),
        }
    }
}

/// Per-feature min-max normalization fitted on training data. Constant
/// features map to zero. The same bounds define the twin's training hull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Features,
    pub max: Features,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Features]) -> Result<Self, ModelError> {
        let first = rows
            .first()
            .ok_or_else(|| ModelError::EmptyData("cannot fit normalization on zero rows".into()))?;
        let mut min = *first;
        let mut max = *first;
        for r in rows {
            for j in 0..4 {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, x: &Features) -> Features {
        let mut out = [0.0; 4];
        for j in 0..4 {
            let span = self.max[j] - self.min[j];
            out[j] = if span > 0.0 {
                (x[j] - self.min[j]) / span
            } else {
                0.0
            };
        }
        out
    }

    pub fn contains(&self, x: &Features) -> bool {
        (0..4).all(|j| x[j] >= self.min[j] && x[j] <= self.max[j])
    }
}

pub fn feature_schema() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}
