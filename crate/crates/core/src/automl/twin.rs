use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::search::{search, Leaderboard, Preset, SearchOptions};
use super::{feature_schema, Features, Metrics, MinMaxScaler, ModelError, TrainedRegressor};
use crate::data::{Dataset, Target};
use crate::seeds::derive_seed;

pub const TWIN_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinMetadata {
    /// SHA-256 of the training set's CSV rendering.
    pub train_fingerprint: String,
    pub train_rows: usize,
    pub seed: u64,
    pub preset: Preset,
    pub budget_s: f64,
    /// Wall-clock creation time; excluded from determinism comparisons.
    pub created_unix_s: u64,
}

/// A latency twin: one regressor per path over the shared four-feature
/// schema. Immutable once built, so it can be shared across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Twin {
    pub path1: TrainedRegressor,
    pub path2: TrainedRegressor,
    /// Training-set feature bounds; also the extrapolation hull.
    pub normalization: MinMaxScaler,
    pub metadata: TwinMetadata,
}

impl Twin {
    pub fn regressor(&self, target: Target) -> &TrainedRegressor {
        match target {
            Target::Path1 => &self.path1,
            Target::Path2 => &self.path2,
        }
    }

    pub fn predict_features(&self, x: &Features) -> (f64, f64) {
        (self.path1.predict(x), self.path2.predict(x))
    }

    pub fn in_hull(&self, x: &Features) -> bool {
        self.normalization.contains(x)
    }

    pub fn evaluate(&self, data: &Dataset, target: Target) -> Result<Metrics, ModelError> {
        super::evaluate(self.regressor(target), data, target)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": TWIN_SCHEMA_VERSION,
            "feature_schema": feature_schema(),
            "normalization": self.normalization,
            "targets": {
                "path1": self.path1.to_doc(),
                "path2": self.path2.to_doc(),
            },
            "metadata": self.metadata,
        })
    }

    pub fn from_json(doc: &Value) -> Result<Twin, ModelError> {
        let version = doc
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| ModelError::SchemaMismatch("missing `schema_version`".into()))?;
        if version != TWIN_SCHEMA_VERSION {
            return Err(ModelError::VersionMismatch {
                found: version,
                expected: TWIN_SCHEMA_VERSION,
            });
        }
        let schema: Vec<String> = doc
            .get("feature_schema")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| ModelError::SchemaMismatch("missing `feature_schema`".into()))?;
        if schema != feature_schema() {
            return Err(ModelError::SchemaMismatch(format!(
                "feature schema {schema:?} does not match {:?}",
                feature_schema()
            )));
        }
        let normalization: MinMaxScaler = doc
            .get("normalization")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| {
                ModelError::SchemaMismatch("missing or malformed `normalization`".into())
            })?;
        if normalization
            .min
            .iter()
            .chain(&normalization.max)
            .any(|v| !v.is_finite())
            || (0..4).any(|j| normalization.min[j] > normalization.max[j])
        {
            return Err(ModelError::SchemaMismatch(
                "normalization bounds are invalid".into(),
            ));
        }
        let target = |name: &str| -> Result<TrainedRegressor, ModelError> {
            let d = doc
                .get("targets")
                .and_then(|t| t.get(name))
                .ok_or_else(|| ModelError::SchemaMismatch(format!("missing target `{name}`")))?;
            TrainedRegressor::from_doc(d, normalization)
        };
        let metadata: TwinMetadata = doc
            .get("metadata")
            .cloned()
            .ok_or_else(|| ModelError::SchemaMismatch("missing `metadata`".into()))
            .and_then(|v| {
                serde_json::from_value(v)
                    .map_err(|e| ModelError::SchemaMismatch(format!("metadata: {e}")))
            })?;
        Ok(Twin {
            path1: target("path1")?,
            path2: target("path2")?,
            normalization,
            metadata,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TwinBuild {
    pub twin: Twin,
    pub leaderboards: [Leaderboard; 2],
    /// Wall time of both searches together.
    pub train_time_s: f64,
}

/// Runs one search per path (each with half the budget) and keeps each
/// leaderboard's head as that path's regressor.
pub fn build_twin(
    train: &Dataset,
    budget_s: f64,
    preset: Preset,
    seed: u64,
) -> Result<TwinBuild, ModelError> {
    let start = Instant::now();
    let per_target = budget_s / 2.0;
    let mut outcomes = Vec::with_capacity(2);
    for target in Target::BOTH {
        let opts = SearchOptions {
            budget_s: per_target,
            preset,
            seed: derive_seed(seed, target.name()),
        };
        outcomes.push(search(train, target, &opts)?);
    }
    let train_time_s = start.elapsed().as_secs_f64();
    let second = outcomes.pop().expect("two searches");
    let first = outcomes.pop().expect("two searches");
    debug_assert_eq!(first.best.scaler, second.best.scaler);
    let created_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let twin = Twin {
        normalization: first.best.scaler,
        path1: first.best,
        path2: second.best,
        metadata: TwinMetadata {
            train_fingerprint: train.fingerprint(),
            train_rows: train.len(),
            seed,
            preset,
            budget_s,
            created_unix_s,
        },
    };
    Ok(TwinBuild {
        twin,
        leaderboards: [first.leaderboard, second.leaderboard],
        train_time_s,
    })
}

pub fn save_twin(twin: &Twin, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&twin.to_json())
        .map_err(|e| ModelError::Parse(e.to_string()))?;
    // write-then-rename so a reader never sees a partial document
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_twin(path: impl AsRef<Path>) -> Result<Twin, ModelError> {
    let text = fs::read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| ModelError::Parse(e.to_string()))?;
    Twin::from_json(&doc)
}
