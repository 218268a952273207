use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::forest::{fit_forest, ForestState};
use super::gbm::{fit_gbm, GbmState};
use super::knn::KnnState;
use super::ridge::RidgeState;
use super::tree::{SplitMode, Tree, TreeBuilder};
use super::{Family, Features, Metrics, MinMaxScaler, ModelError, ModelSpec};
use crate::data::{Dataset, Target};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub weight: f64,
    pub spec: ModelSpec,
    pub seed: u64,
    pub model: FittedModel,
}

/// Fitted state of one family. All variants predict on normalized features.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Ridge(RidgeState),
    Knn(KnnState),
    Tree(Tree),
    Forest(ForestState),
    Gbm(GbmState),
    Ensemble(Vec<EnsembleMember>),
}

impl FittedModel {
    pub fn predict(&self, x: &Features) -> f64 {
        match self {
            FittedModel::Ridge(m) => m.predict(x),
            FittedModel::Knn(m) => m.predict(x),
            FittedModel::Tree(m) => m.predict(x),
            FittedModel::Forest(m) => m.predict(x),
            FittedModel::Gbm(m) => m.predict(x),
            FittedModel::Ensemble(members) => {
                members.iter().map(|m| m.weight * m.model.predict(x)).sum()
            }
        }
    }

    fn state_json(&self) -> Value {
        fn to<T: Serialize>(v: &T) -> Value {
            serde_json::to_value(v).expect("model state is plain data")
        }
        match self {
            FittedModel::Ridge(m) => to(m),
            FittedModel::Knn(m) => to(m),
            FittedModel::Tree(m) => to(m),
            FittedModel::Forest(m) => to(m),
            FittedModel::Gbm(m) => to(m),
            FittedModel::Ensemble(members) => {
                let docs: Vec<Value> = members
                    .iter()
                    .map(|m| {
                        let mut doc = model_doc(&m.spec, m.seed, &m.model);
                        doc.insert("weight".into(), json!(m.weight));
                        Value::Object(doc)
                    })
                    .collect();
                json!({ "members": docs })
            }
        }
    }

    fn from_state(spec: &ModelSpec, state: &Value) -> Result<FittedModel, ModelError> {
        fn from<T: DeserializeOwned>(family: Family, v: &Value) -> Result<T, ModelError> {
            serde_json::from_value(v.clone())
                .map_err(|e| ModelError::SchemaMismatch(format!("{} state: {e}", family.key())))
        }
        let family = spec.family();
        let model = match spec {
            ModelSpec::Ridge(_) => FittedModel::Ridge(from(family, state)?),
            ModelSpec::Knn(_) => FittedModel::Knn(from(family, state)?),
            ModelSpec::Cart(_) => FittedModel::Tree(from(family, state)?),
            ModelSpec::RandomForest(_) | ModelSpec::ExtraTrees(_) => {
                FittedModel::Forest(from(family, state)?)
            }
            ModelSpec::Gbm(_) => FittedModel::Gbm(from(family, state)?),
            ModelSpec::WeightedEnsemble(_) => {
                let members = state
                    .get("members")
                    .and_then(Value::as_array)
                    .ok_or_else(|| {
                        ModelError::SchemaMismatch("ensemble state lacks `members`".into())
                    })?;
                let mut out = Vec::with_capacity(members.len());
                for m in members {
                    let weight = m
                        .get("weight")
                        .and_then(Value::as_f64)
                        .filter(|w| w.is_finite() && *w >= 0.0)
                        .ok_or_else(|| {
                            ModelError::SchemaMismatch("ensemble member weight".into())
                        })?;
                    let (spec, seed, model) = parse_model_doc(m)?;
                    out.push(EnsembleMember {
                        weight,
                        spec,
                        seed,
                        model,
                    });
                }
                if out.is_empty() {
                    return Err(ModelError::SchemaMismatch("ensemble has no members".into()));
                }
                FittedModel::Ensemble(out)
            }
        };
        model.check_finite()?;
        Ok(model)
    }

    fn check_finite(&self) -> Result<(), ModelError> {
        let bad = |what: &str| {
            Err(ModelError::SchemaMismatch(format!(
                "non-finite value in {what}"
            )))
        };
        let trees_ok = |trees: &[Tree]| {
            trees.iter().all(|t| {
                t.value.iter().chain(&t.threshold).all(|v| v.is_finite()) && tree_links_ok(t)
            })
        };
        match self {
            FittedModel::Ridge(m)
                if !(m.intercept.is_finite() && m.coef.iter().all(|c| c.is_finite())) =>
            {
                bad("ridge")
            }
            FittedModel::Knn(m)
                if m.k == 0 || m.k > m.points.len() || m.points.len() != m.targets.len() =>
            {
                Err(ModelError::SchemaMismatch(
                    "knn state is inconsistent".into(),
                ))
            }
            FittedModel::Tree(t) if !trees_ok(std::slice::from_ref(t)) => bad("tree"),
            FittedModel::Forest(f) if f.trees.is_empty() || !trees_ok(&f.trees) => bad("forest"),
            FittedModel::Gbm(g)
                if !(g.base.is_finite() && g.learning_rate.is_finite() && trees_ok(&g.trees)) =>
            {
                bad("gbm")
            }
            _ => Ok(()),
        }
    }
}

fn tree_links_ok(t: &Tree) -> bool {
    let n = t.feature.len();
    n > 0
        && [
            t.threshold.len(),
            t.left.len(),
            t.right.len(),
            t.value.len(),
        ]
        .iter()
        .all(|&l| l == n)
        && (0..n).all(|i| {
            t.feature[i] == -1
                || ((0..4).contains(&t.feature[i])
                    && (t.left[i] as usize) > i
                    && (t.right[i] as usize) > i
                    && (t.left[i] as usize) < n
                    && (t.right[i] as usize) < n)
        })
}

fn model_doc(spec: &ModelSpec, seed: u64, model: &FittedModel) -> Map<String, Value> {
    let Value::Object(mut doc) = serde_json::to_value(spec).expect("spec is plain data") else {
        unreachable!("adjacently tagged enums serialize as objects")
    };
    doc.insert("seed".into(), json!(seed));
    doc.insert("state".into(), model.state_json());
    doc
}

fn parse_model_doc(doc: &Value) -> Result<(ModelSpec, u64, FittedModel), ModelError> {
    let family = doc
        .get("family")
        .and_then(Value::as_str)
        .ok_or_else(|| ModelError::SchemaMismatch("model document lacks `family`".into()))?;
    if Family::from_key(family).is_none() {
        return Err(ModelError::UnknownFamily(family.to_string()));
    }
    let spec: ModelSpec = serde_json::from_value(json!({
        "family": family,
        "params": doc.get("params").cloned().unwrap_or(Value::Null),
    }))
    .map_err(|e| ModelError::SchemaMismatch(format!("{family} params: {e}")))?;
    spec.validate()?;
    let seed = doc
        .get("seed")
        .and_then(Value::as_u64)
        .ok_or_else(|| ModelError::SchemaMismatch("model document lacks `seed`".into()))?;
    let state = doc
        .get("state")
        .ok_or_else(|| ModelError::SchemaMismatch("model document lacks `state`".into()))?;
    let model = FittedModel::from_state(&spec, state)?;
    Ok((spec, seed, model))
}

/// A fitted candidate together with the normalization it was trained
/// under and its timing and validation record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRegressor {
    pub spec: ModelSpec,
    pub seed: u64,
    pub scaler: MinMaxScaler,
    pub model: FittedModel,
    pub fit_time_s: f64,
    pub predict_time_s: f64,
    pub val_metrics: Option<Metrics>,
}

impl TrainedRegressor {
    pub fn family(&self) -> Family {
        self.spec.family()
    }

    pub fn predict(&self, raw: &Features) -> f64 {
        self.model.predict(&self.scaler.transform(raw))
    }

    pub fn predict_many(&self, rows: &[Features]) -> Vec<f64> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub(crate) fn to_doc(&self) -> Value {
        let mut doc = model_doc(&self.spec, self.seed, &self.model);
        doc.insert("fit_time_s".into(), json!(self.fit_time_s));
        doc.insert("predict_time_s".into(), json!(self.predict_time_s));
        doc.insert(
            "val_metrics".into(),
            serde_json::to_value(self.val_metrics).expect("metrics are plain data"),
        );
        Value::Object(doc)
    }

    pub(crate) fn from_doc(
        doc: &Value,
        scaler: MinMaxScaler,
    ) -> Result<TrainedRegressor, ModelError> {
        let (spec, seed, model) = parse_model_doc(doc)?;
        let num = |key: &str| doc.get(key).and_then(Value::as_f64).unwrap_or(0.0);
        let val_metrics = match doc.get("val_metrics") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                serde_json::from_value(v.clone())
                    .map_err(|e| ModelError::SchemaMismatch(format!("val_metrics: {e}")))?,
            ),
        };
        Ok(TrainedRegressor {
            spec,
            seed,
            scaler,
            model,
            fit_time_s: num("fit_time_s"),
            predict_time_s: num("predict_time_s"),
            val_metrics,
        })
    }
}

/// Fits one candidate on already-normalized features.
pub fn fit_scaled(
    spec: &ModelSpec,
    x: &[Features],
    y: &[f64],
    scaler: MinMaxScaler,
    seed: u64,
) -> Result<TrainedRegressor, ModelError> {
    spec.validate()?;
    if x.is_empty() {
        return Err(ModelError::EmptyData("cannot fit on zero rows".into()));
    }
    assert_eq!(x.len(), y.len());
    let start = Instant::now();
    let model = match spec {
        ModelSpec::Ridge(p) => FittedModel::Ridge(RidgeState::fit(x, y, p)),
        ModelSpec::Knn(p) => FittedModel::Knn(KnnState::fit(x, y, p)),
        ModelSpec::Cart(p) => {
            let builder = TreeBuilder {
                x,
                y,
                max_depth: p.max_depth,
                min_leaf: p.min_leaf,
                max_features: 4,
                mode: SplitMode::Best,
            };
            FittedModel::Tree(
                builder.build((0..x.len()).collect(), &mut ChaCha8Rng::seed_from_u64(seed)),
            )
        }
        ModelSpec::RandomForest(p) => FittedModel::Forest(fit_forest(x, y, p, false, seed)),
        ModelSpec::ExtraTrees(p) => FittedModel::Forest(fit_forest(x, y, p, true, seed)),
        ModelSpec::Gbm(p) => FittedModel::Gbm(fit_gbm(x, y, p, seed)),
        ModelSpec::WeightedEnsemble(_) => {
            return Err(ModelError::InvalidParam(
                "weighted ensembles are built from a trained pool, not fitted directly".into(),
            ))
        }
    };
    Ok(TrainedRegressor {
        spec: *spec,
        seed,
        scaler,
        model,
        fit_time_s: start.elapsed().as_secs_f64(),
        predict_time_s: 0.0,
        val_metrics: None,
    })
}

/// Fits `spec` on `train` for one path, normalizing features with min-max
/// bounds taken from `train`.
pub fn fit(
    spec: &ModelSpec,
    train: &Dataset,
    target: Target,
    seed: u64,
) -> Result<TrainedRegressor, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyData("training set is empty".into()));
    }
    let raw = train.features();
    let scaler = MinMaxScaler::fit(&raw)?;
    let x: Vec<Features> = raw.iter().map(|r| scaler.transform(r)).collect();
    fit_scaled(spec, &x, &train.targets(target), scaler, seed)
}

pub fn evaluate(
    model: &TrainedRegressor,
    data: &Dataset,
    target: Target,
) -> Result<Metrics, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyData("evaluation set is empty".into()));
    }
    let predicted = model.predict_many(&data.features());
    Metrics::compute(&data.targets(target), &predicted)
}
