use std::time::Instant;

use super::metrics::rmse;
use super::regressor::{EnsembleMember, FittedModel, TrainedRegressor};
use super::{EnsembleParams, Metrics, ModelError, ModelSpec};
use crate::data::{Dataset, Target};

/// Forward stepwise selection with replacement. Starts from the best single
/// model on `val`, then repeatedly adds whichever pool member lowers the
/// averaged prediction's rmse the most, stopping after `max_iters` rounds
/// or when nothing improves. Weights are selection frequencies.
///
/// Pool members must share one feature normalization.
pub fn greedy_ensemble(
    pool: &[TrainedRegressor],
    val: &Dataset,
    target: Target,
    max_iters: usize,
) -> Result<TrainedRegressor, ModelError> {
    let first = pool
        .first()
        .ok_or_else(|| ModelError::EmptyData("ensemble pool is empty".into()))?;
    if val.is_empty() {
        return Err(ModelError::EmptyData(
            "ensemble validation set is empty".into(),
        ));
    }
    if pool.iter().any(|m| m.scaler != first.scaler) {
        return Err(ModelError::InvalidParam(
            "ensemble members were trained under different normalizations".into(),
        ));
    }
    let start = Instant::now();
    let features = val.features();
    let truth = val.targets(target);
    let preds: Vec<Vec<f64>> = pool.iter().map(|m| m.predict_many(&features)).collect();

    let mut counts = vec![0usize; pool.len()];
    let mut sum = vec![0.0; truth.len()];
    let mut selected = 0usize;
    let mut current = f64::INFINITY;
    let mut scratch = vec![0.0; truth.len()];
    // the first pick is simply the best single model
    for _ in 0..max_iters.max(1) {
        let mut best: Option<(usize, f64)> = None;
        for (j, p) in preds.iter().enumerate() {
            for i in 0..truth.len() {
                scratch[i] = (sum[i] + p[i]) / (selected + 1) as f64;
            }
            let score = rmse(&truth, &scratch);
            if best.is_none_or(|(_, b)| score < b) {
                best = Some((j, score));
            }
        }
        let (j, score) = best.expect("pool is non-empty");
        if selected > 0 && score >= current {
            break;
        }
        counts[j] += 1;
        selected += 1;
        current = score;
        for i in 0..truth.len() {
            sum[i] += preds[j][i];
        }
    }

    let members: Vec<EnsembleMember> = pool
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(m, &c)| EnsembleMember {
            weight: c as f64 / selected as f64,
            spec: m.spec,
            seed: m.seed,
            model: m.model.clone(),
        })
        .collect();
    let fit_time_s = start.elapsed().as_secs_f64();

    let mut ensemble = TrainedRegressor {
        spec: ModelSpec::WeightedEnsemble(EnsembleParams { max_iters }),
        seed: 0,
        scaler: first.scaler,
        model: FittedModel::Ensemble(members),
        fit_time_s,
        predict_time_s: 0.0,
        val_metrics: None,
    };
    let t = Instant::now();
    let predicted = ensemble.predict_many(&features);
    ensemble.predict_time_s = t.elapsed().as_secs_f64();
    ensemble.val_metrics = Some(Metrics::compute(&truth, &predicted)?);
    Ok(ensemble)
}
