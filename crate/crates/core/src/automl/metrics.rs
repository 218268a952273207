use serde::{Deserialize, Serialize};

use super::ModelError;

/// Regression quality. `accuracy_pct` is `100·(1 − MAPE)` clipped to
/// `[0, 100]`; `r2` is the coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mape: f64,
    pub accuracy_pct: f64,
    pub r2: f64,
}

impl Metrics {
    pub fn compute(truth: &[f64], predicted: &[f64]) -> Result<Metrics, ModelError> {
        assert_eq!(truth.len(), predicted.len());
        if truth.is_empty() {
            return Err(ModelError::EmptyData(
                "metrics need at least one row".into(),
            ));
        }
        if let Some(row) = truth.iter().position(|&t| t.is_nan() || t <= 0.0) {
            return Err(ModelError::MetricUndefined {
                row,
                value: truth[row],
            });
        }
        let n = truth.len() as f64;
        let mut sse = 0.0;
        let mut ape = 0.0;
        for (&t, &p) in truth.iter().zip(predicted) {
            sse += (p - t) * (p - t);
            ape += ((p - t) / t).abs();
        }
        let mean = truth.iter().sum::<f64>() / n;
        let sst: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
        let mape = ape / n;
        let r2 = if sst > 0.0 {
            1.0 - sse / sst
        } else if sse == 0.0 {
            1.0
        } else {
            0.0
        };
        Ok(Metrics {
            rmse: (sse / n).sqrt(),
            mape,
            accuracy_pct: (100.0 * (1.0 - mape)).clamp(0.0, 100.0),
            r2,
        })
    }
}

pub(crate) fn rmse(truth: &[f64], predicted: &[f64]) -> f64 {
    let sse: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(t, p)| (p - t) * (p - t))
        .sum();
    (sse / truth.len() as f64).sqrt()
}
