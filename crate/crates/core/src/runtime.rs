//! Inference over a loaded twin: single and batch prediction with timing,
//! plus the batch CSV format.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automl::Twin;
use crate::data::FEATURE_NAMES;
use crate::sim::NetworkConfig;

pub const PREDICTION_COLUMNS: [&str; 3] = ["pred_lat1_s", "pred_lat2_s", "extrapolation"];

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("config has a non-finite or non-positive field: {0:?}")]
    InvalidConfig(NetworkConfig),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("missing column `{0}` in batch input")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub config: NetworkConfig,
    pub latency1_s: f64,
    pub latency2_s: f64,
    pub per_query_time_s: f64,
    /// The config lies outside the twin's training bounding box.
    pub extrapolation: bool,
}

impl Prediction {
    /// Same config, latencies and flag; timing is ignored.
    pub fn same_values(&self, other: &Prediction) -> bool {
        self.config == other.config
            && self.latency1_s.to_bits() == other.latency1_s.to_bits()
            && self.latency2_s.to_bits() == other.latency2_s.to_bits()
            && self.extrapolation == other.extrapolation
    }
}

fn check(cfg: &NetworkConfig) -> Result<[f64; 4], RuntimeError> {
    let x = cfg.features();
    if x.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(x)
    } else {
        Err(RuntimeError::InvalidConfig(*cfg))
    }
}

fn predict_untimed(twin: &Twin, cfg: &NetworkConfig) -> Result<Prediction, RuntimeError> {
    let x = check(cfg)?;
    let (latency1_s, latency2_s) = twin.predict_features(&x);
    Ok(Prediction {
        config: *cfg,
        latency1_s,
        latency2_s,
        per_query_time_s: 0.0,
        extrapolation: !twin.in_hull(&x),
    })
}

pub fn predict(twin: &Twin, cfg: &NetworkConfig) -> Result<Prediction, RuntimeError> {
    let start = Instant::now();
    let mut p = predict_untimed(twin, cfg)?;
    p.per_query_time_s = start.elapsed().as_secs_f64();
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchPrediction {
    pub predictions: Vec<Prediction>,
    pub total_time_s: f64,
}

/// Maps [`predict`] over `configs` in order. Work is spread over the
/// current rayon pool; every prediction carries the amortized per-query
/// time.
pub fn predict_batch(
    twin: &Twin,
    configs: &[NetworkConfig],
) -> Result<BatchPrediction, RuntimeError> {
    if configs.is_empty() {
        return Err(RuntimeError::EmptyBatch);
    }
    let start = Instant::now();
    let mut predictions = configs
        .par_iter()
        .map(|c| predict_untimed(twin, c))
        .collect::<Result<Vec<_>, _>>()?;
    let total_time_s = start.elapsed().as_secs_f64();
    let per = total_time_s / configs.len() as f64;
    for p in &mut predictions {
        p.per_query_time_s = per;
    }
    Ok(BatchPrediction {
        predictions,
        total_time_s,
    })
}

/// Reads configs from a CSV with (at least) the four config columns; other
/// columns, such as the latencies of a dataset file, are ignored.
pub fn read_configs_csv<R: Read>(input: R) -> Result<Vec<NetworkConfig>, RuntimeError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| RuntimeError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let mut cols = [0usize; 4];
    for (slot, name) in cols.iter_mut().zip(FEATURE_NAMES) {
        *slot = header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| RuntimeError::MissingColumn(name.to_string()))?;
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| RuntimeError::Parse {
            row,
            message: e.to_string(),
        })?;
        let cell = |k: usize| rec.get(cols[k]).unwrap_or("").trim().to_string();
        let bw = |k: usize| {
            cell(k).parse::<f64>().map_err(|_| RuntimeError::Parse {
                row,
                message: format!(
                    "column `{}`: `{}` is not a number",
                    FEATURE_NAMES[k],
                    cell(k)
                ),
            })
        };
        let q = |k: usize| {
            cell(k).parse::<u32>().map_err(|_| RuntimeError::Parse {
                row,
                message: format!(
                    "column `{}`: `{}` is not an integer",
                    FEATURE_NAMES[k],
                    cell(k)
                ),
            })
        };
        out.push(NetworkConfig::new(bw(0)?, q(1)?, bw(2)?, q(3)?));
    }
    Ok(out)
}

pub fn read_configs_file(path: impl AsRef<Path>) -> Result<Vec<NetworkConfig>, RuntimeError> {
    read_configs_csv(File::open(path)?)
}

/// Writes the four config columns followed by `pred_lat1_s,pred_lat2_s,
/// extrapolation`.
pub fn write_predictions_csv<W: Write>(
    predictions: &[Prediction],
    out: W,
) -> Result<(), RuntimeError> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| RuntimeError::Io(std::io::Error::other(e));
    w.write_record(FEATURE_NAMES.iter().chain(&PREDICTION_COLUMNS))
        .map_err(map)?;
    for p in predictions {
        let c = &p.config;
        w.write_record([
            c.path1.bandwidth_mbps.to_string(),
            c.path1.queue_pkts.to_string(),
            c.path2.bandwidth_mbps.to_string(),
            c.path2.queue_pkts.to_string(),
            p.latency1_s.to_string(),
            p.latency2_s.to_string(),
            p.extrapolation.to_string(),
        ])
        .map_err(map)?;
    }
    w.flush()?;
    Ok(())
}
