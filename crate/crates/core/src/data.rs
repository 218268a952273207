//! Sweep grids, dataset generation, interval sampling, splitting and the CSV
//! interchange format shared by every downstream stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sim::{self, FlowSpec, NetworkConfig, PathConfig, SimError};

pub const CSV_HEADER: [&str; 6] = [
    "bw1_mbps", "q1_pkts", "bw2_mbps", "q2_pkts", "lat1_s", "lat2_s",
];
pub const FEATURE_NAMES: [&str; 4] = ["bw1_mbps", "q1_pkts", "bw2_mbps", "q2_pkts"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("sweep axis `{0}` has no levels")]
    EmptyAxis(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("simulation failed for config {config:?}: {source}")]
    Simulation {
        config: NetworkConfig,
        #[source]
        source: SimError,
    },
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),
    #[error("malformed CSV header: expected `{expected}`, found `{found}`")]
    MalformedHeader { expected: String, found: String },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub bw_min: f64,
    pub bw_max: f64,
    pub bw_step: f64,
    pub q_min: u32,
    pub q_max: u32,
    pub q_step: u32,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            bw_min: 25.0,
            bw_max: 125.0,
            bw_step: 5.0,
            q_min: 50,
            q_max: 150,
            q_step: 5,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let finite = self.bw_min.is_finite() && self.bw_max.is_finite() && self.bw_step.is_finite();
        if !finite || self.bw_step <= 0.0 || self.q_step == 0 {
            return Err(DataError::InvalidSweep(
                "steps must be positive and finite".into(),
            ));
        }
        if self.bw_min <= 0.0 || self.q_min == 0 {
            return Err(DataError::InvalidSweep(
                "bandwidth and queue minimums must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn bandwidth_levels(&self) -> Vec<f64> {
        if self.bw_max < self.bw_min {
            return Vec::new();
        }
        // tolerate representation error in (max - min) / step
        let n = ((self.bw_max - self.bw_min) / self.bw_step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| self.bw_min + i as f64 * self.bw_step)
            .collect()
    }

    pub fn queue_levels(&self) -> Vec<u32> {
        if self.q_max < self.q_min {
            return Vec::new();
        }
        (self.q_min..=self.q_max)
            .step_by(self.q_step as usize)
            .collect()
    }

    pub fn grid_len(&self) -> usize {
        let b = self.bandwidth_levels().len();
        let q = self.queue_levels().len();
        b * q * b * q
    }
}

/// Every config of the sweep in nested order: bw1 outermost, then q1, bw2,
/// and q2 innermost.
pub fn full_grid(spec: &SweepSpec) -> Result<Vec<NetworkConfig>, DataError> {
    spec.validate()?;
    let bws = spec.bandwidth_levels();
    let qs = spec.queue_levels();
    if bws.is_empty() {
        return Err(DataError::EmptyAxis("bandwidth"));
    }
    if qs.is_empty() {
        return Err(DataError::EmptyAxis("queue"));
    }
    let mut out = Vec::with_capacity(spec.grid_len());
    for &bw1 in &bws {
        for &q1 in &qs {
            for &bw2 in &bws {
                for &q2 in &qs {
                    out.push(NetworkConfig::new(bw1, q1, bw2, q2));
                }
            }
        }
    }
    Ok(out)
}

/// Indices chosen by fixed-stride interval sampling of `len` items.
pub fn interval_indices(len: usize, n: usize) -> Result<Vec<usize>, DataError> {
    if n < 1 {
        return Err(DataError::InvalidArgument(
            "sample size must be >= 1".into(),
        ));
    }
    if n >= len {
        return Ok((0..len).collect());
    }
    let stride = len / n;
    Ok((0..n).map(|i| i * stride).collect())
}

pub fn interval_sample<T: Clone>(items: &[T], n: usize) -> Result<Vec<T>, DataError> {
    Ok(interval_indices(items.len(), n)?
        .into_iter()
        .map(|i| items[i].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub config: NetworkConfig,
    pub latency1_s: f64,
    pub latency2_s: f64,
}

impl Sample {
    pub fn latency(&self, target: Target) -> f64 {
        match target {
            Target::Path1 => self.latency1_s,
            Target::Path2 => self.latency2_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Path1,
    Path2,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::Path1, Target::Path2];

    pub fn name(self) -> &'static str {
        match self {
            Target::Path1 => "path1",
            Target::Path2 => "path2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    Ingested,
    Noised,
    Filtered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Sample>,
    pub provenance: Provenance,
    pub seed_used: Option<u64>,
}

impl Dataset {
    pub fn new(rows: Vec<Sample>, provenance: Provenance) -> Self {
        Self {
            rows,
            provenance,
            seed_used: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn configs(&self) -> Vec<NetworkConfig> {
        self.rows.iter().map(|r| r.config).collect()
    }

    pub fn features(&self) -> Vec<[f64; 4]> {
        self.rows.iter().map(|r| r.config.features()).collect()
    }

    pub fn targets(&self, target: Target) -> Vec<f64> {
        self.rows.iter().map(|r| r.latency(target)).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
            provenance: self.provenance,
            seed_used: self.seed_used,
        }
    }

    /// SHA-256 of the dataset's CSV rendering.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_csv_to(self, &mut buf).expect("writing to memory cannot fail");
        Sha256::digest(&buf)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn path_key(p: &PathConfig) -> (u64, u32) {
    (p.bandwidth_mbps.to_bits(), p.queue_pkts)
}

/// Simulates every config, reusing results per distinct path: the two
/// paths never share links, so a path's latency depends on its own
/// bandwidth and queue only. Runs on the current rayon pool; the output is
/// independent of the worker count.
pub fn simulate_configs(
    configs: &[NetworkConfig],
    flow: &FlowSpec,
) -> Result<Vec<Sample>, DataError> {
    flow.validate().map_err(|source| DataError::Simulation {
        config: configs
            .first()
            .copied()
            .unwrap_or(NetworkConfig::new(0.0, 0, 0.0, 0)),
        source,
    })?;
    let mut unique: BTreeMap<(u64, u32), PathConfig> = BTreeMap::new();
    for c in configs {
        unique.entry(path_key(&c.path1)).or_insert(c.path1);
        unique.entry(path_key(&c.path2)).or_insert(c.path2);
    }
    let paths: Vec<PathConfig> = unique.into_values().collect();
    let results: Vec<Result<f64, SimError>> = paths
        .par_iter()
        .map(|p| sim::simulate_path(p, flow).map(|r| r.latency_s))
        .collect();
    let mut latency = BTreeMap::new();
    for (p, r) in paths.iter().zip(results) {
        latency.insert(path_key(p), r);
    }
    configs
        .iter()
        .map(|c| {
            let lookup = |p: &PathConfig| match &latency[&path_key(p)] {
                Ok(l) => Ok(*l),
                Err(e) => Err(DataError::Simulation {
                    config: *c,
                    source: e.clone(),
                }),
            };
            Ok(Sample {
                config: *c,
                latency1_s: lookup(&c.path1)?,
                latency2_s: lookup(&c.path2)?,
            })
        })
        .collect()
}

pub fn generate_dataset(
    spec: &SweepSpec,
    flow: &FlowSpec,
    sample_n: Option<usize>,
) -> Result<Dataset, DataError> {
    let grid = full_grid(spec)?;
    let configs = match sample_n {
        Some(n) => interval_sample(&grid, n)?,
        None => grid,
    };
    Ok(Dataset::new(
        simulate_configs(&configs, flow)?,
        Provenance::Simulated,
    ))
}

/// Grid indices for a seeded random sample of `n` configs that avoids
/// `exclude`; returned in ascending (grid) order.
pub fn random_grid_indices(
    grid_len: usize,
    n: usize,
    exclude: &BTreeSet<usize>,
    seed: u64,
) -> Result<Vec<usize>, DataError> {
    let available = grid_len - exclude.iter().filter(|&&i| i < grid_len).count();
    if n > available {
        return Err(DataError::InvalidArgument(format!(
            "requested {n} held-out configs but only {available} are available"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = BTreeSet::new();
    while picked.len() < n {
        let want = (n - picked.len()).min(grid_len);
        for i in rand::seq::index::sample(&mut rng, grid_len, want) {
            if !exclude.contains(&i) {
                picked.insert(i);
                if picked.len() == n {
                    break;
                }
            }
        }
    }
    Ok(picked.into_iter().collect())
}

/// Seeded shuffle; the first ⌈test_frac·N⌉ shuffled rows form the test
/// set. Both parts keep the original relative row order.
pub fn split(ds: &Dataset, test_frac: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "test fraction must be in (0, 1), got {test_frac}"
        )));
    }
    let n = ds.len();
    let n_test = (test_frac * n as f64).ceil() as usize;
    if n_test == 0 || n_test >= n {
        return Err(DataError::InvalidArgument(format!(
            "cannot split {n} rows with test fraction {test_frac}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    let mut tr = ds.subset(&train);
    let mut te = ds.subset(&test);
    tr.seed_used = Some(seed);
    te.seed_used = Some(seed);
    Ok((tr, te))
}

pub fn write_csv_to<W: Write>(ds: &Dataset, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| DataError::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(map)?;
    for r in &ds.rows {
        let c = &r.config;
        w.write_record([
            c.path1.bandwidth_mbps.to_string(),
            c.path1.queue_pkts.to_string(),
            c.path2.bandwidth_mbps.to_string(),
            c.path2.queue_pkts.to_string(),
            r.latency1_s.to_string(),
            r.latency2_s.to_string(),
        ])
        .map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let file = File::create(path)?;
    write_csv_to(ds, std::io::BufWriter::new(file))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    read_csv_from(text.as_bytes())
}

/// Parses the six-column dataset schema. Used both for round trips and for
/// ingesting latencies measured by an external emulator or simulator.
pub fn read_csv_from<R: Read>(input: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    for col in CSV_HEADER {
        if !found.contains(&col) {
            return Err(DataError::MissingColumn(col.to_string()));
        }
    }
    if found != CSV_HEADER {
        return Err(DataError::MalformedHeader {
            expected: CSV_HEADER.join(","),
            found: found.join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != CSV_HEADER.len() {
            return Err(DataError::Parse {
                row,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
            });
        }
        let float = |j: usize| -> Result<f64, DataError> {
            let cell = rec[j].trim();
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::Parse {
                    row,
                    message: format!(
                        "column `{}`: `{cell}` is not a finite number",
                        CSV_HEADER[j]
                    ),
                })
        };
        let queue = |j: usize| -> Result<u32, DataError> {
            let cell = rec[j].trim();
            cell.parse::<u32>().map_err(|_| DataError::Parse {
                row,
                message: format!(
                    "column `{}`: `{cell}` is not a non-negative integer",
                    CSV_HEADER[j]
                ),
            })
        };
        let sample = Sample {
            config: NetworkConfig::new(float(0)?, queue(1)?, float(2)?, queue(3)?),
            latency1_s: float(4)?,
            latency2_s: float(5)?,
        };
        for (j, v) in [(4, sample.latency1_s), (5, sample.latency2_s)] {
            if v <= 0.0 {
                return Err(DataError::Parse {
                    row,
                    message: format!(
                        "column `{}`: latency must be positive, got {v}",
                        CSV_HEADER[j]
                    ),
                });
            }
        }
        rows.push(sample);
    }
    Ok(Dataset::new(rows, Provenance::Ingested))
}
