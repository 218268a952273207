//! Gaussian corruption of latency columns and Savitzky-Golay cleaning.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Provenance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("series of length {len} is shorter than the filter window {window}")]
    TooShort { len: usize, window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation in seconds.
    pub sigma: f64,
    pub mu: f64,
    pub seed: u64,
    pub clamp_floor_s: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            mu: 0.0,
            seed: 0,
            clamp_floor_s: 1e-6,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(SignalError::InvalidNoise(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !self.mu.is_finite() {
            return Err(SignalError::InvalidNoise("mu must be finite".into()));
        }
        if !(self.clamp_floor_s.is_finite() && self.clamp_floor_s > 0.0) {
            return Err(SignalError::InvalidNoise(
                "clamp floor must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub spec: NoiseSpec,
    pub rows: usize,
    pub clamp_count: usize,
}

/// The first `n` deltas drawn by [`add_gaussian_noise`] for this spec.
pub fn gaussian_deltas(spec: &NoiseSpec, n: usize) -> Result<Vec<f64>, SignalError> {
    spec.validate()?;
    let normal =
        Normal::new(spec.mu, spec.sigma).map_err(|e| SignalError::InvalidNoise(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// Adds seeded Gaussian noise to both latency columns, consuming draws in
/// row order (lat1 then lat2 within a row), and clamps at the floor.
pub fn add_gaussian_noise(
    ds: &Dataset,
    spec: &NoiseSpec,
) -> Result<(Dataset, NoiseReport), SignalError> {
    let deltas = gaussian_deltas(spec, 2 * ds.len())?;
    let mut clamp_count = 0;
    let mut apply = |x: f64, d: f64| {
        let y = x + d;
        if y < spec.clamp_floor_s {
            clamp_count += 1;
            spec.clamp_floor_s
        } else {
            y
        }
    };
    let rows = ds
        .rows
        .iter()
        .zip(deltas.chunks_exact(2))
        .map(|(r, d)| {
            let mut r = *r;
            r.latency1_s = apply(r.latency1_s, d[0]);
            r.latency2_s = apply(r.latency2_s, d[1]);
            r
        })
        .collect();
    let out = Dataset {
        rows,
        provenance: Provenance::Noised,
        seed_used: Some(spec.seed),
    };
    let report = NoiseReport {
        spec: *spec,
        rows: ds.len(),
        clamp_count,
    };
    Ok((out, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    window: usize,
    order: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            window: 11,
            order: 3,
        }
    }
}

impl FilterSpec {
    pub fn new(window: usize, order: usize) -> Result<Self, SignalError> {
        if window < 3 || window.is_multiple_of(2) {
            return Err(SignalError::InvalidFilter(format!(
                "window must be odd and >= 3, got {window}"
            )));
        }
        if order >= window {
            return Err(SignalError::InvalidFilter(format!(
                "order must be below the window ({order} >= {window})"
            )));
        }
        Ok(Self { window, order })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn half_width(&self) -> usize {
        (self.window - 1) / 2
    }
}

/// Pseudo-inverse of the window's Vandermonde matrix: row `j` maps samples
/// to the coefficient of `u^j` in the least-squares fit, where `u = t/m`
/// rescales the window to [-1, 1] to keep the matrix well conditioned.
fn fit_operator(spec: &FilterSpec) -> DMatrix<f64> {
    let m = spec.half_width() as f64;
    let vander = DMatrix::from_fn(spec.window, spec.order + 1, |i, j| {
        ((i as f64 - m) / m).powi(j as i32)
    });
    vander
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .expect("window > order keeps the Vandermonde matrix full rank")
}

fn weights_at(op: &DMatrix<f64>, offset: f64) -> Vec<f64> {
    (0..op.ncols())
        .map(|i| {
            (0..op.nrows())
                .map(|j| offset.powi(j as i32) * op[(j, i)])
                .sum()
        })
        .collect()
}

/// Convolution weights over offsets −m..=m that evaluate the least-squares
/// polynomial at the window centre.
pub fn sg_coefficients(spec: &FilterSpec) -> Vec<f64> {
    op_row(&fit_operator(spec), 0)
}

fn op_row(op: &DMatrix<f64>, row: usize) -> Vec<f64> {
    op.row(row).iter().copied().collect()
}

pub fn savitzky_golay(series: &[f64], spec: &FilterSpec) -> Result<Vec<f64>, SignalError> {
    let n = series.len();
    let w = spec.window;
    if n < w {
        return Err(SignalError::TooShort { len: n, window: w });
    }
    let m = spec.half_width();
    let op = fit_operator(spec);
    let centre = op_row(&op, 0);
    let dot = |weights: &[f64], start: usize| -> f64 {
        weights
            .iter()
            .zip(&series[start..start + w])
            .map(|(a, b)| a * b)
            .sum()
    };
    let mut out = vec![0.0; n];
    for (start, slot) in out[m..n - m].iter_mut().enumerate() {
        *slot = dot(&centre, start);
    }
    // edges: evaluate the fit of the first / last full window off-centre
    for t in 0..m {
        let offset = (t as f64 - m as f64) / m as f64;
        out[t] = dot(&weights_at(&op, offset), 0);
        let back = n - 1 - t;
        out[back] = dot(&weights_at(&op, -offset), n - w);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub window: usize,
    pub order: usize,
    pub rows: usize,
    /// Smoothed values raised to the floor to keep latencies positive.
    pub clamp_count: usize,
    pub clamp_floor_s: f64,
}

/// Smooths lat1 and lat2 independently in row order. Smoothed values are
/// floored at `clamp_floor_s` so the result stays a valid dataset.
pub fn denoise_dataset(
    ds: &Dataset,
    spec: &FilterSpec,
    clamp_floor_s: f64,
) -> Result<(Dataset, FilterReport), SignalError> {
    let (a, b) = rayon::join(
        || {
            savitzky_golay(
                &ds.rows.iter().map(|r| r.latency1_s).collect::<Vec<_>>(),
                spec,
            )
        },
        || {
            savitzky_golay(
                &ds.rows.iter().map(|r| r.latency2_s).collect::<Vec<_>>(),
                spec,
            )
        },
    );
    let (a, b) = (a?, b?);
    let mut clamp_count = 0;
    let mut floor = |v: f64| {
        if v < clamp_floor_s {
            clamp_count += 1;
            clamp_floor_s
        } else {
            v
        }
    };
    let rows = ds
        .rows
        .iter()
        .zip(a.into_iter().zip(b))
        .map(|(r, (l1, l2))| {
            let mut r = *r;
            r.latency1_s = floor(l1);
            r.latency2_s = floor(l2);
            r
        })
        .collect();
    let report = FilterReport {
        window: spec.window,
        order: spec.order,
        rows: ds.len(),
        clamp_count,
        clamp_floor_s,
    };
    Ok((
        Dataset {
            rows,
            provenance: Provenance::Filtered,
            seed_used: ds.seed_used,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::sim::NetworkConfig;

    #[test]
    fn filter_spec_validation() {
        assert!(FilterSpec::new(4, 3).is_err());
        assert!(FilterSpec::new(1, 0).is_err());
        assert!(FilterSpec::new(5, 5).is_err());
        assert!(FilterSpec::new(5, 4).is_ok());
        assert_eq!(FilterSpec::default(), FilterSpec::new(11, 3).unwrap());
    }

    #[test]
    fn interpolating_order_gives_delta_weights() {
        for w in [3, 5, 7, 9] {
            let c = sg_coefficients(&FilterSpec::new(w, w - 1).unwrap());
            for (i, v) in c.iter().enumerate() {
                let want = if i == w / 2 { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-9, "w={w} i={i} v={v}");
            }
        }
    }

    #[test]
    fn constant_series_is_unchanged() {
        let s = vec![4.25; 30];
        let out = savitzky_golay(&s, &FilterSpec::default()).unwrap();
        assert!(out.iter().all(|v| (v - 4.25).abs() < 1e-12));
    }

    #[test]
    fn short_series_is_rejected() {
        assert_eq!(
            savitzky_golay(&[1.0; 10], &FilterSpec::default()),
            Err(SignalError::TooShort {
                len: 10,
                window: 11
            })
        );
    }

    fn dataset(n: usize) -> Dataset {
        let rows = (0..n)
            .map(|i| Sample {
                config: NetworkConfig::new(25.0, 50 + i as u32, 30.0, 60),
                latency1_s: 10.0 + i as f64,
                latency2_s: 20.0,
            })
            .collect();
        Dataset::new(rows, Provenance::Simulated)
    }

    #[test]
    fn zero_noise_is_identity() {
        let ds = dataset(20);
        let spec = NoiseSpec {
            sigma: 0.0,
            ..NoiseSpec::default()
        };
        let (out, report) = add_gaussian_noise(&ds, &spec).unwrap();
        assert_eq!(out.rows, ds.rows);
        assert_eq!(report.clamp_count, 0);
        assert_eq!(out.provenance, Provenance::Noised);
    }

    #[test]
    fn noise_touches_only_latencies_and_clamps() {
        let ds = dataset(50);
        let spec = NoiseSpec {
            sigma: 30.0,
            seed: 11,
            ..NoiseSpec::default()
        };
        let (out, report) = add_gaussian_noise(&ds, &spec).unwrap();
        assert_eq!(out.len(), ds.len());
        assert!(report.clamp_count > 0);
        for (a, b) in out.rows.iter().zip(&ds.rows) {
            assert_eq!(a.config, b.config);
            assert!(a.latency1_s >= spec.clamp_floor_s && a.latency2_s >= spec.clamp_floor_s);
        }
        let (again, _) = add_gaussian_noise(&ds, &spec).unwrap();
        assert_eq!(again.rows, out.rows);
        assert!(add_gaussian_noise(
            &ds,
            &NoiseSpec {
                sigma: -1.0,
                ..spec
            }
        )
        .is_err());
    }

    #[test]
    fn noise_uses_draws_in_row_then_column_order() {
        let ds = dataset(5);
        let spec = NoiseSpec {
            seed: 5,
            ..NoiseSpec::default()
        };
        let deltas = gaussian_deltas(&spec, 10).unwrap();
        let (out, _) = add_gaussian_noise(&ds, &spec).unwrap();
        for (i, r) in out.rows.iter().enumerate() {
            assert_eq!(r.latency1_s, ds.rows[i].latency1_s + deltas[2 * i]);
            assert_eq!(r.latency2_s, ds.rows[i].latency2_s + deltas[2 * i + 1]);
        }
    }

    #[test]
    fn denoise_preserves_linear_columns() {
        let ds = dataset(25);
        let (out, report) = denoise_dataset(&ds, &FilterSpec::default(), 1e-6).unwrap();
        assert_eq!(out.provenance, Provenance::Filtered);
        assert_eq!(report.clamp_count, 0);
        for (a, b) in out.rows.iter().zip(&ds.rows) {
            assert!((a.latency1_s - b.latency1_s).abs() < 1e-9);
            assert!((a.latency2_s - b.latency2_s).abs() < 1e-9);
            assert_eq!(a.config, b.config);
        }
        assert!(denoise_dataset(&dataset(5), &FilterSpec::default(), 1e-6).is_err());
    }
}
