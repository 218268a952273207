use serde::{Deserialize, Serialize};

use super::{Features, KnnParams, Weighting};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnState {
    pub k: usize,
    pub weighting: Weighting,
    pub points: Vec<Features>,
    pub targets: Vec<f64>,
}

impl KnnState {
    pub fn fit(x: &[Features], y: &[f64], params: &KnnParams) -> KnnState {
        let k = if params.k > x.len() {
            log::warn!(
                "knn: k={} exceeds {} training rows, clipping",
                params.k,
                x.len()
            );
            x.len()
        } else {
            params.k
        };
        KnnState {
            k,
            weighting: params.weighting,
            points: x.to_vec(),
            targets: y.to_vec(),
        }
    }

    pub fn predict(&self, x: &Features) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = (0..4).map(|j| (p[j] - x[j]) * (p[j] - x[j])).sum();
                (d2, i)
            })
            .collect();
        let k = self.k;
        // ties resolve by training row index
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &mut dist[..k];
        nearest.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match self.weighting {
            Weighting::Uniform => {
                nearest.iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / k as f64
            }
            Weighting::Distance => {
                let exact: Vec<f64> = nearest
                    .iter()
                    .filter(|(d, _)| *d == 0.0)
                    .map(|&(_, i)| self.targets[i])
                    .collect();
                if !exact.is_empty() {
                    return exact.iter().sum::<f64>() / exact.len() as f64;
                }
                let (num, den) = nearest.iter().fold((0.0, 0.0), |(num, den), &(d2, i)| {
                    let w = 1.0 / d2.sqrt();
                    (num + w * self.targets[i], den + w)
                });
                num / den
            }
        }
    }
}
