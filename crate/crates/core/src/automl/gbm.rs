use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{SplitMode, Tree, TreeBuilder};
use super::{Features, GbmParams};
use crate::seeds::derive_index_seed;

/// Squared-loss gradient boosting: `base + lr · Σ tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmState {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

pub fn fit_gbm(x: &[Features], y: &[f64], params: &GbmParams, seed: u64) -> GbmState {
    let n = x.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut residual = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    for round in 0..params.rounds {
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_index_seed(seed, round as u64));
        let rows = if take == n {
            (0..n).collect()
        } else {
            let mut r = sample(&mut rng, n, take).into_vec();
            r.sort_unstable();
            r
        };
        let builder = TreeBuilder {
            x,
            y: &residual,
            max_depth: Some(params.max_depth),
            min_leaf: params.min_leaf,
            max_features: 4,
            mode: SplitMode::Best,
        };
        let tree = builder.build(rows, &mut rng);
        for i in 0..n {
            pred[i] += params.learning_rate * tree.predict(&x[i]);
        }
        trees.push(tree);
    }
    GbmState {
        base,
        learning_rate: params.learning_rate,
        trees,
    }
}

impl GbmState {
    pub fn predict(&self, x: &Features) -> f64 {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boosting_reduces_training_error() {
        let x: Vec<Features> = (0..100)
            .map(|i| [i as f64 / 99.0, ((i * 7) % 11) as f64 / 10.0, 0.0, 0.0])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 8.0 / (0.25 + r[0]) + 0.3 * r[1]).collect();
        let sse = |m: &GbmState| -> f64 {
            x.iter()
                .zip(&y)
                .map(|(r, t)| (m.predict(r) - t).powi(2))
                .sum()
        };
        let p = |rounds| GbmParams {
            rounds,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 1,
            subsample: 0.8,
        };
        let few = fit_gbm(&x, &y, &p(5), 1);
        let many = fit_gbm(&x, &y, &p(200), 1);
        assert!(sse(&many) < 0.05 * sse(&few));
        assert_eq!(many, fit_gbm(&x, &y, &p(200), 1));
    }
}
