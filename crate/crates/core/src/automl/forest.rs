use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{SplitMode, Tree, TreeBuilder};
use super::{Features, ForestParams};
use crate::seeds::derive_index_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestState {
    pub trees: Vec<Tree>,
}

/// Random forest (bootstrap rows, best splits) or extra trees (all rows,
/// random thresholds). Trees are grown in parallel, each from its own
/// seed, so the result does not depend on the worker count.
pub fn fit_forest(
    x: &[Features],
    y: &[f64],
    params: &ForestParams,
    extra: bool,
    seed: u64,
) -> ForestState {
    let max_features = ((params.feature_fraction * 4.0).ceil() as usize).clamp(1, 4);
    let builder = TreeBuilder {
        x,
        y,
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features,
        mode: if extra {
            SplitMode::Random
        } else {
            SplitMode::Best
        },
    };
    let n = x.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_index_seed(seed, t as u64));
            let rows = if extra {
                (0..n).collect()
            } else {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            };
            builder.build(rows, &mut rng)
        })
        .collect();
    ForestState { trees }
}

impl ForestState {
    pub fn predict(&self, x: &Features) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
