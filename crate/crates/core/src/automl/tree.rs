//! Regression trees shared by the CART, forest and boosting families.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Features;

const LEAF: i8 = -1;

/// Flat node arrays; node 0 is the root. A row goes left when
/// `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i8>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl Tree {
    pub fn predict(&self, x: &Features) -> f64 {
        let mut node = 0;
        loop {
            let f = self.feature[node];
            if f == LEAF {
                return self.value[node];
            }
            node = if x[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    pub fn node_count(&self) -> usize {
        self.feature.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, n: usize) -> usize {
            if t.feature[n] == LEAF {
                0
            } else {
                1 + walk(t, t.left[n] as usize).max(walk(t, t.right[n] as usize))
            }
        }
        walk(self, 0)
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Exhaustive search over midpoints between distinct values.
    Best,
    /// One uniformly drawn threshold per candidate feature (extra trees).
    Random,
}

pub struct TreeBuilder<'a> {
    pub x: &'a [Features],
    pub y: &'a [f64],
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split, 1..=4.
    pub max_features: usize,
    pub mode: SplitMode,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl TreeBuilder<'_> {
    /// Grows a tree on the rows in `rows` (indices may repeat, as in a
    /// bootstrap sample). `rng` is only drawn from for feature subsets and
    /// random thresholds.
    pub fn build(&self, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let mut tree = Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
        };
        self.grow(&mut tree, rows, 0, rng);
        tree
    }

    fn grow(&self, tree: &mut Tree, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let mean = sum / n;
        let at_depth_limit = self.max_depth.is_some_and(|d| depth >= d);
        if at_depth_limit || rows.len() < 2 * self.min_leaf {
            return tree.push_leaf(mean);
        }
        let first = self.y[rows[0]];
        if rows.iter().all(|&i| self.y[i] == first) {
            return tree.push_leaf(mean);
        }
        let Some(split) = self.find_split(&rows, sum, rng) else {
            return tree.push_leaf(mean);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[i][split.feature] <= split.threshold);
        let node = tree.push_leaf(mean);
        tree.feature[node] = split.feature as i8;
        tree.threshold[node] = split.threshold;
        let left = self.grow(tree, l, depth + 1, rng);
        let right = self.grow(tree, r, depth + 1, rng);
        tree.left[node] = left as u32;
        tree.right[node] = right as u32;
        node
    }

    fn candidate_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        if self.max_features >= 4 {
            return (0..4).collect();
        }
        let mut f = sample(rng, 4, self.max_features).into_vec();
        f.sort_unstable();
        f
    }

    fn find_split(&self, rows: &[usize], total: f64, rng: &mut ChaCha8Rng) -> Option<Split> {
        let n = rows.len();
        // maximizing Σ_side sum²/count is equivalent to minimizing SSE
        let parent_score = total * total / n as f64;
        let mut best: Option<Split> = None;
        let mut consider = |s: Split| {
            if s.score > parent_score + 1e-12 * parent_score.abs().max(1.0)
                && best.as_ref().is_none_or(|b| s.score > b.score)
            {
                best = Some(s);
            }
        };
        for f in self.candidate_features(rng) {
            match self.mode {
                SplitMode::Best => {
                    let mut order: Vec<(f64, f64)> =
                        rows.iter().map(|&i| (self.x[i][f], self.y[i])).collect();
                    order.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let mut left_sum = 0.0;
                    for i in 0..n - 1 {
                        left_sum += order[i].1;
                        let nl = i + 1;
                        if order[i].0 == order[i + 1].0
                            || nl < self.min_leaf
                            || n - nl < self.min_leaf
                        {
                            continue;
                        }
                        let right_sum = total - left_sum;
                        let score = left_sum * left_sum / nl as f64
                            + right_sum * right_sum / (n - nl) as f64;
                        consider(Split {
                            feature: f,
                            threshold: 0.5 * (order[i].0 + order[i + 1].0),
                            score,
                        });
                    }
                }
                SplitMode::Random => {
                    let (lo, hi) = rows
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                            (lo.min(self.x[i][f]), hi.max(self.x[i][f]))
                        });
                    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
                        continue;
                    }
                    let mut threshold = rng.random_range(lo..hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    let (mut ls, mut nl) = (0.0, 0usize);
                    for &i in rows {
                        if self.x[i][f] <= threshold {
                            ls += self.y[i];
                            nl += 1;
                        }
                    }
                    if nl < self.min_leaf || n - nl < self.min_leaf {
                        continue;
                    }
                    let rs = total - ls;
                    consider(Split {
                        feature: f,
                        threshold,
                        score: ls * ls / nl as f64 + rs * rs / (n - nl) as f64,
                    });
                }
            }
        }
        best
    }
}
