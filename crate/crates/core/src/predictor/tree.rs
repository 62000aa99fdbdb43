//! Axis-aligned decision trees: Gini splits for classification, variance
//! reduction for regression, optional bootstrap bagging. Fitting is fully
//! deterministic for a fixed config: features are scanned in order,
//! thresholds ascending, and the first best split wins ties.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

/// Shared tree hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    /// Minimum rows on each side of a split.
    pub min_samples_leaf: usize,
    /// Number of bagged trees. 1 fits a single tree on the full data;
    /// more fit each tree on a bootstrap resample.
    pub n_trees: usize,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 12,
            min_samples_leaf: 5,
            n_trees: 1,
            seed: 0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "min_samples_leaf must be at least 1".to_string(),
            ));
        }
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node<L> {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(L),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree<L> {
    nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    fn leaf_for(&self, x: &[f64]) -> &L {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(leaf) => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Considers `(gain, feature, threshold)` candidates in scan order and keeps
/// the strictly best one, so earlier candidates win ties. Zero-gain splits
/// are allowed: an impure node keeps splitting even when no single cut helps
/// immediately, which is what lets parity-style patterns (XOR) resolve two
/// levels down. Gain is mathematically non-negative, so the floor only
/// absorbs roundoff.
fn consider(best: &mut Option<Split>, feature: usize, threshold: f64, gain: f64) {
    if gain > -1e-12 && best.is_none_or(|b| gain > b.gain + 1e-15) {
        *best = Some(Split {
            feature,
            threshold,
            gain,
        });
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

fn class_counts(y: &[usize], indices: &[usize], n_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_classes];
    for &i in indices {
        counts[y[i]] += 1;
    }
    counts
}

fn gini(counts: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

/// Best Gini split of `indices`: one ascending sweep per feature with
/// incremental class counts.
fn best_classification_split(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    indices: &[usize],
    min_leaf: usize,
    parent_gini: f64,
) -> Option<Split> {
    let n = indices.len();
    let n_features = x[indices[0]].len();
    let total = class_counts(y, indices, n_classes);
    let mut best = None;
    let mut sorted = indices.to_vec();
    #[allow(clippy::needless_range_loop)]
    for feature in 0..n_features {
        sorted.sort_unstable_by(|&a, &b| {
            x[a][feature]
                .partial_cmp(&x[b][feature])
                .expect("finite feature values")
        });
        let mut left = vec![0u64; n_classes];
        for cut in 1..n {
            left[y[sorted[cut - 1]]] += 1;
            if cut < min_leaf || n - cut < min_leaf {
                continue;
            }
            let lo = x[sorted[cut - 1]][feature];
            let hi = x[sorted[cut]][feature];
            if lo == hi {
                continue;
            }
            let right: Vec<u64> = total.iter().zip(&left).map(|(&t, &l)| t - l).collect();
            let nl = cut as u64;
            let nr = (n - cut) as u64;
            let children =
                (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            consider(&mut best, feature, lo + (hi - lo) / 2.0, parent_gini - children);
        }
    }
    best
}

fn build_classification(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    indices: &[usize],
    depth: usize,
    cfg: &TreeConfig,
    nodes: &mut Vec<Node<Vec<u64>>>,
) -> usize {
    let counts = class_counts(y, indices, n_classes);
    let parent = gini(&counts, indices.len() as u64);
    let can_split =
        depth < cfg.max_depth && indices.len() >= 2 * cfg.min_samples_leaf && parent > 0.0;
    let split = if can_split {
        best_classification_split(x, y, n_classes, indices, cfg.min_samples_leaf, parent)
    } else {
        None
    };
    match split {
        None => {
            nodes.push(Node::Leaf(counts));
            nodes.len() - 1
        }
        Some(s) => {
            let id = nodes.len();
            nodes.push(Node::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: 0,
                right: 0,
            });
            let (l, r): (Vec<usize>, Vec<usize>) =
                indices.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
            let left = build_classification(x, y, n_classes, &l, depth + 1, cfg, nodes);
            let right = build_classification(x, y, n_classes, &r, depth + 1, cfg, nodes);
            if let Node::Split {
                left: lslot,
                right: rslot,
                ..
            } = &mut nodes[id]
            {
                *lslot = left;
                *rslot = right;
            }
            id
        }
    }
}

/// A Gini-split tree ensemble over a fixed set of classes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeClassifier {
    trees: Vec<Tree<Vec<u64>>>,
    pub n_classes: usize,
}

impl TreeClassifier {
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, cfg: &TreeConfig) -> Result<Self> {
        cfg.validate()?;
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&label| label >= n_classes) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        let trees = (0..cfg.n_trees)
            .map(|b| {
                let indices = resample(x.len(), cfg, b);
                let mut nodes = Vec::new();
                build_classification(x, y, n_classes, &indices, 0, cfg, &mut nodes);
                Tree { nodes }
            })
            .collect();
        Ok(TreeClassifier { trees, n_classes })
    }

    /// Mean leaf class distribution across the ensemble.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut proba = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let counts = tree.leaf_for(x);
            let total: u64 = counts.iter().sum();
            if total > 0 {
                for (p, &c) in proba.iter_mut().zip(counts) {
                    *p += c as f64 / total as f64;
                }
            }
        }
        for p in &mut proba {
            *p /= self.trees.len() as f64;
        }
        proba
    }

    /// Most probable class; ties resolve to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let proba = self.predict_proba(x);
        let mut best = 0;
        for (c, &p) in proba.iter().enumerate() {
            if p > proba[best] {
                best = c;
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

/// Best variance-reduction split: one ascending sweep per feature with
/// running sums. Comparing summed SSE is equivalent to comparing weighted
/// child variances.
fn best_regression_split(
    x: &[Vec<f64>],
    y: &[f64],
    indices: &[usize],
    min_leaf: usize,
    parent_sse: f64,
) -> Option<Split> {
    let n = indices.len();
    let n_features = x[indices[0]].len();
    let total_sum: f64 = indices.iter().map(|&i| y[i]).sum();
    let total_sumsq: f64 = indices.iter().map(|&i| y[i] * y[i]).sum();
    let mut best = None;
    let mut sorted = indices.to_vec();
    #[allow(clippy::needless_range_loop)]
    for feature in 0..n_features {
        sorted.sort_unstable_by(|&a, &b| {
            x[a][feature]
                .partial_cmp(&x[b][feature])
                .expect("finite feature values")
        });
        let mut left_sum = 0.0;
        let mut left_sumsq = 0.0;
        for cut in 1..n {
            let v = y[sorted[cut - 1]];
            left_sum += v;
            left_sumsq += v * v;
            if cut < min_leaf || n - cut < min_leaf {
                continue;
            }
            let lo = x[sorted[cut - 1]][feature];
            let hi = x[sorted[cut]][feature];
            if lo == hi {
                continue;
            }
            let nl = cut as f64;
            let nr = (n - cut) as f64;
            let sse_left = left_sumsq - left_sum * left_sum / nl;
            let right_sum = total_sum - left_sum;
            let sse_right = (total_sumsq - left_sumsq) - right_sum * right_sum / nr;
            consider(
                &mut best,
                feature,
                lo + (hi - lo) / 2.0,
                parent_sse - (sse_left + sse_right),
            );
        }
    }
    best
}

fn build_regression(
    x: &[Vec<f64>],
    y: &[f64],
    indices: &[usize],
    depth: usize,
    cfg: &TreeConfig,
    nodes: &mut Vec<Node<f64>>,
) -> usize {
    let n = indices.len() as f64;
    let sum: f64 = indices.iter().map(|&i| y[i]).sum();
    let mean = sum / n;
    let parent_sse: f64 = indices
        .iter()
        .map(|&i| {
            let d = y[i] - mean;
            d * d
        })
        .sum();
    let can_split =
        depth < cfg.max_depth && indices.len() >= 2 * cfg.min_samples_leaf && parent_sse > 0.0;
    let split = if can_split {
        best_regression_split(x, y, indices, cfg.min_samples_leaf, parent_sse)
    } else {
        None
    };
    match split {
        None => {
            nodes.push(Node::Leaf(mean));
            nodes.len() - 1
        }
        Some(s) => {
            let id = nodes.len();
            nodes.push(Node::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: 0,
                right: 0,
            });
            let (l, r): (Vec<usize>, Vec<usize>) =
                indices.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
            let left = build_regression(x, y, &l, depth + 1, cfg, nodes);
            let right = build_regression(x, y, &r, depth + 1, cfg, nodes);
            if let Node::Split {
                left: lslot,
                right: rslot,
                ..
            } = &mut nodes[id]
            {
                *lslot = left;
                *rslot = right;
            }
            id
        }
    }
}

/// A variance-reduction tree ensemble predicting by leaf means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeRegressor {
    trees: Vec<Tree<f64>>,
}

impl TreeRegressor {
    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &TreeConfig) -> Result<Self> {
        cfg.validate()?;
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let trees = (0..cfg.n_trees)
            .map(|b| {
                let indices = resample(x.len(), cfg, b);
                let mut nodes = Vec::new();
                build_regression(x, y, &indices, 0, cfg, &mut nodes);
                Tree { nodes }
            })
            .collect();
        Ok(TreeRegressor { trees })
    }

    /// Mean of the per-tree leaf means.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| *t.leaf_for(x)).sum();
        sum / self.trees.len() as f64
    }
}

/// Row indices for tree `b`: the identity for a single tree, a seeded
/// bootstrap resample otherwise.
fn resample(n: usize, cfg: &TreeConfig, b: usize) -> Vec<usize> {
    if cfg.n_trees == 1 {
        (0..n).collect()
    } else {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, seeds::STREAM_BOOTSTRAP, b as u64));
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    }
}
