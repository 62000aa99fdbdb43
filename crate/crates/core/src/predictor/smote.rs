//! SMOTE-NC oversampling for mixed continuous/categorical rows.
//!
//! Synthetic minority rows are built per class: pick a seed row, pick one of
//! its k nearest same-class neighbours, interpolate the continuous features
//! at a uniform t in [0, 1], and set each categorical feature to the mode of
//! the neighbourhood. Distances are squared Euclidean over the continuous
//! features plus, for every categorical mismatch, the squared median of the
//! per-feature continuous standard deviations.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeds;

/// One training row as seen by the oversampler.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteRow {
    pub continuous: Vec<f64>,
    pub categorical: Vec<u32>,
    pub label: usize,
}

/// Median of the per-feature standard deviations of the continuous columns.
fn categorical_penalty(rows: &[SmoteRow]) -> f64 {
    let n_cont = rows[0].continuous.len();
    if n_cont == 0 {
        return 1.0;
    }
    let n = rows.len() as f64;
    let mut stds: Vec<f64> = (0..n_cont)
        .map(|j| {
            let mean = rows.iter().map(|r| r.continuous[j]).sum::<f64>() / n;
            let var = rows
                .iter()
                .map(|r| {
                    let d = r.continuous[j] - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            var.sqrt()
        })
        .collect();
    stds.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite std"));
    let m = stds.len();
    if m % 2 == 1 {
        stds[m / 2]
    } else {
        (stds[m / 2 - 1] + stds[m / 2]) / 2.0
    }
}

fn distance_sq(a: &SmoteRow, b: &SmoteRow, penalty_sq: f64) -> f64 {
    let mut d = 0.0;
    for (&x, &y) in a.continuous.iter().zip(&b.continuous) {
        let diff = x - y;
        d += diff * diff;
    }
    for (&x, &y) in a.categorical.iter().zip(&b.categorical) {
        if x != y {
            d += penalty_sq;
        }
    }
    d
}

/// Indices (into `class_rows`) of the k nearest neighbours of `class_rows[i]`,
/// excluding itself, nearest first. Ties break toward the lower index.
fn k_nearest(class_rows: &[SmoteRow], i: usize, k: usize, penalty_sq: f64) -> Vec<usize> {
    let mut dists: Vec<(f64, usize)> = class_rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, row)| (distance_sq(&class_rows[i], row, penalty_sq), j))
        .collect();
    dists.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite distance")
            .then(a.1.cmp(&b.1))
    });
    dists.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Mode of the categorical values at position `pos` across the seed row and
/// its neighbours; ties resolve to the smallest value.
fn neighbourhood_mode(class_rows: &[SmoteRow], seed_idx: usize, neighbours: &[usize], pos: usize) -> u32 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    *counts.entry(class_rows[seed_idx].categorical[pos]).or_insert(0) += 1;
    for &j in neighbours {
        *counts.entry(class_rows[j].categorical[pos]).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(value, _)| value)
        .expect("non-empty neighbourhood")
}

/// Oversamples `rows` so every class listed in `targets` reaches its target
/// count. Classes already at or above target, and classes absent from
/// `targets`, pass through untouched. Original rows always come first in the
/// output, in input order, followed by synthetic rows grouped by class.
pub fn smote_nc(
    rows: &[SmoteRow],
    k: usize,
    targets: &BTreeMap<usize, usize>,
    seed: u64,
) -> Result<Vec<SmoteRow>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("smote k must be at least 1".to_string()));
    }
    let penalty = categorical_penalty(rows);
    let penalty_sq = penalty * penalty;

    let mut out = rows.to_vec();
    for (&class, &target) in targets {
        let class_rows: Vec<SmoteRow> =
            rows.iter().filter(|r| r.label == class).cloned().collect();
        if class_rows.len() >= target {
            continue;
        }
        if class_rows.len() <= k {
            return Err(Error::ClassTooSmallForSmote {
                class,
                size: class_rows.len(),
                k,
            });
        }
        let needed = target - class_rows.len();
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::derive(seed, seeds::STREAM_SMOTE, class as u64));
        for s in 0..needed {
            // Round-robin over seed rows so every original participates.
            let seed_idx = s % class_rows.len();
            let neighbours = k_nearest(&class_rows, seed_idx, k, penalty_sq);
            let pick = neighbours[rng.gen_range(0..neighbours.len())];
            let t: f64 = rng.gen_range(0.0..=1.0);
            let continuous: Vec<f64> = class_rows[seed_idx]
                .continuous
                .iter()
                .zip(&class_rows[pick].continuous)
                .map(|(&a, &b)| a + t * (b - a))
                .collect();
            let categorical: Vec<u32> = (0..class_rows[seed_idx].categorical.len())
                .map(|pos| neighbourhood_mode(&class_rows, seed_idx, &neighbours, pos))
                .collect();
            out.push(SmoteRow {
                continuous,
                categorical,
                label: class,
            });
        }
    }
    Ok(out)
}
