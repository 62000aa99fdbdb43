//! Evaluation metrics for the two-stage predictor: support-weighted F1 for
//! the classifier, RMSE and WAPE for the regressors.

use crate::error::{Error, Result};

fn check_lengths<A, B>(truth: &[A], pred: &[B]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    Ok(())
}

/// F1 per class, weighted by true-class support. Classes with no true rows
/// contribute nothing; a class with zero precision+recall scores 0.
pub fn weighted_f1(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<f64> {
    check_lengths(truth, pred)?;
    let mut tp = vec![0u64; n_classes];
    let mut fp = vec![0u64; n_classes];
    let mut fn_ = vec![0u64; n_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::InvalidConfig(format!(
                "label {} out of range for {n_classes} classes",
                t.max(p)
            )));
        }
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut sum = 0.0;
    for c in 0..n_classes {
        let support = tp[c] + fn_[c];
        if support == 0 {
            continue;
        }
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        let f1 = if denom == 0 {
            0.0
        } else {
            2.0 * tp[c] as f64 / denom as f64
        };
        sum += f1 * support as f64;
    }
    Ok(sum / truth.len() as f64)
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_lengths(truth, pred)?;
    let sse: f64 = truth
        .iter()
        .zip(pred)
        .map(|(&t, &p)| {
            let d = t - p;
            d * d
        })
        .sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// Weighted absolute percentage error: sum |y - yhat| / sum |y|.
pub fn wape(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_lengths(truth, pred)?;
    let denom: f64 = truth.iter().map(|t| t.abs()).sum();
    if denom == 0.0 {
        return Err(Error::AllZeroTruth);
    }
    let num: f64 = truth.iter().zip(pred).map(|(&t, &p)| (t - p).abs()).sum();
    Ok(num / denom)
}
