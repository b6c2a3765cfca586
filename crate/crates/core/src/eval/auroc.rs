//! Rank-based AUROC (Mann-Whitney with midrank ties) at image and pixel
//! level.

use super::EvalError;
use crate::anomaly::AnomalyMap;
use crate::image::Mask;
use crate::scalar::Scalar;

/// Probability a random positive outranks a random negative, ties counted
/// one half. Requires both classes present and finite scores.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore);
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass { positives: n_pos, negatives: n_neg });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // Midranks over tie groups (1-based ranks).
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

/// AUROC over the pooled pixel population of all maps against binary
/// ground-truth masks.
pub fn pixel_auroc<S: Scalar>(maps: &[AnomalyMap<S>], gt: &[Mask<S>]) -> Result<f64, EvalError> {
    if maps.len() != gt.len() {
        return Err(EvalError::LengthMismatch { scores: maps.len(), labels: gt.len() });
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (map, mask) in maps.iter().zip(gt) {
        if map.height() != mask.height() || map.width() != mask.width() {
            return Err(EvalError::LengthMismatch {
                scores: map.height() * map.width(),
                labels: mask.height() * mask.width(),
            });
        }
        for (v, m) in map.data().iter().zip(mask.data()) {
            scores.push(v.to_f64_lossy());
            labels.push(*m > S::zero());
        }
    }
    auroc(&scores, &labels)
}

/// Mean of per-image pixel AUROCs over images containing both classes.
pub fn pixel_auroc_per_image<S: Scalar>(
    maps: &[AnomalyMap<S>],
    gt: &[Mask<S>],
) -> Result<f64, EvalError> {
    let mut values = Vec::new();
    for (map, mask) in maps.iter().zip(gt) {
        let labels: Vec<bool> = mask.data().iter().map(|&m| m > S::zero()).collect();
        let pos = labels.iter().filter(|&&l| l).count();
        if pos == 0 || pos == labels.len() {
            continue;
        }
        let scores: Vec<f64> = map.data().iter().map(|v| v.to_f64_lossy()).collect();
        values.push(auroc(&scores, &labels)?);
    }
    if values.is_empty() {
        return Err(EvalError::SingleClass { positives: 0, negatives: 0 });
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
