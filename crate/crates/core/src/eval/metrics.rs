use super::{EvalError, Result};
use crate::explain::AdditiveExplanation;
use serde::{Deserialize, Serialize};

/// Mean and population standard deviation of absolute errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mae: f64,
    pub sigma: f64,
    pub n: usize,
}

impl ErrorSummary {
    pub fn from_abs_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(EvalError::Empty);
        }
        let n = errors.len() as f64;
        let mae = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mae) * (e - mae)).sum::<f64>() / n;
        Ok(ErrorSummary {
            mae,
            sigma: var.sqrt(),
            n: errors.len(),
        })
    }
}

pub fn abs_errors(actual: &[f64], predicted: &[f64]) -> Result<Vec<f64>> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p).abs())
        .collect())
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<ErrorSummary> {
    ErrorSummary::from_abs_errors(&abs_errors(actual, predicted)?)
}

/// `⌈fraction·n⌉`, tolerant of representation error in `fraction·n`.
pub fn subset_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Indices (ascending) of the `⌈fraction·n⌉` smallest errors; ties favor
/// the lower index.
pub fn select_most_accurate(abs_errors: &[f64], fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EvalError::InvalidFraction(fraction));
    }
    let k = subset_size(abs_errors.len(), fraction);
    let mut order: Vec<usize> = (0..abs_errors.len()).collect();
    order.sort_by(|&a, &b| abs_errors[a].total_cmp(&abs_errors[b]).then(a.cmp(&b)));
    let mut picked = order[..k].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Counts per half-open bin `[k·w, (k+1)·w)` from zero up to the bin
/// holding the largest error.
pub fn error_histogram(abs_errors: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0) {
        return Err(EvalError::InvalidBinWidth(bin_width));
    }
    let mut counts: Vec<usize> = Vec::new();
    for &e in abs_errors {
        let bin = (e.max(0.0) / bin_width).floor() as usize;
        if bin >= counts.len() {
            counts.resize(bin + 1, 0);
        }
        counts[bin] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lower: k as f64 * bin_width,
            upper: (k + 1) as f64 * bin_width,
            count,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCount {
    pub threshold: f64,
    pub within: usize,
    pub above: usize,
}

pub fn threshold_counts(abs_errors: &[f64], thresholds: &[f64]) -> Result<Vec<ThresholdCount>> {
    thresholds
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(EvalError::InvalidThreshold(t));
            }
            let within = abs_errors.iter().filter(|&&e| e <= t).count();
            Ok(ThresholdCount {
                threshold: t,
                within,
                above: abs_errors.len() - within,
            })
        })
        .collect()
}

/// Normalized DCG of the ordering induced by `scores` (descending, ties by
/// lower index) against raw `relevance`, with `log2(rank + 1)` discounts.
pub fn ndcg(relevance: &[f64], scores: &[f64]) -> Result<f64> {
    if relevance.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            left: relevance.len(),
            right: scores.len(),
        });
    }
    if relevance.is_empty() {
        return Err(EvalError::Empty);
    }
    if relevance.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(EvalError::InvalidRelevance);
    }
    if relevance.iter().all(|&r| r == 0.0) {
        return Err(EvalError::ZeroRelevance);
    }
    let dcg = |order: &[usize]| -> f64 {
        order
            .iter()
            .enumerate()
            .map(|(rank, &i)| relevance[i] / ((rank + 2) as f64).log2())
            .sum()
    };
    let mut by_score: Vec<usize> = (0..scores.len()).collect();
    by_score.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ideal: Vec<usize> = (0..relevance.len()).collect();
    ideal.sort_by(|&a, &b| relevance[b].total_cmp(&relevance[a]).then(a.cmp(&b)));
    Ok((dcg(&by_score) / dcg(&ideal)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy)]
pub enum Baseline<'a> {
    /// Global CBR: the case-base weights themselves.
    Global(&'a [f64]),
    /// Additive CBR: `|phi_j|` of the rescaled CBR prediction.
    Additive(&'a AdditiveExplanation),
}

/// nDCG of a candidate's `|phi|` ranking against a baseline's magnitudes.
/// `phi0` plays no part on either side.
pub fn attribution_ndcg(baseline: Baseline<'_>, candidate: &AdditiveExplanation) -> Result<f64> {
    let relevance: Vec<f64> = match baseline {
        Baseline::Global(w) => w.to_vec(),
        Baseline::Additive(e) => e.phi.iter().map(|p| p.abs()).collect(),
    };
    let scores: Vec<f64> = candidate.phi.iter().map(|p| p.abs()).collect();
    ndcg(&relevance, &scores)
}

/// Error summary of `|model - explanation|` on each subset of positions.
pub fn local_accuracy_report(
    model_preds: &[f64],
    explanation_preds: &[f64],
    subsets: &[Vec<usize>],
) -> Result<Vec<ErrorSummary>> {
    let errors = abs_errors(model_preds, explanation_preds)?;
    subsets
        .iter()
        .map(|idx| {
            let sub: Vec<f64> = idx
                .iter()
                .map(|&i| errors.get(i).copied().ok_or(EvalError::IndexOutOfRange(i)))
                .collect::<Result<_>>()?;
            ErrorSummary::from_abs_errors(&sub)
        })
        .collect()
}
