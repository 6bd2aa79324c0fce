//! Additive feature attributions: `prediction ≈ phi0 + Σ phi_j`.
//!
//! Explainers work on encoded feature vectors. A model is anything that
//! implements [`Predictor`]; plain closures can be wrapped in [`FnPredictor`].

mod additive_cbr;
mod exact;
mod kernelshap;
mod lime;

pub use additive_cbr::{additive_cbr, ADDITIVE_CBR_EPSILON};
pub use exact::{exact_shapley, EXACT_SHAPLEY_MAX_FEATURES};
pub use kernelshap::{kernelshap_explain, sample_background, CoalitionBudget, ShapConfig};
pub use lime::{lime_explain, FeatureStats, LimeConfig, TrainStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("cannot explain an instance with zero features")]
    NoFeatures,
    #[error("background set is empty")]
    EmptyBackground,
    #[error("dimension mismatch: expected {expected} features, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{features} features exceeds the limit of {limit}")]
    TooManyFeatures { features: usize, limit: usize },
    #[error("additive CBR multiplier undefined: |Σ x·w| = {denominator:e} is below {ADDITIVE_CBR_EPSILON:e}")]
    UndefinedMultiplier { denominator: f64 },
}

pub type Result<T> = std::result::Result<T, ExplainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "kernelshap")]
    KernelShap,
    #[serde(rename = "lime")]
    Lime,
    #[serde(rename = "additive_cbr")]
    AdditiveCbr,
    #[serde(rename = "exact_shapley")]
    ExactShapley,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::KernelShap => "kernelshap",
            Method::Lime => "lime",
            Method::AdditiveCbr => "additive_cbr",
            Method::ExactShapley => "exact_shapley",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveExplanation {
    pub method: Method,
    pub phi0: f64,
    pub phi: Vec<f64>,
    /// The model output this explanation targets.
    pub explained_prediction: f64,
    /// Diagnostics such as solver fallbacks or degenerate samples.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl AdditiveExplanation {
    pub fn new(method: Method, phi0: f64, phi: Vec<f64>, explained_prediction: f64) -> Self {
        AdditiveExplanation {
            method,
            phi0,
            phi,
            explained_prediction,
            notes: Vec::new(),
        }
    }

    pub fn additive_predict(&self) -> f64 {
        additive_predict(self)
    }
}

pub fn additive_predict(e: &AdditiveExplanation) -> f64 {
    e.phi0 + e.phi.iter().sum::<f64>()
}

pub trait Predictor {
    fn predict_one(&self, x: &[f64]) -> f64;

    /// `v(S)` for each coalition bitmask `S`: the mean prediction over the
    /// background of the hybrid that takes features in `S` from `x` and the
    /// rest from the background row.
    fn coalition_values(&self, x: &[f64], background: &[Vec<f64>], coalitions: &[u64]) -> Vec<f64> {
        brute_force_coalition_values(self, x, background, coalitions)
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict_one(&self, x: &[f64]) -> f64 {
        (**self).predict_one(x)
    }

    fn coalition_values(&self, x: &[f64], background: &[Vec<f64>], coalitions: &[u64]) -> Vec<f64> {
        (**self).coalition_values(x, background, coalitions)
    }
}

/// Adapts a closure over encoded vectors.
pub struct FnPredictor<F>(pub F);

impl<F: Fn(&[f64]) -> f64> Predictor for FnPredictor<F> {
    fn predict_one(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

pub fn hybrid(x: &[f64], b: &[f64], coalition: u64) -> Vec<f64> {
    x.iter()
        .zip(b)
        .enumerate()
        .map(|(j, (&xv, &bv))| if coalition >> j & 1 == 1 { xv } else { bv })
        .collect()
}

pub fn brute_force_coalition_values<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &[Vec<f64>],
    coalitions: &[u64],
) -> Vec<f64> {
    let nb = background.len() as f64;
    coalitions
        .iter()
        .map(|&s| {
            background
                .iter()
                .map(|b| model.predict_one(&hybrid(x, b, s)))
                .sum::<f64>()
                / nb
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight `(m-1) / (C(m,s) s (m-s))` for a coalition of
/// size `s`; defined only for `0 < s < m`.
pub fn shapley_kernel_weight(m: usize, s: usize) -> Result<f64> {
    if s == 0 || s >= m {
        return Err(ExplainError::InvalidConfig(format!(
            "kernel weight undefined for coalition size {s} of {m}"
        )));
    }
    Ok((m - 1) as f64 / (binomial(m, s) * s as f64 * (m - s) as f64))
}

fn check_background(x: &[f64], background: &[Vec<f64>]) -> Result<()> {
    if x.is_empty() {
        return Err(ExplainError::NoFeatures);
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    if let Some(b) = background.iter().find(|b| b.len() != x.len()) {
        return Err(ExplainError::Dimension {
            expected: x.len(),
            found: b.len(),
        });
    }
    Ok(())
}
