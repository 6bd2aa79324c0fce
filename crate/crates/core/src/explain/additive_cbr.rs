use super::{AdditiveExplanation, ExplainError, Method, Result};

pub const ADDITIVE_CBR_EPSILON: f64 = 1e-9;

/// Rescales a CBR prediction into per-feature contributions
/// `phi_j = gamma * x_j * w_j` with `gamma = prediction / Σ x_j w_j`, so the
/// contributions sum to the prediction and `phi0 = 0`.
pub fn additive_cbr(
    prediction: f64,
    x_encoded: &[f64],
    weights: &[f64],
) -> Result<AdditiveExplanation> {
    if x_encoded.is_empty() {
        return Err(ExplainError::NoFeatures);
    }
    if x_encoded.len() != weights.len() {
        return Err(ExplainError::Dimension {
            expected: weights.len(),
            found: x_encoded.len(),
        });
    }
    let factors: Vec<f64> = x_encoded.iter().zip(weights).map(|(x, w)| x * w).collect();
    let denominator: f64 = factors.iter().sum();
    if !(denominator.abs() >= ADDITIVE_CBR_EPSILON) {
        return Err(ExplainError::UndefinedMultiplier { denominator });
    }
    let gamma = prediction / denominator;
    let phi = factors.iter().map(|f| gamma * f).collect();
    Ok(AdditiveExplanation::new(
        Method::AdditiveCbr,
        0.0,
        phi,
        prediction,
    ))
}
