use super::{
    binomial, check_background, hybrid, AdditiveExplanation, ExplainError, Method, Predictor,
    Result,
};

pub const EXACT_SHAPLEY_MAX_FEATURES: usize = 20;

/// Shapley values by enumerating every coalition:
/// `phi_j = Σ_{S ∌ j} |S|! (m-|S|-1)! / m! · (v(S ∪ {j}) - v(S))`.
///
/// Coalition values are always computed by direct evaluation of hybrid
/// instances, never through [`Predictor::coalition_values`], so this stays
/// independent of any model-specific shortcut.
pub fn exact_shapley<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &[Vec<f64>],
) -> Result<AdditiveExplanation> {
    check_background(x, background)?;
    let m = x.len();
    if m > EXACT_SHAPLEY_MAX_FEATURES {
        return Err(ExplainError::TooManyFeatures {
            features: m,
            limit: EXACT_SHAPLEY_MAX_FEATURES,
        });
    }
    let nb = background.len() as f64;
    let v: Vec<f64> = (0..1u64 << m)
        .map(|s| {
            background
                .iter()
                .map(|b| model.predict_one(&hybrid(x, b, s)))
                .sum::<f64>()
                / nb
        })
        .collect();
    // |S|!(m-|S|-1)!/m! = 1 / (m * C(m-1, |S|))
    let weight: Vec<f64> = (0..m)
        .map(|s| 1.0 / (m as f64 * binomial(m - 1, s)))
        .collect();
    let mut phi = vec![0.0; m];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << j;
        *p = (0..1u64 << m)
            .filter(|s| s & bit == 0)
            .map(|s| weight[s.count_ones() as usize] * (v[(s | bit) as usize] - v[s as usize]))
            .sum();
    }
    Ok(AdditiveExplanation::new(
        Method::ExactShapley,
        v[0],
        phi,
        model.predict_one(x),
    ))
}
