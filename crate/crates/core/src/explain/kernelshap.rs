//! Kernel SHAP: Shapley values as the solution of a weighted linear
//! regression over feature coalitions.
//!
//! `phi0` is the mean background prediction and `Σ phi = f(x) - phi0` holds
//! exactly: the last coefficient is eliminated through that constraint
//! before solving the normal equations.

use super::{
    binomial, check_background, shapley_kernel_weight, AdditiveExplanation, ExplainError, Method,
    Predictor, Result,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoalitionBudget {
    /// Every proper, non-empty coalition.
    Full,
    #[serde(untagged)]
    Samples(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapConfig {
    pub background: Vec<Vec<f64>>,
    pub budget: CoalitionBudget,
    pub seed: u64,
}

/// Seeded uniform sample of `size` rows without replacement (all rows when
/// fewer are available), kept in original order.
pub fn sample_background(rows: &[Vec<f64>], size: usize, seed: u64) -> Vec<Vec<f64>> {
    if rows.len() <= size {
        return rows.to_vec();
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), rows.len(), size).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| rows[i].clone()).collect()
}

pub fn kernelshap_explain<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    cfg: &ShapConfig,
) -> Result<AdditiveExplanation> {
    check_background(x, &cfg.background)?;
    let m = x.len();
    if m > 63 {
        return Err(ExplainError::TooManyFeatures {
            features: m,
            limit: 63,
        });
    }
    if let CoalitionBudget::Samples(b) = cfg.budget {
        if b < 2 * m + 2 {
            return Err(ExplainError::InvalidConfig(format!(
                "coalition budget {b} below the minimum 2m+2 = {}",
                2 * m + 2
            )));
        }
    }
    let fx = model.predict_one(x);
    let phi0 = cfg
        .background
        .iter()
        .map(|b| model.predict_one(b))
        .sum::<f64>()
        / cfg.background.len() as f64;
    let delta = fx - phi0;
    if m == 1 {
        return Ok(AdditiveExplanation::new(
            Method::KernelShap,
            phi0,
            vec![delta],
            fx,
        ));
    }

    let full_size = (1u64 << m) - 2;
    let coalitions = match cfg.budget {
        CoalitionBudget::Samples(b) if (b as u64) < full_size => sampled_coalitions(m, b, cfg.seed),
        _ => full_coalitions(m),
    };
    let masks: Vec<u64> = coalitions.iter().map(|c| c.0).collect();
    let values = model.coalition_values(x, &cfg.background, &masks);

    // Regress y_S - z_last * delta on (z_j - z_last), j < last.
    let k = m - 1;
    let last = k;
    let mut ata = DMatrix::<f64>::zeros(k, k);
    let mut atb = DVector::<f64>::zeros(k);
    let mut row = vec![0.0; k];
    for (&(mask, w), &v) in coalitions.iter().zip(&values) {
        let z_last = (mask >> last & 1) as f64;
        for (j, r) in row.iter_mut().enumerate() {
            *r = (mask >> j & 1) as f64 - z_last;
        }
        let target = (v - phi0) - z_last * delta;
        for a in 0..k {
            if row[a] == 0.0 {
                continue;
            }
            let wa = w * row[a];
            atb[a] += wa * target;
            for c in 0..k {
                ata[(a, c)] += wa * row[c];
            }
        }
    }
    let mut notes = Vec::new();
    let head = match ata.clone().cholesky() {
        Some(ch) => ch.solve(&atb),
        None => {
            notes.push("singular coalition system; used pseudo-inverse".to_string());
            ata.svd(true, true)
                .solve(&atb, 1e-12)
                .map_err(|e| ExplainError::InvalidConfig(e.to_string()))?
        }
    };
    let mut phi: Vec<f64> = head.iter().copied().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    let mut e = AdditiveExplanation::new(Method::KernelShap, phi0, phi, fx);
    e.notes = notes;
    Ok(e)
}

fn full_coalitions(m: usize) -> Vec<(u64, f64)> {
    (1..(1u64 << m) - 1)
        .map(|s| {
            (
                s,
                shapley_kernel_weight(m, s.count_ones() as usize).unwrap(),
            )
        })
        .collect()
}

/// Next larger integer with the same popcount.
fn next_combination(v: u64) -> u64 {
    let t = v | (v - 1);
    (t + 1) | (((!t & (!t).wrapping_neg()) - 1) >> (v.trailing_zeros() + 1))
}

fn subsets_of_size(m: usize, s: usize) -> impl Iterator<Item = u64> {
    let end = 1u64 << m;
    std::iter::successors(Some((1u64 << s) - 1), move |&v| {
        let n = next_combination(v);
        (n < end).then_some(n)
    })
}

/// Enumerates whole coalition sizes (paired with their complements) while
/// the budget allows, then samples the remaining sizes in complementary
/// pairs. Sampled coalitions share the remaining kernel mass equally.
fn sampled_coalitions(m: usize, budget: usize, seed: u64) -> Vec<(u64, f64)> {
    let all = (1u64 << m) - 1;
    let n_sizes = m / 2; // sizes 1..=n_sizes, each paired with m - s
    let paired = |s: usize| s != m - s;
    let size_mass = |s: usize| {
        let mass = (m - 1) as f64 / (s as f64 * (m - s) as f64);
        if paired(s) {
            2.0 * mass
        } else {
            mass
        }
    };
    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    let mut left = budget as f64;
    let mut first_sampled = n_sizes + 1;
    for s in 1..=n_sizes {
        let remaining_mass: f64 = (s..=n_sizes).map(size_mass).sum();
        let count = binomial(m, s) * if paired(s) { 2.0 } else { 1.0 };
        if left * size_mass(s) / remaining_mass >= count - 1e-8 {
            let w = shapley_kernel_weight(m, s).unwrap();
            for mask in subsets_of_size(m, s) {
                out.insert(mask, w);
                out.insert(all ^ mask, w);
            }
            left -= count;
        } else {
            first_sampled = s;
            break;
        }
    }
    let n_draws = left.max(0.0) as usize;
    if first_sampled <= n_sizes && n_draws > 0 {
        let sizes: Vec<usize> = (first_sampled..=n_sizes).collect();
        let masses: Vec<f64> = sizes.iter().map(|&s| size_mass(s)).collect();
        let total_mass: f64 = masses.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
        let mut drawn = 0usize;
        while drawn < n_draws {
            let mut u: f64 = rng.random::<f64>() * total_mass;
            let mut pick = sizes.len() - 1;
            for (i, &mass) in masses.iter().enumerate() {
                if u < mass {
                    pick = i;
                    break;
                }
                u -= mass;
            }
            let s = sizes[pick];
            let mut mask = 0u64;
            for j in sample(&mut rng, m, s) {
                mask |= 1 << j;
            }
            *counts.entry(mask).or_insert(0.0) += 1.0;
            *counts.entry(all ^ mask).or_insert(0.0) += 1.0;
            drawn += 2;
        }
        let per_draw = total_mass / drawn as f64;
        for (mask, c) in counts {
            *out.entry(mask).or_insert(0.0) += c * per_draw;
        }
    }
    out.into_iter().collect()
}
