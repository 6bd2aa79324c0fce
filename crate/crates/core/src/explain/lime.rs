//! Tabular LIME on encoded features.
//!
//! Perturbations are drawn around the explained instance (numeric: Gaussian
//! with the training standard deviation; binary/categorical: resampled from
//! the training marginal), weighted by an exponential kernel on Euclidean
//! distance, and fitted with ridge-regularized weighted least squares. The
//! attribution of feature `j` is `coefficient_j * x_j`.

use super::{AdditiveExplanation, ExplainError, Method, Predictor, Result};
use crate::dataset::FeatureKind;
use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureStats {
    Numeric {
        mean: f64,
        std: f64,
    },
    /// Distinct encoded values with their training frequencies.
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub features: Vec<FeatureStats>,
}

impl TrainStats {
    pub fn from_encoded(kinds: &[FeatureKind], rows: &[Vec<f64>]) -> Self {
        let n = rows.len().max(1) as f64;
        let features = kinds
            .iter()
            .enumerate()
            .map(|(j, kind)| match kind {
                FeatureKind::Numeric => {
                    let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                    let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                    FeatureStats::Numeric {
                        mean,
                        std: var.sqrt(),
                    }
                }
                FeatureKind::Binary | FeatureKind::Categorical => {
                    let mut values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    values.sort_by(f64::total_cmp);
                    values.dedup();
                    let probs = values
                        .iter()
                        .map(|v| rows.iter().filter(|r| r[j] == *v).count() as f64 / n)
                        .collect();
                    FeatureStats::Discrete { values, probs }
                }
            })
            .collect();
        TrainStats { features }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimeConfig {
    pub num_samples: usize,
    /// Defaults to `0.75 * sqrt(m)` when absent.
    #[serde(default)]
    pub kernel_width: Option<f64>,
    #[serde(default = "default_ridge")]
    pub ridge_penalty: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_ridge() -> f64 {
    1e-3
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            num_samples: 1000,
            kernel_width: None,
            ridge_penalty: default_ridge(),
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn kernel_width_for(&self, m: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (m as f64).sqrt())
    }
}

pub fn lime_explain<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    stats: &TrainStats,
    cfg: &LimeConfig,
) -> Result<AdditiveExplanation> {
    let m = x.len();
    if m == 0 {
        return Err(ExplainError::NoFeatures);
    }
    if stats.features.len() != m {
        return Err(ExplainError::Dimension {
            expected: m,
            found: stats.features.len(),
        });
    }
    if cfg.num_samples < m + 2 {
        return Err(ExplainError::InvalidConfig(format!(
            "num_samples {} below m+2 = {}",
            cfg.num_samples,
            m + 2
        )));
    }
    let width = cfg.kernel_width_for(m);
    if !(width > 0.0) || !(cfg.ridge_penalty >= 0.0) {
        return Err(ExplainError::InvalidConfig(
            "kernel_width must be positive and ridge_penalty non-negative".into(),
        ));
    }

    let mut samplers = Vec::with_capacity(m);
    for s in &stats.features {
        samplers.push(match s {
            FeatureStats::Discrete { probs, .. } => Some(
                WeightedIndex::new(probs)
                    .map_err(|e| ExplainError::InvalidConfig(format!("bad marginal: {e}")))?,
            ),
            FeatureStats::Numeric { .. } => None,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(cfg.num_samples);
    samples.push(x.to_vec());
    while samples.len() < cfg.num_samples {
        let z: Vec<f64> = (0..m)
            .map(|j| match (&stats.features[j], &samplers[j]) {
                (FeatureStats::Numeric { std, .. }, _) => {
                    let eps: f64 = rng.sample(StandardNormal);
                    x[j] + std * eps
                }
                (FeatureStats::Discrete { values, .. }, Some(dist)) => values[rng.sample(dist)],
                (FeatureStats::Discrete { .. }, None) => unreachable!(),
            })
            .collect();
        samples.push(z);
    }
    let ys: Vec<f64> = samples.iter().map(|z| model.predict_one(z)).collect();
    let ws: Vec<f64> = samples
        .iter()
        .map(|z| {
            let d2: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (width * width)).exp()
        })
        .collect();

    let wsum: f64 = ws.iter().sum();
    let zbar: Vec<f64> = (0..m)
        .map(|j| samples.iter().zip(&ws).map(|(z, w)| w * z[j]).sum::<f64>() / wsum)
        .collect();
    let ybar = ys.iter().zip(&ws).map(|(y, w)| w * y).sum::<f64>() / wsum;

    let mut notes = Vec::new();
    let degenerate = samples.iter().all(|z| z == x);
    let beta: Vec<f64> = if degenerate {
        notes.push("degenerate perturbation set; coefficients set to zero".to_string());
        vec![0.0; m]
    } else {
        let mut ata = DMatrix::<f64>::zeros(m, m);
        let mut atb = DVector::<f64>::zeros(m);
        let mut zc = vec![0.0; m];
        for ((z, &y), &w) in samples.iter().zip(&ys).zip(&ws) {
            for j in 0..m {
                zc[j] = z[j] - zbar[j];
            }
            let yc = y - ybar;
            for a in 0..m {
                let wa = w * zc[a];
                atb[a] += wa * yc;
                for c in 0..m {
                    ata[(a, c)] += wa * zc[c];
                }
            }
        }
        for a in 0..m {
            ata[(a, a)] += cfg.ridge_penalty;
        }
        match ata.clone().cholesky() {
            Some(ch) => ch.solve(&atb).iter().copied().collect(),
            None => {
                notes.push("singular surrogate system; used pseudo-inverse".to_string());
                ata.svd(true, true)
                    .solve(&atb, 1e-12)
                    .map_err(|e| ExplainError::InvalidConfig(e.to_string()))?
                    .iter()
                    .copied()
                    .collect()
            }
        }
    };
    let intercept = ybar - beta.iter().zip(&zbar).map(|(b, z)| b * z).sum::<f64>();
    let phi = beta.iter().zip(x).map(|(b, v)| b * v).collect();
    let mut e = AdditiveExplanation::new(Method::Lime, intercept, phi, model.predict_one(x));
    e.notes = notes;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::FnPredictor;

    fn stats() -> TrainStats {
        let kinds = [
            FeatureKind::Numeric,
            FeatureKind::Numeric,
            FeatureKind::Binary,
            FeatureKind::Categorical,
        ];
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = i as f64 / 49.0;
                vec![t, (t * 7.0).fract(), (i % 2) as f64, (i % 3) as f64 / 2.0]
            })
            .collect();
        TrainStats::from_encoded(&kinds, &rows)
    }

    #[test]
    fn train_stats_shapes() {
        let s = stats();
        match &s.features[2] {
            FeatureStats::Discrete { values, probs } => {
                assert_eq!(values, &vec![0.0, 1.0]);
                assert_eq!(probs, &vec![0.5, 0.5]);
            }
            _ => panic!(),
        }
        match &s.features[3] {
            FeatureStats::Discrete { values, .. } => assert_eq!(values, &vec![0.0, 0.5, 1.0]),
            _ => panic!(),
        }
    }

    #[test]
    fn constant_model_has_no_attribution() {
        let f = FnPredictor(|_: &[f64]| 42.0);
        let x = [0.3, 0.6, 1.0, 0.5];
        let e = lime_explain(&f, &x, &stats(), &LimeConfig::default()).unwrap();
        assert!(e.phi.iter().all(|p| p.abs() < 1e-6), "{:?}", e.phi);
        assert!((e.phi0 - 42.0).abs() < 1e-6);
        assert_eq!(e.explained_prediction, 42.0);
    }

    #[test]
    fn single_active_feature_ranked_first() {
        let f = FnPredictor(|z: &[f64]| 5.0 * z[1]);
        let x = [0.3, 0.6, 1.0, 0.5];
        let cfg = LimeConfig {
            ridge_penalty: 0.0,
            ..Default::default()
        };
        let e = lime_explain(&f, &x, &stats(), &cfg).unwrap();
        // exact linear target: the fit recovers slope 5 on feature 1
        assert!((e.phi[1] - 5.0 * 0.6).abs() < 1e-8);
        for j in [0, 2, 3] {
            assert!(e.phi[j].abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let f = FnPredictor(|z: &[f64]| z[0] * z[1] + z[3]);
        let x = [0.3, 0.6, 1.0, 0.5];
        let cfg = LimeConfig {
            seed: 9,
            ..Default::default()
        };
        let a = lime_explain(&f, &x, &stats(), &cfg).unwrap();
        let b = lime_explain(&f, &x, &stats(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = lime_explain(&f, &x, &stats(), &LimeConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_samples_flagged() {
        let kinds = [FeatureKind::Numeric, FeatureKind::Binary];
        let rows = vec![vec![0.5, 1.0]; 10];
        let s = TrainStats::from_encoded(&kinds, &rows);
        let f = FnPredictor(|z: &[f64]| z[0] + z[1]);
        let e = lime_explain(&f, &[0.5, 1.0], &s, &LimeConfig::default()).unwrap();
        assert_eq!(e.phi, vec![0.0, 0.0]);
        assert!(!e.notes.is_empty());
        assert!((e.phi0 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_rejected() {
        let f = FnPredictor(|_: &[f64]| 0.0);
        let cfg = LimeConfig {
            num_samples: 5,
            ..Default::default()
        };
        assert!(lime_explain(&f, &[0.0; 4], &stats(), &cfg).is_err());
    }
}
