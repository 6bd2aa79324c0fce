//! Flight-delay-like synthetic data with a known linear ground truth.
//!
//! Each feature contributes `coefficient * level` to the target, where the
//! level is `(v - min) / (max - min)` for numeric features, the 0/1 value for
//! binary ones, and `index / (K - 1)` for a categorical label in the
//! generator's category list. The previous-leg delay carries the dominant
//! coefficient.

use super::{Dataset, DatasetError, FeatureKind, FeatureSchema, FeatureSpec, Result, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DOMINANT_FEATURE: &str = "prev_leg_delay";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    /// Standard deviation of the additive Gaussian noise, in minutes.
    #[serde(default)]
    pub noise: f64,
    /// Additional weakly-informative numeric features `aux_0, aux_1, ...`.
    #[serde(default)]
    pub extra_features: usize,
    /// Per-feature coefficient overrides by name.
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
}

impl GeneratorConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        GeneratorConfig {
            n,
            seed,
            noise: 0.0,
            extra_features: 0,
            coefficients: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub intercept: f64,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Category lists for categorical features (empty for the others).
    pub categories: Vec<Vec<String>>,
    /// Feature indices by decreasing `|coefficient|`, ties by index.
    pub ranking: Vec<usize>,
    pub noise: f64,
}

impl GroundTruth {
    /// The noiseless target for one row.
    pub fn formula(&self, schema: &FeatureSchema, row: &[Value]) -> f64 {
        let mut y = self.intercept;
        for (j, spec) in schema.features.iter().enumerate() {
            y += self.coefficients[j] * level(spec, &self.categories[j], &row[j]);
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub dataset: Dataset,
    pub truth: GroundTruth,
}

enum Sampler {
    Uniform,
    Squared,
    Bernoulli(f64),
    Choice,
}

struct Template {
    spec: FeatureSpec,
    coefficient: f64,
    categories: Vec<String>,
    sampler: Sampler,
}

fn templates(extra: usize) -> Vec<Template> {
    let num = |name: &str, lo: f64, hi: f64, coefficient: f64, sampler: Sampler| Template {
        spec: FeatureSpec::new(name, FeatureKind::Numeric).with_range(lo, hi),
        coefficient,
        categories: Vec::new(),
        sampler,
    };
    let bin = |name: &str, p: f64, coefficient: f64| Template {
        spec: FeatureSpec::new(name, FeatureKind::Binary),
        coefficient,
        categories: Vec::new(),
        sampler: Sampler::Bernoulli(p),
    };
    let cat = |name: &str, cats: &[&str], coefficient: f64| Template {
        spec: FeatureSpec::new(name, FeatureKind::Categorical),
        coefficient,
        categories: cats.iter().map(|s| s.to_string()).collect(),
        sampler: Sampler::Choice,
    };
    let mut t = vec![
        num(DOMINANT_FEATURE, 0.0, 120.0, 60.0, Sampler::Squared),
        num("turnaround_buffer", 0.0, 90.0, -9.0, Sampler::Uniform),
        num("taxi_out_time", 5.0, 40.0, 6.0, Sampler::Uniform),
        num("departure_hour", 0.0, 23.0, 4.0, Sampler::Uniform),
        num("route_length", 100.0, 3000.0, 3.0, Sampler::Uniform),
        num("load_factor", 0.4, 1.0, 1.5, Sampler::Uniform),
        bin("atfm_regulated", 0.3, 10.0),
        bin("weekend", 2.0 / 7.0, 2.0),
        cat("airline", &["AX", "BY", "CZ", "DW"], 5.0),
        cat("weather", &["clear", "cloudy", "rain", "storm"], 8.0),
    ];
    for k in 0..extra {
        t.push(num(
            &format!("aux_{k}"),
            0.0,
            1.0,
            0.5 / (k + 1) as f64,
            Sampler::Uniform,
        ));
    }
    t
}

fn level(spec: &FeatureSpec, categories: &[String], v: &Value) -> f64 {
    match (spec.kind, v) {
        (FeatureKind::Numeric, Value::Num(x)) => {
            let (lo, hi) = spec.range.expect("generated numeric features carry ranges");
            (x - lo) / (hi - lo)
        }
        (FeatureKind::Binary, Value::Num(x)) => *x,
        (FeatureKind::Categorical, Value::Cat(c)) => {
            let idx = categories.iter().position(|k| k == c).unwrap_or(0);
            idx as f64 / (categories.len() - 1) as f64
        }
        _ => 0.0,
    }
}

pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<GeneratedData> {
    if cfg.n == 0 {
        return Err(DatasetError::Empty);
    }
    let mut templates = templates(cfg.extra_features);
    for (name, coef) in &cfg.coefficients {
        let t = templates
            .iter_mut()
            .find(|t| &t.spec.name == name)
            .ok_or_else(|| {
                DatasetError::InvalidSchema(format!(
                    "coefficient override for unknown feature '{name}'"
                ))
            })?;
        t.coefficient = *coef;
    }
    let schema = FeatureSchema::new(templates.iter().map(|t| t.spec.clone()).collect(), "delay")?;
    let coefficients: Vec<f64> = templates.iter().map(|t| t.coefficient).collect();
    let mut ranking: Vec<usize> = (0..coefficients.len()).collect();
    ranking.sort_by(|&a, &b| {
        coefficients[b]
            .abs()
            .total_cmp(&coefficients[a].abs())
            .then(a.cmp(&b))
    });
    let truth = GroundTruth {
        intercept: 15.0,
        feature_names: schema.names(),
        coefficients,
        categories: templates.iter().map(|t| t.categories.clone()).collect(),
        ranking,
        noise: cfg.noise,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n);
    let mut targets = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let row: Vec<Value> = templates
            .iter()
            .map(|t| match t.sampler {
                Sampler::Uniform | Sampler::Squared => {
                    let (lo, hi) = t.spec.range.unwrap();
                    let mut u: f64 = rng.random();
                    if matches!(t.sampler, Sampler::Squared) {
                        u *= u;
                    }
                    Value::Num(lo + u * (hi - lo))
                }
                Sampler::Bernoulli(p) => Value::Num(if rng.random_bool(p) { 1.0 } else { 0.0 }),
                Sampler::Choice => {
                    Value::Cat(t.categories[rng.random_range(0..t.categories.len())].clone())
                }
            })
            .collect();
        let eps: f64 = rng.sample(StandardNormal);
        let mut y = truth.formula(&schema, &row);
        if cfg.noise > 0.0 {
            y += cfg.noise * eps;
        }
        rows.push(row);
        targets.push(y);
    }
    Ok(GeneratedData {
        dataset: Dataset::new(schema, rows, targets)?,
        truth,
    })
}
