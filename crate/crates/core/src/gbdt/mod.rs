//! Second-order gradient boosted regression trees under squared-error loss.
//!
//! Features are encoded into `[0, 1]` with the training ranges before the
//! trees see them, so split thresholds live in encoded space.

mod tree;

pub use tree::{split_gain, TreeNode};

use crate::dataset::{
    compute_ranges, encode_instance, Dataset, DatasetError, FeatureRanges, FeatureSchema, Value,
};
use crate::explain::Predictor;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;
use tree::{TreeBuilder, TreeParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("invalid hyperparameter: {0}")]
    InvalidParams(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error("unsupported model format version {found} (expected {MODEL_FORMAT_VERSION})")]
    FormatVersion { found: u32 },
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GbdtError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbdtHyperparams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub n_estimators: usize,
    pub reg_lambda: f64,
    pub seed: u64,
}

impl Default for GbdtHyperparams {
    fn default() -> Self {
        GbdtHyperparams {
            learning_rate: 0.1,
            max_depth: 7,
            min_child_weight: 1.0,
            subsample: 0.5,
            colsample_bytree: 0.5,
            n_estimators: 500,
            reg_lambda: 1.0,
            seed: 0,
        }
    }
}

impl GbdtHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GbdtError::InvalidParams(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return bad("colsample_bytree must lie in (0, 1]");
        }
        if !(self.reg_lambda >= 0.0) {
            return bad("reg_lambda must be non-negative");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be non-negative");
        }
        Ok(())
    }
}

/// Normalized per-feature importance.
#[derive(Debug, Clone, PartialEq)]
pub struct Importance {
    pub weights: Vec<f64>,
    /// Set when no split was ever made and the weights fell back to `1/m`.
    pub uniform_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: u32,
    pub params: GbdtHyperparams,
    pub schema: FeatureSchema,
    pub ranges: FeatureRanges,
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
    /// Total split gain per feature.
    pub importance_raw: Vec<f64>,
    pub importance: Vec<f64>,
    pub importance_uniform_fallback: bool,
}

/// Mean squared training error before boosting and after every round.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub train_loss: Vec<f64>,
}

pub fn fit(train: &Dataset, params: &GbdtHyperparams) -> Result<GbdtModel> {
    fit_with_trace(train, params).map(|(m, _)| m)
}

pub fn fit_with_trace(train: &Dataset, params: &GbdtHyperparams) -> Result<(GbdtModel, FitTrace)> {
    params.validate()?;
    if train.is_empty() {
        return Err(GbdtError::EmptyDataset);
    }
    let ranges = compute_ranges(train);
    let rows: Vec<Vec<f64>> = train
        .rows
        .iter()
        .map(|r| encode_instance(&train.schema, r, &ranges).map(|e| e.values))
        .collect::<std::result::Result<_, _>>()?;
    let (model, trace) = fit_encoded(&rows, &train.targets, params)?;
    Ok((
        GbdtModel {
            schema: train.schema.clone(),
            ranges,
            ..model
        },
        trace,
    ))
}

/// Boosting on already-encoded rows. The returned model carries an empty
/// schema; callers that predict from raw values must fill it in.
pub fn fit_encoded(
    rows: &[Vec<f64>],
    targets: &[f64],
    params: &GbdtHyperparams,
) -> Result<(GbdtModel, FitTrace)> {
    params.validate()?;
    let n = rows.len();
    if n == 0 || targets.len() != n {
        return Err(GbdtError::EmptyDataset);
    }
    let m = rows[0].len();
    let cols: Vec<Vec<f64>> = (0..m)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let sorted: Vec<Vec<u32>> = cols
        .iter()
        .map(|c| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let builder = TreeBuilder {
        cols: &cols,
        sorted: &sorted,
        params: TreeParams {
            max_depth: params.max_depth,
            min_child_weight: params.min_child_weight,
            reg_lambda: params.reg_lambda,
            learning_rate: params.learning_rate,
        },
    };

    let base_score = targets.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base_score; n];
    let hess = vec![1.0; n];
    let mut grad = vec![0.0; n];
    let mut importance_raw = vec![0.0; m];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let loss = |pred: &[f64]| {
        pred.iter()
            .zip(targets)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / n as f64
    };
    let mut train_loss = vec![loss(&pred)];

    let n_rows = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((params.colsample_bytree * m as f64).round() as usize).clamp(1, m.max(1));
    for _ in 0..params.n_estimators {
        for i in 0..n {
            grad[i] = pred[i] - targets[i];
        }
        let row_idx: Vec<usize> = if n_rows == n {
            (0..n).collect()
        } else {
            let mut v = sample(&mut rng, n, n_rows).into_vec();
            v.sort_unstable();
            v
        };
        let feat_idx: Vec<usize> = if m == 0 {
            Vec::new()
        } else if n_cols == m {
            (0..m).collect()
        } else {
            let mut v = sample(&mut rng, m, n_cols).into_vec();
            v.sort_unstable();
            v
        };
        let tree = builder.build(&grad, &hess, &row_idx, &feat_idx, &mut importance_raw);
        for (p, r) in pred.iter_mut().zip(rows) {
            *p += tree.predict(r);
        }
        train_loss.push(loss(&pred));
        trees.push(tree);
    }

    let imp = normalize_importance(&importance_raw);
    let model = GbdtModel {
        format_version: MODEL_FORMAT_VERSION,
        params: params.clone(),
        schema: FeatureSchema {
            features: Vec::new(),
            target_name: String::new(),
        },
        ranges: FeatureRanges { ranges: Vec::new() },
        base_score,
        trees,
        importance_raw,
        importance: imp.weights,
        importance_uniform_fallback: imp.uniform_fallback,
    };
    Ok((model, FitTrace { train_loss }))
}

fn normalize_importance(raw: &[f64]) -> Importance {
    let m = raw.len();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        Importance {
            weights: raw.iter().map(|g| g / total).collect(),
            uniform_fallback: false,
        }
    } else {
        Importance {
            weights: vec![1.0 / m as f64; m],
            uniform_fallback: true,
        }
    }
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.importance.len()
    }

    pub fn predict_encoded(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn encode(&self, x: &[Value]) -> Result<Vec<f64>> {
        Ok(encode_instance(&self.schema, x, &self.ranges)?.values)
    }

    pub fn predict(&self, x: &[Value]) -> Result<f64> {
        Ok(self.predict_encoded(&self.encode(x)?))
    }

    /// Gain importance normalized to sum to one.
    pub fn feature_importance(&self) -> Importance {
        normalize_importance(&self.importance_raw)
    }

    /// Hand-assembled model, mostly for tests and tooling.
    pub fn from_parts(
        schema: FeatureSchema,
        ranges: FeatureRanges,
        base_score: f64,
        trees: Vec<TreeNode>,
    ) -> Self {
        let m = schema.len();
        let mut raw = vec![0.0; m];
        fn walk(t: &TreeNode, raw: &mut [f64]) {
            if let TreeNode::Split {
                feature,
                gain,
                left,
                right,
                ..
            } = t
            {
                raw[*feature] += gain;
                walk(left, raw);
                walk(right, raw);
            }
        }
        trees.iter().for_each(|t| walk(t, &mut raw));
        let imp = normalize_importance(&raw);
        GbdtModel {
            format_version: MODEL_FORMAT_VERSION,
            params: GbdtHyperparams {
                n_estimators: trees.len(),
                ..GbdtHyperparams::default()
            },
            schema,
            ranges,
            base_score,
            trees,
            importance_raw: raw,
            importance: imp.weights,
            importance_uniform_fallback: imp.uniform_fallback,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: GbdtModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(GbdtError::FormatVersion {
                found: model.format_version,
            });
        }
        let m = model.importance.len();
        if model.importance_raw.len() != m || model.schema.len() != m || model.ranges.len() != m {
            return Err(GbdtError::Corrupt("feature count mismatch".into()));
        }
        if let Some(f) = model.trees.iter().filter_map(|t| t.max_feature()).max() {
            if f >= m {
                return Err(GbdtError::Corrupt(format!(
                    "split feature {f} out of range"
                )));
            }
        }
        Ok(model)
    }
}

impl Predictor for GbdtModel {
    fn predict_one(&self, x: &[f64]) -> f64 {
        self.predict_encoded(x)
    }

    /// Mean over the background of hybrid predictions, computed per tree
    /// by enumerating the leaves reachable for each background row and the
    /// coalition constraints that select them.
    fn coalition_values(&self, x: &[f64], background: &[Vec<f64>], coalitions: &[u64]) -> Vec<f64> {
        if x.len() > 64 || background.is_empty() {
            return crate::explain::brute_force_coalition_values(self, x, background, coalitions);
        }
        let mut terms: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        let mut scratch = Vec::new();
        for b in background {
            for tree in &self.trees {
                scratch.clear();
                tree.hybrid_leaves(x, b, &mut scratch);
                for &(from_x, from_b, w) in &scratch {
                    *terms.entry((from_x, from_b)).or_insert(0.0) += w;
                }
            }
        }
        let terms: Vec<(u64, u64, f64)> = terms.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        let nb = background.len() as f64;
        coalitions
            .iter()
            .map(|&s| {
                let total: f64 = terms
                    .iter()
                    .filter(|(a, b, _)| a & s == *a && b & s == 0)
                    .map(|(_, _, w)| w)
                    .sum();
                self.base_score + total / nb
            })
            .collect()
    }
}
