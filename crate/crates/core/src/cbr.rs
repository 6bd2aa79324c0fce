//! Case-based regression with a globally weighted Euclidean distance.
//!
//! Local distances are symbolic (0 on match, 1 otherwise) for binary and
//! categorical features and range-normalized absolute differences for
//! numeric ones. The aggregate is `sqrt(Σ w_j d_j²)` with weights summing
//! to one, so every case distance lies in `[0, 1]`.

use crate::dataset::{
    check_instance, compute_ranges, Dataset, DatasetError, FeatureKind, FeatureRange,
    FeatureRanges, FeatureSchema, Value,
};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use thiserror::Error;

pub const CASE_BASE_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Error)]
pub enum CbrError {
    #[error("k = {k} exceeds the {eligible} eligible cases")]
    KTooLarge { k: usize, eligible: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("unknown feature '{0}' in weight override")]
    UnknownFeature(String),
    #[error("case index {0} out of range")]
    BadIndex(usize),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error("unsupported case-base format version {0}")]
    FormatVersion(u32),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CbrError>;

/// Distance in `[0, 1]` between two values of one feature.
pub fn local_distance(kind: FeatureKind, a: &Value, b: &Value, range: &FeatureRange) -> f64 {
    match (kind, a, b) {
        (FeatureKind::Numeric, Value::Num(a), Value::Num(b)) => match range {
            FeatureRange::Numeric { min, max, constant } if !constant => {
                ((a - b).abs() / (max - min)).clamp(0.0, 1.0)
            }
            _ => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
        },
        _ => {
            if a == b {
                0.0
            } else {
                1.0
            }
        }
    }
}

/// Weighted Euclidean distance between two instances.
pub fn case_distance(
    schema: &FeatureSchema,
    x: &[Value],
    q: &[Value],
    weights: &[f64],
    ranges: &FeatureRanges,
) -> f64 {
    let s: f64 = schema
        .features
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let d = local_distance(spec.kind, &x[j], &q[j], &ranges.ranges[j]);
            weights[j] * d * d
        })
        .sum();
    s.sqrt().min(1.0)
}

/// Pre-resolved cell: numeric value or category code.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Key {
    Num(f64),
    Cat(u32),
}

const UNSEEN: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
enum Scale {
    /// `max - min`
    Range(f64),
    Symbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub values: Vec<Value>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub targets: Vec<f64>,
    pub k: usize,
}

impl Retrieval {
    pub fn mean_target(&self) -> f64 {
        self.targets.iter().sum::<f64>() / self.k as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseBase {
    pub format_version: u32,
    pub schema: FeatureSchema,
    pub ranges: FeatureRanges,
    pub weights: Vec<f64>,
    pub cases: Vec<Case>,
    #[serde(skip)]
    keys: Vec<Vec<Key>>,
    #[serde(skip)]
    scales: Vec<Scale>,
}

impl PartialEq for CaseBase {
    fn eq(&self, other: &Self) -> bool {
        self.format_version == other.format_version
            && self.schema == other.schema
            && self.ranges == other.ranges
            && self.weights == other.weights
            && self.cases == other.cases
    }
}

fn normalize_weights(raw: &[f64], m: usize) -> Result<Vec<f64>> {
    if raw.len() != m {
        return Err(CbrError::InvalidWeights(format!(
            "expected {m} weights, got {}",
            raw.len()
        )));
    }
    if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(CbrError::InvalidWeights(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(CbrError::InvalidWeights("all weights are zero".into()));
    }
    // already-normalized vectors are kept bit-for-bit
    if (total - 1.0).abs() <= 1e-12 {
        Ok(raw.to_vec())
    } else {
        Ok(raw.iter().map(|w| w / total).collect())
    }
}

impl CaseBase {
    /// Stores `train` as the case base. Ranges come from `train`; weights
    /// are normalized to sum to one unless they already do within 1e-12.
    pub fn new(train: &Dataset, weights: &[f64]) -> Result<Self> {
        let weights = normalize_weights(weights, train.n_features())?;
        let cases = train
            .rows
            .iter()
            .zip(&train.targets)
            .map(|(values, &target)| Case {
                values: values.clone(),
                target,
            })
            .collect();
        let mut cb = CaseBase {
            format_version: CASE_BASE_FORMAT_VERSION,
            schema: train.schema.clone(),
            ranges: compute_ranges(train),
            weights,
            cases,
            keys: Vec::new(),
            scales: Vec::new(),
        };
        cb.prepare()?;
        Ok(cb)
    }

    fn prepare(&mut self) -> Result<()> {
        self.scales = self
            .ranges
            .ranges
            .iter()
            .map(|r| match r {
                FeatureRange::Numeric { min, max, constant } if !constant => {
                    Scale::Range(max - min)
                }
                _ => Scale::Symbolic,
            })
            .collect();
        let mut keys = Vec::with_capacity(self.cases.len());
        for c in &self.cases {
            keys.push(self.keys_for(&c.values)?);
        }
        self.keys = keys;
        Ok(())
    }

    fn keys_for(&self, q: &[Value]) -> Result<Vec<Key>> {
        check_instance(&self.schema, q)?;
        Ok(q.iter()
            .zip(&self.ranges.ranges)
            .map(|(v, r)| match v {
                Value::Num(x) => Key::Num(*x),
                Value::Cat(c) => Key::Cat(r.category_index(c).map_or(UNSEEN, |i| i as u32)),
            })
            .collect())
    }

    fn key_distance(&self, a: &[Key], b: &[Key]) -> f64 {
        let mut s = 0.0;
        for j in 0..a.len() {
            let d = match (a[j], b[j], self.scales[j]) {
                (Key::Num(x), Key::Num(y), Scale::Range(span)) => {
                    ((x - y).abs() / span).clamp(0.0, 1.0)
                }
                (Key::Cat(x), Key::Cat(y), _) if x == y && x != UNSEEN => 0.0,
                (Key::Num(x), Key::Num(y), Scale::Symbolic) if x == y => 0.0,
                _ => 1.0,
            };
            s += self.weights[j] * d * d;
        }
        s.sqrt().min(1.0)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.cases.iter().map(|c| c.target).collect()
    }

    /// Distance from case `i` to query `q`.
    pub fn distance_to(&self, i: usize, q: &[Value]) -> Result<f64> {
        let qk = self.keys_for(q)?;
        let ck = self.keys.get(i).ok_or(CbrError::BadIndex(i))?;
        Ok(self.key_distance(ck, &qk))
    }

    /// The `k` least distant cases, ties broken by lower case index.
    pub fn retrieve(&self, q: &[Value], k: usize, exclude: Option<usize>) -> Result<Retrieval> {
        let qk = self.keys_for(q)?;
        self.retrieve_keys(&qk, k, exclude)
    }

    fn retrieve_keys(&self, qk: &[Key], k: usize, exclude: Option<usize>) -> Result<Retrieval> {
        if k == 0 {
            return Err(CbrError::ZeroK);
        }
        let mut scored: Vec<(f64, usize)> = self
            .keys
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, ck)| (self.key_distance(ck, qk), i))
            .collect();
        if k > scored.len() {
            return Err(CbrError::KTooLarge {
                k,
                eligible: scored.len(),
            });
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(Retrieval {
            indices: scored.iter().map(|s| s.1).collect(),
            distances: scored.iter().map(|s| s.0).collect(),
            targets: scored.iter().map(|s| self.cases[s.1].target).collect(),
            k,
        })
    }

    /// Mean target of the `k` nearest cases.
    pub fn predict(&self, q: &[Value], k: usize) -> Result<f64> {
        Ok(self.retrieve(q, k, None)?.mean_target())
    }

    /// Prediction for every stored case with that case held out.
    pub fn loo_predictions(&self, k: usize) -> Result<Vec<f64>> {
        if self.len() < k + 1 {
            return Err(CbrError::KTooLarge {
                k,
                eligible: self.len().saturating_sub(1),
            });
        }
        (0..self.len())
            .map(|i| Ok(self.retrieve_keys(&self.keys[i], k, Some(i))?.mean_target()))
            .collect()
    }

    /// New case base with raw weight edits applied by feature name, then
    /// re-normalized.
    pub fn override_weights(&self, edits: &BTreeMap<String, f64>) -> Result<CaseBase> {
        let mut raw = self.weights.clone();
        for (name, &w) in edits {
            let j = self
                .schema
                .index_of(name)
                .ok_or_else(|| CbrError::UnknownFeature(name.clone()))?;
            raw[j] = w;
        }
        let total: f64 = raw.iter().sum();
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !(total > 0.0) {
            return Err(CbrError::InvalidWeights(
                "overrides must leave non-negative weights with a positive sum".into(),
            ));
        }
        let mut cb = self.clone();
        cb.weights = raw.iter().map(|w| w / total).collect();
        Ok(cb)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut cb: CaseBase = serde_json::from_str(text)?;
        if cb.format_version != CASE_BASE_FORMAT_VERSION {
            return Err(CbrError::FormatVersion(cb.format_version));
        }
        let m = cb.schema.len();
        normalize_weights(&cb.weights, m)?;
        if cb.ranges.len() != m {
            return Err(CbrError::InvalidWeights(
                "range count does not match schema".into(),
            ));
        }
        cb.prepare()?;
        Ok(cb)
    }
}
