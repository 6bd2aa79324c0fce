use super::{check_instance, Dataset, DatasetError, FeatureKind, FeatureSchema, Result, Value};
use serde::{Deserialize, Serialize};

/// Observed training-data range of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureRange {
    Numeric {
        min: f64,
        max: f64,
        constant: bool,
    },
    Binary,
    /// Categories in first-appearance order; the position is the ordinal code.
    Categorical {
        categories: Vec<String>,
    },
}

impl FeatureRange {
    pub fn is_constant(&self) -> bool {
        match self {
            FeatureRange::Numeric { constant, .. } => *constant,
            FeatureRange::Binary => false,
            FeatureRange::Categorical { categories } => categories.len() <= 1,
        }
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        match self {
            FeatureRange::Categorical { categories } => categories.iter().position(|c| c == label),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges {
    pub ranges: Vec<FeatureRange>,
}

impl FeatureRanges {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Indices of features flagged constant on the training data.
    pub fn constant_features(&self) -> Vec<usize> {
        self.ranges
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_constant())
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn compute_ranges(train: &Dataset) -> FeatureRanges {
    let ranges = train
        .schema
        .features
        .iter()
        .enumerate()
        .map(|(j, spec)| match spec.kind {
            FeatureKind::Numeric => {
                let (min, max) = train
                    .rows
                    .iter()
                    .filter_map(|r| r[j].as_num())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                FeatureRange::Numeric {
                    min,
                    max,
                    constant: max == min,
                }
            }
            FeatureKind::Binary => FeatureRange::Binary,
            FeatureKind::Categorical => {
                let mut categories: Vec<String> = Vec::new();
                for r in &train.rows {
                    if let Some(c) = r[j].as_cat() {
                        if !categories.iter().any(|k| k == c) {
                            categories.push(c.to_string());
                        }
                    }
                }
                FeatureRange::Categorical { categories }
            }
        })
        .collect();
    FeatureRanges { ranges }
}

/// An instance mapped into `[0, 1]^m`. `unseen[j]` marks a categorical
/// label that never appeared in training; its value is 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    pub values: Vec<f64>,
    pub unseen: Vec<bool>,
}

impl EncodedInstance {
    pub fn has_unseen(&self) -> bool {
        self.unseen.iter().any(|&u| u)
    }
}

pub fn encode_instance(
    schema: &FeatureSchema,
    x: &[Value],
    ranges: &FeatureRanges,
) -> Result<EncodedInstance> {
    check_instance(schema, x)?;
    if ranges.len() != x.len() {
        return Err(DatasetError::Arity {
            expected: ranges.len(),
            found: x.len(),
        });
    }
    let mut values = Vec::with_capacity(x.len());
    let mut unseen = vec![false; x.len()];
    for (j, (v, range)) in x.iter().zip(&ranges.ranges).enumerate() {
        let e = match (range, v) {
            (FeatureRange::Numeric { min, max, constant }, Value::Num(v)) => {
                if *constant {
                    0.0
                } else {
                    ((v - min) / (max - min)).clamp(0.0, 1.0)
                }
            }
            (FeatureRange::Binary, Value::Num(v)) => *v,
            (FeatureRange::Categorical { categories }, Value::Cat(label)) => {
                match categories.iter().position(|c| c == label) {
                    Some(_) if categories.len() == 1 => 0.0,
                    Some(idx) => idx as f64 / (categories.len() - 1) as f64,
                    None => {
                        unseen[j] = true;
                        1.0
                    }
                }
            }
            _ => {
                return Err(DatasetError::KindMismatch {
                    feature: schema.features[j].name.clone(),
                    value: v.to_string(),
                    kind: schema.features[j].kind,
                })
            }
        };
        values.push(e);
    }
    Ok(EncodedInstance { values, unseen })
}
