//! Tabular regression data: schema, typed rows, CSV ingestion, range
//! normalization, splitting and a synthetic flight-delay generator.

mod encode;
mod split;
mod synthetic;

pub use encode::{compute_ranges, encode_instance, EncodedInstance, FeatureRange, FeatureRanges};
pub use split::{split, split_indices, SplitSpec};
pub use synthetic::{
    generate_synthetic, GeneratedData, GeneratorConfig, GroundTruth, DOMINANT_FEATURE,
};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("{path}: file is empty")]
    EmptyFile { path: String },
    #[error("missing column '{column}' in header")]
    MissingColumn { column: String },
    #[error("row {row}, column '{column}': missing value")]
    MissingValue { row: usize, column: String },
    #[error("row {row}, column '{column}': cannot parse '{value}' as {expected}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },
    #[error("row {row}, column '{column}': value {value} outside declared range [{min}, {max}]")]
    OutOfRange {
        row: usize,
        column: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("dataset must contain at least one row")]
    Empty,
    #[error("instance has {found} values, schema expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("feature '{feature}': value {value} does not match kind {kind}")]
    KindMismatch {
        feature: String,
        value: String,
        kind: FeatureKind,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Binary,
    Categorical,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureKind::Numeric => "numeric",
            FeatureKind::Binary => "binary",
            FeatureKind::Categorical => "categorical",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Declared `(min, max)` for numeric features; values outside it are
    /// rejected at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        FeatureSpec {
            name: name.into(),
            kind,
            range: None,
        }
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Self {
        self.range = Some((min, max));
        self
    }
}

/// Ordered feature declarations plus the target column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    #[serde(rename = "target")]
    pub target_name: String,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>, target_name: impl Into<String>) -> Result<Self> {
        let schema = FeatureSchema {
            features,
            target_name: target_name.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let schema: FeatureSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_name.trim().is_empty() {
            return Err(DatasetError::InvalidSchema("target name is empty".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if f.name.trim().is_empty() {
                return Err(DatasetError::InvalidSchema("feature name is empty".into()));
            }
            if !seen.insert(f.name.as_str()) || f.name == self.target_name {
                return Err(DatasetError::InvalidSchema(format!(
                    "duplicate column name '{}'",
                    f.name
                )));
            }
            if let Some((lo, hi)) = f.range {
                if f.kind != FeatureKind::Numeric {
                    return Err(DatasetError::InvalidSchema(format!(
                        "feature '{}': ranges are only allowed on numeric features",
                        f.name
                    )));
                }
                if !(lo < hi) {
                    return Err(DatasetError::InvalidSchema(format!(
                        "feature '{}': declared range requires min < max, got ({lo}, {hi})",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

/// A single cell. Binary features are stored as `Num(0.0)` / `Num(1.0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<Value>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset after checking every row against the schema.
    pub fn new(schema: FeatureSchema, rows: Vec<Vec<Value>>, targets: Vec<f64>) -> Result<Self> {
        schema.validate()?;
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        if rows.len() != targets.len() {
            return Err(DatasetError::InvalidSchema(format!(
                "{} rows but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        for row in &rows {
            check_instance(&schema, row)?;
        }
        Ok(Dataset {
            schema,
            rows,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(DatasetError::Empty);
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.schema.names();
        header.push(self.schema.target_name.clone());
        w.write_record(&header)?;
        for (row, y) in self.rows.iter().zip(&self.targets) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(())
    }
}

/// Checks arity and per-kind value types of one instance.
pub fn check_instance(schema: &FeatureSchema, row: &[Value]) -> Result<()> {
    if row.len() != schema.len() {
        return Err(DatasetError::Arity {
            expected: schema.len(),
            found: row.len(),
        });
    }
    for (spec, v) in schema.features.iter().zip(row) {
        let ok = match (spec.kind, v) {
            (FeatureKind::Numeric, Value::Num(x)) => x.is_finite(),
            (FeatureKind::Binary, Value::Num(x)) => *x == 0.0 || *x == 1.0,
            (FeatureKind::Categorical, Value::Cat(_)) => true,
            _ => false,
        };
        if !ok {
            return Err(DatasetError::KindMismatch {
                feature: spec.name.clone(),
                value: v.to_string(),
                kind: spec.kind,
            });
        }
    }
    Ok(())
}

/// Reads a headed, comma-separated file. Rows are numbered from 1 (the
/// first data row after the header).
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
    schema.validate()?;
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(DatasetError::EmptyFile {
            path: path.display().to_string(),
        });
    }
    let position = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DatasetError::MissingColumn {
                column: name.to_string(),
            })
    };
    let cols: Vec<usize> = schema
        .features
        .iter()
        .map(|f| position(&f.name))
        .collect::<Result<_>>()?;
    let target_col = position(&schema.target_name)?;

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row_no = i + 1;
        if rec.len() != header.len() {
            return Err(DatasetError::RowWidth {
                row: row_no,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let mut row = Vec::with_capacity(cols.len());
        for (spec, &c) in schema.features.iter().zip(&cols) {
            row.push(parse_cell(&rec[c], row_no, spec)?);
        }
        let target = parse_number(&rec[target_col], row_no, &schema.target_name)?;
        rows.push(row);
        targets.push(target);
    }
    if rows.is_empty() {
        return Err(DatasetError::EmptyFile {
            path: path.display().to_string(),
        });
    }
    Ok(Dataset {
        schema: schema.clone(),
        rows,
        targets,
    })
}

fn parse_number(raw: &str, row: usize, column: &str) -> Result<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(DatasetError::MissingValue {
            row,
            column: column.to_string(),
        });
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DatasetError::Parse {
            row,
            column: column.to_string(),
            value: s.to_string(),
            expected: "number",
        }),
    }
}

fn parse_cell(raw: &str, row: usize, spec: &FeatureSpec) -> Result<Value> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(DatasetError::MissingValue {
            row,
            column: spec.name.clone(),
        });
    }
    match spec.kind {
        FeatureKind::Numeric => {
            let v = parse_number(s, row, &spec.name)?;
            if let Some((min, max)) = spec.range {
                if v < min || v > max {
                    return Err(DatasetError::OutOfRange {
                        row,
                        column: spec.name.clone(),
                        value: v,
                        min,
                        max,
                    });
                }
            }
            Ok(Value::Num(v))
        }
        FeatureKind::Binary => match s {
            "0" | "0.0" | "false" | "False" => Ok(Value::Num(0.0)),
            "1" | "1.0" | "true" | "True" => Ok(Value::Num(1.0)),
            _ => Err(DatasetError::Parse {
                row,
                column: spec.name.clone(),
                value: s.to_string(),
                expected: "binary 0/1",
            }),
        },
        FeatureKind::Categorical => Ok(Value::Cat(s.to_string())),
    }
}
