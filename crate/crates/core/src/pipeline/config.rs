use super::{PipelineError, Result};
use crate::dataset::{FeatureSchema, GeneratorConfig, SplitSpec};
use crate::explain::CoalitionBudget;
use crate::gbdt::GbdtHyperparams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Csv { csv: PathBuf, schema: PathBuf },
    Synthetic(GeneratorConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub split: u64,
    pub gbdt: u64,
    pub shap: u64,
    pub lime: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapSettings {
    #[serde(default = "default_background")]
    pub background_size: usize,
    #[serde(default = "default_budget")]
    pub budget: CoalitionBudget,
}

fn default_background() -> usize {
    100
}

fn default_budget() -> CoalitionBudget {
    CoalitionBudget::Full
}

impl Default for ShapSettings {
    fn default() -> Self {
        ShapSettings {
            background_size: default_background(),
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimeSettings {
    #[serde(default = "default_lime_samples")]
    pub num_samples: usize,
    #[serde(default)]
    pub kernel_width: Option<f64>,
    #[serde(default = "default_ridge")]
    pub ridge_penalty: f64,
}

fn default_lime_samples() -> usize {
    1000
}

fn default_ridge() -> f64 {
    1e-3
}

impl Default for LimeSettings {
    fn default() -> Self {
        LimeSettings {
            num_samples: default_lime_samples(),
            kernel_width: None,
            ridge_penalty: default_ridge(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSettings {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Explains the first `max_instances` test rows; all of them when absent.
    #[serde(default)]
    pub max_instances: Option<usize>,
}

fn default_true() -> bool {
    true
}

impl Default for ExplainSettings {
    fn default() -> Self {
        ExplainSettings {
            enabled: true,
            max_instances: None,
        }
    }
}

fn default_k() -> usize {
    crate::cbr::DEFAULT_K
}

fn default_fractions() -> Vec<f64> {
    vec![0.64, 0.43]
}

fn default_bin_width() -> f64 {
    10.0
}

fn default_thresholds() -> Vec<f64> {
    vec![2.0, 5.0]
}

/// A complete, reproducible run description.
///
/// The `seed` fields inside `gbdt` are ignored; `seeds.gbdt` is used instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub out_dir: PathBuf,
    pub split: SplitSpec,
    pub seeds: Seeds,
    #[serde(default)]
    pub gbdt: GbdtHyperparams,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub shap: ShapSettings,
    #[serde(default)]
    pub lime: LimeSettings,
    #[serde(default)]
    pub explain: ExplainSettings,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub weight_overrides: BTreeMap<String, f64>,
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::Validation(msg.into())
}

impl RunConfig {
    /// Parses a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Csv { csv, schema } = &mut self.data {
            join(csv);
            join(schema);
        }
        join(&mut self.out_dir);
    }

    /// Merges a JSON object of `{feature: weight}` into the overrides.
    pub fn add_weight_overrides_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            invalid(format!(
                "cannot read weight overrides {}: {e}",
                path.display()
            ))
        })?;
        let map: BTreeMap<String, f64> = serde_json::from_str(&text)
            .map_err(|e| invalid(format!("weight overrides {}: {e}", path.display())))?;
        self.weight_overrides.extend(map);
        Ok(())
    }

    /// Hyperparameters with the run's GBDT seed applied.
    pub fn gbdt_params(&self) -> GbdtHyperparams {
        GbdtHyperparams {
            seed: self.seeds.gbdt,
            ..self.gbdt.clone()
        }
    }

    /// Checks everything that can be checked without training. Returns the
    /// feature schema of the data source.
    pub fn validate(&self) -> Result<FeatureSchema> {
        let schema = match &self.data {
            DataSource::Csv { csv, schema } => {
                if !csv.is_file() {
                    return Err(invalid(format!("data file {} not found", csv.display())));
                }
                if !schema.is_file() {
                    return Err(invalid(format!(
                        "schema file {} not found",
                        schema.display()
                    )));
                }
                FeatureSchema::from_json_file(schema).map_err(|e| invalid(e.to_string()))?
            }
            DataSource::Synthetic(g) => {
                if g.n < 2 {
                    return Err(invalid("synthetic n must be at least 2"));
                }
                let probe = GeneratorConfig { n: 1, ..g.clone() };
                crate::dataset::generate_synthetic(&probe)
                    .map_err(|e| invalid(e.to_string()))?
                    .dataset
                    .schema
            }
        };
        if let SplitSpec::Fraction { train_fraction } = self.split {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(invalid(format!(
                    "train_fraction {train_fraction} outside (0, 1)"
                )));
            }
        }
        self.gbdt_params()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if self.shap.background_size == 0 {
            return Err(invalid("shap.background_size must be at least 1"));
        }
        let m = schema.len();
        if let CoalitionBudget::Samples(b) = self.shap.budget {
            if b < 2 * m + 2 {
                return Err(invalid(format!(
                    "shap.budget {b} below 2m+2 = {}",
                    2 * m + 2
                )));
            }
        }
        if self.lime.num_samples < m + 2 {
            return Err(invalid(format!("lime.num_samples below m+2 = {}", m + 2)));
        }
        if let Some(w) = self.lime.kernel_width {
            if !(w > 0.0) {
                return Err(invalid("lime.kernel_width must be positive"));
            }
        }
        if !(self.lime.ridge_penalty >= 0.0) {
            return Err(invalid("lime.ridge_penalty must be non-negative"));
        }
        if self.explain.max_instances == Some(0) {
            return Err(invalid("explain.max_instances must be at least 1"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(invalid(format!("subset fraction {f} outside (0, 1)")));
        }
        if !(self.bin_width > 0.0) {
            return Err(invalid("bin_width must be positive"));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(**t > 0.0)) {
            return Err(invalid(format!("threshold {t} must be positive")));
        }
        for (name, w) in &self.weight_overrides {
            if schema.index_of(name).is_none() {
                return Err(invalid(format!(
                    "weight override for unknown feature '{name}'"
                )));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(invalid(format!(
                    "weight override for '{name}' must be non-negative"
                )));
            }
        }
        Ok(schema)
    }

    /// SHA-256 of the canonical JSON form, hex encoded. The output
    /// directory is left out: it does not influence any result.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("out_dir");
        }
        let canonical = value.to_string();
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
