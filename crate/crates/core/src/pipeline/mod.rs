//! Staged, reproducible benchmark runs.
//!
//! Each stage reads the artifacts written by earlier stages from the output
//! directory, so any stage can be re-run on its own. Every artifact carries
//! the digest of the config that produced it and a stage refuses to consume
//! artifacts from a different config.

mod config;

pub use config::{DataSource, ExplainSettings, LimeSettings, RunConfig, Seeds, ShapSettings};

use crate::cbr::CaseBase;
use crate::dataset::{
    encode_instance, generate_synthetic, load_csv, split_indices, Dataset, FeatureKind,
    FeatureSchema,
};
use crate::eval::{build_report, ErrorSummary, EvalReport, ExplanationSet, ReportInputs};
use crate::explain::{
    additive_cbr, kernelshap_explain, lime_explain, sample_background, AdditiveExplanation,
    ExplainError, LimeConfig, Method, ShapConfig, TrainStats,
};
use crate::gbdt::{fit, GbdtModel};
use serde::{Deserialize, Serialize};
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("stage '{stage}' failed: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

impl PipelineError {
    /// Process exit code: 1 for validation errors, 2 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Stage { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn stage_err<E: Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

pub const SPLIT_FILE: &str = "split.json";
pub const MODEL_FILE: &str = "gbdt_model.json";
pub const CASE_BASE_FILE: &str = "case_base.json";
pub const PREDICTIONS_FILE: &str = "predictions.json";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_MD_FILE: &str = "report.md";
pub const HISTOGRAM_FILE: &str = "error_histogram.csv";
pub const THRESHOLD_FILE: &str = "error_thresholds.csv";

pub fn explanation_file(method: Method) -> String {
    format!("explanations_{}.jsonl", method.as_str())
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<T> {
    config_digest: String,
    payload: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    /// Original row index of each test instance.
    pub test_rows: Vec<usize>,
    pub actual: Vec<f64>,
    pub gbdt: Vec<f64>,
    pub cbr: Vec<f64>,
    /// Leave-one-out CBR error on the training cases.
    pub cbr_train_loo: ErrorSummary,
}

/// One line of an explanation JSON-lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub config_digest: String,
    pub method: Method,
    /// Position within the test set.
    pub instance: usize,
    /// Original row index.
    pub row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<AdditiveExplanation>,
    /// Why no explanation exists for this instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainSummary {
    pub explained: usize,
    pub additive_cbr_excluded: usize,
}

pub struct Pipeline {
    cfg: RunConfig,
    schema: FeatureSchema,
    digest: String,
}

impl Pipeline {
    /// Validates `cfg`; nothing is written until a stage runs.
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let schema = cfg.validate()?;
        let digest = cfg.digest();
        Ok(Pipeline {
            cfg,
            schema,
            digest,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn prepare_out_dir(&self, stage: &'static str) -> Result<()> {
        std::fs::create_dir_all(&self.cfg.out_dir).map_err(stage_err(stage))?;
        let record = serde_json::json!({ "config_digest": self.digest, "config": self.cfg });
        write_text(
            stage,
            &self.path("run_config.json"),
            &pretty(stage, &record)?,
        )
    }

    fn write_artifact<T: Serialize>(
        &self,
        stage: &'static str,
        name: &str,
        payload: &T,
    ) -> Result<()> {
        let env = Envelope {
            config_digest: self.digest.clone(),
            payload,
        };
        write_text(stage, &self.path(name), &pretty(stage, &env)?)
    }

    fn read_artifact(&self, stage: &'static str, name: &str) -> Result<serde_json::Value> {
        let path = self.path(name);
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::Stage {
            stage,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let env: Envelope<serde_json::Value> =
            serde_json::from_str(&text).map_err(stage_err(stage))?;
        self.check_digest(stage, name, &env.config_digest)?;
        Ok(env.payload)
    }

    fn check_digest(&self, stage: &'static str, name: &str, found: &str) -> Result<()> {
        if found != self.digest {
            return Err(PipelineError::Stage {
                stage,
                message: format!("{name} was produced by a different config (digest {found})"),
            });
        }
        Ok(())
    }

    fn load_data(&self, stage: &'static str) -> Result<Dataset> {
        match &self.cfg.data {
            DataSource::Csv { csv, .. } => load_csv(csv, &self.schema).map_err(stage_err(stage)),
            DataSource::Synthetic(g) => generate_synthetic(g)
                .map(|d| d.dataset)
                .map_err(stage_err(stage)),
        }
    }

    fn load_split(&self, stage: &'static str) -> Result<(Dataset, SplitArtifact)> {
        let data = self.load_data(stage)?;
        let split: SplitArtifact = serde_json::from_value(self.read_artifact(stage, SPLIT_FILE)?)
            .map_err(stage_err(stage))?;
        if split
            .train
            .iter()
            .chain(&split.test)
            .any(|&i| i >= data.len())
        {
            return Err(PipelineError::Stage {
                stage,
                message: "split indices do not fit the data".into(),
            });
        }
        Ok((data, split))
    }

    fn load_model(&self, stage: &'static str) -> Result<GbdtModel> {
        let payload = self.read_artifact(stage, MODEL_FILE)?;
        GbdtModel::from_json(&payload.to_string()).map_err(stage_err(stage))
    }

    fn load_case_base(&self, stage: &'static str) -> Result<CaseBase> {
        let payload = self.read_artifact(stage, CASE_BASE_FILE)?;
        CaseBase::from_json(&payload.to_string()).map_err(stage_err(stage))
    }

    fn load_predictions(&self, stage: &'static str) -> Result<Predictions> {
        serde_json::from_value(self.read_artifact(stage, PREDICTIONS_FILE)?)
            .map_err(stage_err(stage))
    }

    /// Writes the synthetic dataset, its schema and the generating formula.
    pub fn generate(&self) -> Result<()> {
        const STAGE: &str = "generate";
        let DataSource::Synthetic(g) = &self.cfg.data else {
            return Err(PipelineError::Validation(
                "generate requires a synthetic data source".into(),
            ));
        };
        self.prepare_out_dir(STAGE)?;
        let gen = generate_synthetic(g).map_err(stage_err(STAGE))?;
        gen.dataset
            .write_csv(&self.path("data.csv"))
            .map_err(stage_err(STAGE))?;
        write_text(
            STAGE,
            &self.path("schema.json"),
            &pretty(STAGE, &gen.dataset.schema)?,
        )?;
        self.write_artifact(STAGE, "ground_truth.json", &gen.truth)
    }

    /// Splits the data and fits the gradient-boosted model.
    pub fn train_gbdt(&self) -> Result<GbdtModel> {
        const STAGE: &str = "train-gbdt";
        self.prepare_out_dir(STAGE)?;
        let data = self.load_data(STAGE)?;
        let (train, test) = split_indices(data.len(), &self.cfg.split, self.cfg.seeds.split)
            .map_err(stage_err(STAGE))?;
        let train_set = data.subset(&train).map_err(stage_err(STAGE))?;
        let model = fit(&train_set, &self.cfg.gbdt_params()).map_err(stage_err(STAGE))?;
        self.write_artifact(STAGE, SPLIT_FILE, &SplitArtifact { train, test })?;
        self.write_artifact(STAGE, MODEL_FILE, &model)?;
        Ok(model)
    }

    /// Builds the case base from the training split using the model's
    /// normalized importance as feature weights, then applies overrides.
    pub fn build_cbr(&self) -> Result<CaseBase> {
        const STAGE: &str = "build-cbr";
        self.prepare_out_dir(STAGE)?;
        let (data, split) = self.load_split(STAGE)?;
        let model = self.load_model(STAGE)?;
        let train = data.subset(&split.train).map_err(stage_err(STAGE))?;
        let mut cb =
            CaseBase::new(&train, &model.feature_importance().weights).map_err(stage_err(STAGE))?;
        if !self.cfg.weight_overrides.is_empty() {
            cb = cb
                .override_weights(&self.cfg.weight_overrides)
                .map_err(stage_err(STAGE))?;
        }
        self.write_artifact(STAGE, CASE_BASE_FILE, &cb)?;
        Ok(cb)
    }

    /// Test-set predictions from both models plus CBR leave-one-out error.
    pub fn predict(&self) -> Result<Predictions> {
        const STAGE: &str = "predict";
        self.prepare_out_dir(STAGE)?;
        let (data, split) = self.load_split(STAGE)?;
        let model = self.load_model(STAGE)?;
        let cb = self.load_case_base(STAGE)?;
        let k = self.cfg.k;
        let mut gbdt = Vec::with_capacity(split.test.len());
        let mut cbr = Vec::with_capacity(split.test.len());
        for &i in &split.test {
            let row = &data.rows[i];
            gbdt.push(model.predict(row).map_err(stage_err(STAGE))?);
            cbr.push(cb.predict(row, k).map_err(stage_err(STAGE))?);
        }
        let loo = cb.loo_predictions(k).map_err(stage_err(STAGE))?;
        let cbr_train_loo = crate::eval::mae(&cb.targets(), &loo).map_err(stage_err(STAGE))?;
        let preds = Predictions {
            actual: split.test.iter().map(|&i| data.targets[i]).collect(),
            test_rows: split.test,
            gbdt,
            cbr,
            cbr_train_loo,
        };
        self.write_artifact(STAGE, PREDICTIONS_FILE, &preds)?;
        Ok(preds)
    }

    /// kernelSHAP and LIME explanations of the GBDT predictions and additive
    /// CBR explanations of the CBR predictions, one JSON line per instance.
    pub fn explain(&self) -> Result<ExplainSummary> {
        const STAGE: &str = "explain";
        if !self.cfg.explain.enabled {
            return Err(PipelineError::Validation(
                "explanations are disabled in the config".into(),
            ));
        }
        self.prepare_out_dir(STAGE)?;
        let (data, split) = self.load_split(STAGE)?;
        let model = self.load_model(STAGE)?;
        let cb = self.load_case_base(STAGE)?;
        let preds = self.load_predictions(STAGE)?;
        if preds.test_rows != split.test {
            return Err(PipelineError::Stage {
                stage: STAGE,
                message: "predictions do not match the split".into(),
            });
        }

        let encode = |row| model.encode(row).map_err(stage_err(STAGE));
        let train_enc: Vec<Vec<f64>> = split
            .train
            .iter()
            .map(|&i| encode(&data.rows[i]))
            .collect::<Result<_>>()?;
        let seeds = self.cfg.seeds;
        let mut shap_cfg = ShapConfig {
            background: sample_background(&train_enc, self.cfg.shap.background_size, seeds.shap),
            budget: self.cfg.shap.budget,
            seed: seeds.shap,
        };
        let kinds: Vec<FeatureKind> = self.schema.features.iter().map(|f| f.kind).collect();
        let stats = TrainStats::from_encoded(&kinds, &train_enc);
        let names = self.schema.names();

        let n = self
            .cfg
            .explain
            .max_instances
            .map_or(split.test.len(), |c| c.min(split.test.len()));
        let mut shap_lines = String::new();
        let mut lime_lines = String::new();
        let mut acbr_lines = String::new();
        let mut excluded = 0;
        for pos in 0..n {
            let row_idx = split.test[pos];
            let row = &data.rows[row_idx];
            let x = encode(row)?;
            let record = |method, seed, explanation, excluded| ExplanationRecord {
                config_digest: self.digest.clone(),
                method,
                instance: pos,
                row: row_idx,
                seed,
                feature_names: names.clone(),
                explanation,
                excluded,
            };

            let shap_seed = seeds.shap.wrapping_add(pos as u64);
            shap_cfg.seed = shap_seed;
            let e = kernelshap_explain(&model, &x, &shap_cfg).map_err(stage_err(STAGE))?;
            push_line(
                STAGE,
                &mut shap_lines,
                &record(Method::KernelShap, Some(shap_seed), Some(e), None),
            )?;

            let lime_seed = seeds.lime.wrapping_add(pos as u64);
            let lime_cfg = LimeConfig {
                num_samples: self.cfg.lime.num_samples,
                kernel_width: self.cfg.lime.kernel_width,
                ridge_penalty: self.cfg.lime.ridge_penalty,
                seed: lime_seed,
            };
            let e = lime_explain(&model, &x, &stats, &lime_cfg).map_err(stage_err(STAGE))?;
            push_line(
                STAGE,
                &mut lime_lines,
                &record(Method::Lime, Some(lime_seed), Some(e), None),
            )?;

            let xc = encode_instance(&cb.schema, row, &cb.ranges).map_err(stage_err(STAGE))?;
            let rec = match additive_cbr(preds.cbr[pos], &xc.values, &cb.weights) {
                Ok(e) => record(Method::AdditiveCbr, None, Some(e), None),
                Err(err @ ExplainError::UndefinedMultiplier { .. }) => {
                    excluded += 1;
                    record(Method::AdditiveCbr, None, None, Some(err.to_string()))
                }
                Err(err) => return Err(stage_err(STAGE)(err)),
            };
            push_line(STAGE, &mut acbr_lines, &rec)?;
        }
        write_text(
            STAGE,
            &self.path(&explanation_file(Method::KernelShap)),
            &shap_lines,
        )?;
        write_text(
            STAGE,
            &self.path(&explanation_file(Method::Lime)),
            &lime_lines,
        )?;
        write_text(
            STAGE,
            &self.path(&explanation_file(Method::AdditiveCbr)),
            &acbr_lines,
        )?;
        Ok(ExplainSummary {
            explained: n,
            additive_cbr_excluded: excluded,
        })
    }

    pub fn read_explanations(&self, method: Method) -> Result<Vec<ExplanationRecord>> {
        const STAGE: &str = "evaluate";
        let name = explanation_file(method);
        let path = self.path(&name);
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::Stage {
            stage: STAGE,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let mut out = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let rec: ExplanationRecord = serde_json::from_str(line).map_err(stage_err(STAGE))?;
            self.check_digest(STAGE, &name, &rec.config_digest)?;
            if rec.method != method {
                return Err(PipelineError::Stage {
                    stage: STAGE,
                    message: format!("{name} contains a {} record", rec.method.as_str()),
                });
            }
            out.push(rec);
        }
        Ok(out)
    }

    /// Assembles the report and writes JSON, markdown and figure CSVs.
    pub fn evaluate(&self) -> Result<EvalReport> {
        const STAGE: &str = "evaluate";
        self.prepare_out_dir(STAGE)?;
        let preds = self.load_predictions(STAGE)?;
        let cb = self.load_case_base(STAGE)?;
        let names = self.schema.names();

        let explained = if self.cfg.explain.enabled {
            let shap = self.read_explanations(Method::KernelShap)?;
            let lime = self.read_explanations(Method::Lime)?;
            let acbr = self.read_explanations(Method::AdditiveCbr)?;
            let instances: Vec<usize> = shap.iter().map(|r| r.instance).collect();
            let aligned = |recs: &[ExplanationRecord]| {
                recs.len() == instances.len()
                    && recs.iter().zip(&instances).all(|(r, &i)| r.instance == i)
            };
            if !aligned(&lime) || !aligned(&acbr) {
                return Err(PipelineError::Stage {
                    stage: STAGE,
                    message: "explanation files cover different instances".into(),
                });
            }
            let required = |recs: Vec<ExplanationRecord>| -> Result<Vec<AdditiveExplanation>> {
                recs.into_iter()
                    .map(|r| {
                        r.explanation.ok_or_else(|| PipelineError::Stage {
                            stage: STAGE,
                            message: format!("missing explanation for instance {}", r.instance),
                        })
                    })
                    .collect()
            };
            Some((
                instances,
                required(shap)?,
                required(lime)?,
                acbr.into_iter().map(|r| r.explanation).collect::<Vec<_>>(),
            ))
        } else {
            None
        };

        let report = build_report(&ReportInputs {
            y_test: &preds.actual,
            gbdt_pred: &preds.gbdt,
            cbr_pred: &preds.cbr,
            cbr_train_loo: Some(preds.cbr_train_loo),
            fractions: &self.cfg.fractions,
            bin_width: self.cfg.bin_width,
            thresholds: &self.cfg.thresholds,
            feature_names: &names,
            global_weights: &cb.weights,
            explanations: explained
                .as_ref()
                .map(|(instances, shap, lime, acbr)| ExplanationSet {
                    instances,
                    shap,
                    lime,
                    additive_cbr: acbr,
                }),
        })
        .map_err(stage_err(STAGE))?;

        self.write_artifact(STAGE, REPORT_JSON_FILE, &report)?;
        write_text(STAGE, &self.path(REPORT_MD_FILE), &report.to_markdown())?;
        report
            .write_histogram_csv(&self.path(HISTOGRAM_FILE))
            .map_err(stage_err(STAGE))?;
        report
            .write_threshold_csv(&self.path(THRESHOLD_FILE))
            .map_err(stage_err(STAGE))?;
        Ok(report)
    }

    /// All stages in order.
    pub fn run(&self) -> Result<EvalReport> {
        if matches!(self.cfg.data, DataSource::Synthetic(_)) {
            self.generate()?;
        }
        self.train_gbdt()?;
        self.build_cbr()?;
        self.predict()?;
        if self.cfg.explain.enabled {
            self.explain()?;
        }
        self.evaluate()
    }
}

fn pretty<T: Serialize>(stage: &'static str, value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(stage_err(stage))?;
    s.push('\n');
    Ok(s)
}

fn push_line<T: Serialize>(stage: &'static str, buf: &mut String, value: &T) -> Result<()> {
    buf.push_str(&serde_json::to_string(value).map_err(stage_err(stage))?);
    buf.push('\n');
    Ok(())
}

fn write_text(stage: &'static str, path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| PipelineError::Stage {
        stage,
        message: format!("cannot write {}: {e}", path.display()),
    })?;
    f.write_all(text.as_bytes()).map_err(stage_err(stage))
}
