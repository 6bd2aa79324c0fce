use super::metrics::{
    abs_errors, attribution_ndcg, error_histogram, local_accuracy_report, select_most_accurate,
    subset_size, threshold_counts, Baseline, ErrorSummary, HistogramBin, ThresholdCount,
};
use super::{EvalError, Result};
use crate::explain::AdditiveExplanation;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Explanations for a set of test instances, aligned by position.
#[derive(Debug, Clone, Copy)]
pub struct ExplanationSet<'a> {
    /// Test-set positions of the explained instances.
    pub instances: &'a [usize],
    pub shap: &'a [AdditiveExplanation],
    pub lime: &'a [AdditiveExplanation],
    /// `None` where the additive CBR multiplier was undefined.
    pub additive_cbr: &'a [Option<AdditiveExplanation>],
}

#[derive(Debug, Clone, Copy)]
pub struct ReportInputs<'a> {
    pub y_test: &'a [f64],
    pub gbdt_pred: &'a [f64],
    pub cbr_pred: &'a [f64],
    pub cbr_train_loo: Option<ErrorSummary>,
    /// Subset fractions beyond the full set, e.g. `[0.64, 0.43]`.
    pub fractions: &'a [f64],
    pub bin_width: f64,
    pub thresholds: &'a [f64],
    pub feature_names: &'a [String],
    pub global_weights: &'a [f64],
    pub explanations: Option<ExplanationSet<'a>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetInfo {
    pub label: String,
    pub fraction: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    /// One summary per subset, in subset order.
    pub summaries: Vec<ErrorSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalAccuracyTable {
    pub n_explained: usize,
    pub subsets: Vec<SubsetInfo>,
    pub rows: Vec<ModelRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdcgCell {
    /// Mean per-instance nDCG; `None` if no instance contributed.
    pub mean: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub baseline: String,
    pub method: String,
    pub cells: Vec<NdcgCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub subsets: Vec<SubsetInfo>,
    pub rows: Vec<RankingRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusions {
    pub count: usize,
    pub instances: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHistogram {
    pub model: String,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelThresholds {
    pub model: String,
    pub counts: Vec<ThresholdCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_test: usize,
    pub subsets: Vec<SubsetInfo>,
    /// CBR and GBDT test error, each subset selected by that model's own errors.
    pub data_models: Vec<ModelRow>,
    pub cbr_train_loo: Option<ErrorSummary>,
    pub feature_weights: Vec<FeatureWeight>,
    pub local_accuracy: Option<LocalAccuracyTable>,
    pub ranking: Option<RankingTable>,
    pub additive_cbr_exclusions: Option<Exclusions>,
    pub bin_width: f64,
    pub histograms: Vec<ModelHistogram>,
    pub thresholds: Vec<ModelThresholds>,
    pub notes: Vec<String>,
}

fn subset_infos(n: usize, fractions: &[f64]) -> Vec<SubsetInfo> {
    std::iter::once(1.0)
        .chain(fractions.iter().copied())
        .map(|f| SubsetInfo {
            label: if f == 1.0 {
                "All".to_string()
            } else {
                format!("{}%", (f * 100.0).round())
            },
            fraction: f,
            size: subset_size(n, f),
        })
        .collect()
}

fn subsets_by_error(errors: &[f64], infos: &[SubsetInfo]) -> Result<Vec<Vec<usize>>> {
    infos
        .iter()
        .map(|s| select_most_accurate(errors, s.fraction))
        .collect()
}

fn summaries(errors: &[f64], subsets: &[Vec<usize>]) -> Result<Vec<ErrorSummary>> {
    subsets
        .iter()
        .map(|idx| {
            let sub: Vec<f64> = idx.iter().map(|&i| errors[i]).collect();
            ErrorSummary::from_abs_errors(&sub)
        })
        .collect()
}

pub fn build_report(inp: &ReportInputs<'_>) -> Result<EvalReport> {
    let n = inp.y_test.len();
    if n == 0 {
        return Err(EvalError::Empty);
    }
    if inp.feature_names.len() != inp.global_weights.len() {
        return Err(EvalError::LengthMismatch {
            left: inp.feature_names.len(),
            right: inp.global_weights.len(),
        });
    }
    let subsets = subset_infos(n, inp.fractions);
    let cbr_err = abs_errors(inp.y_test, inp.cbr_pred)?;
    let gbdt_err = abs_errors(inp.y_test, inp.gbdt_pred)?;

    let mut data_models = Vec::new();
    for (name, errs) in [("CBR", &cbr_err), ("GBDT", &gbdt_err)] {
        let sel = subsets_by_error(errs, &subsets)?;
        data_models.push(ModelRow {
            model: name.to_string(),
            summaries: summaries(errs, &sel)?,
        });
    }

    let mut notes = vec![
        "additive CBR contributions use encoded feature values".to_string(),
        "explanation subsets are selected by GBDT test error".to_string(),
    ];
    let (local_accuracy, ranking, additive_cbr_exclusions) = match &inp.explanations {
        None => {
            notes.push(
                "explanations disabled; local accuracy and ranking sections absent".to_string(),
            );
            (None, None, None)
        }
        Some(ex) => {
            let (la, rk, exc) = explanation_sections(inp, ex, &gbdt_err)?;
            (Some(la), Some(rk), Some(exc))
        }
    };

    let mut histograms = Vec::new();
    let mut thresholds = Vec::new();
    for (name, errs) in [("CBR", &cbr_err), ("GBDT", &gbdt_err)] {
        histograms.push(ModelHistogram {
            model: name.to_string(),
            bins: error_histogram(errs, inp.bin_width)?,
        });
        thresholds.push(ModelThresholds {
            model: name.to_string(),
            counts: threshold_counts(errs, inp.thresholds)?,
        });
    }

    Ok(EvalReport {
        n_test: n,
        subsets,
        data_models,
        cbr_train_loo: inp.cbr_train_loo,
        feature_weights: inp
            .feature_names
            .iter()
            .zip(inp.global_weights)
            .map(|(name, &weight)| FeatureWeight {
                name: name.clone(),
                weight,
            })
            .collect(),
        local_accuracy,
        ranking,
        additive_cbr_exclusions,
        bin_width: inp.bin_width,
        histograms,
        thresholds,
        notes,
    })
}

fn explanation_sections(
    inp: &ReportInputs<'_>,
    ex: &ExplanationSet<'_>,
    gbdt_err: &[f64],
) -> Result<(LocalAccuracyTable, RankingTable, Exclusions)> {
    let k = ex.instances.len();
    if k == 0 {
        return Err(EvalError::Inconsistent("no explained instances".into()));
    }
    if ex.shap.len() != k || ex.lime.len() != k || ex.additive_cbr.len() != k {
        return Err(EvalError::Inconsistent(format!(
            "{k} instances but {} / {} / {} explanations",
            ex.shap.len(),
            ex.lime.len(),
            ex.additive_cbr.len()
        )));
    }
    let mut model_preds = Vec::with_capacity(k);
    let mut errs = Vec::with_capacity(k);
    for &i in ex.instances {
        let p = *inp.gbdt_pred.get(i).ok_or(EvalError::IndexOutOfRange(i))?;
        model_preds.push(p);
        errs.push(gbdt_err[i]);
    }
    let subsets = subset_infos(k, inp.fractions);
    let sel = subsets_by_error(&errs, &subsets)?;

    let mut rows = Vec::new();
    for (name, set) in [("SHAP", ex.shap), ("LIME", ex.lime)] {
        let preds: Vec<f64> = set.iter().map(|e| e.additive_predict()).collect();
        rows.push(ModelRow {
            model: name.to_string(),
            summaries: local_accuracy_report(&model_preds, &preds, &sel)?,
        });
    }
    let local = LocalAccuracyTable {
        n_explained: k,
        subsets: subsets.clone(),
        rows,
    };

    let mut ranking_rows = Vec::new();
    for baseline in ["Global CBR", "Additive CBR"] {
        for (method, set) in [("SHAP", ex.shap), ("LIME", ex.lime)] {
            let per_instance: Vec<Option<f64>> = (0..k)
                .map(|i| {
                    let b = match baseline {
                        "Global CBR" => Baseline::Global(inp.global_weights),
                        _ => Baseline::Additive(ex.additive_cbr[i].as_ref()?),
                    };
                    attribution_ndcg(b, &set[i]).ok()
                })
                .collect();
            let cells = sel
                .iter()
                .map(|idx| {
                    let vals: Vec<f64> = idx.iter().filter_map(|&i| per_instance[i]).collect();
                    NdcgCell {
                        mean: (!vals.is_empty())
                            .then(|| vals.iter().sum::<f64>() / vals.len() as f64),
                        n: vals.len(),
                    }
                })
                .collect();
            ranking_rows.push(RankingRow {
                baseline: baseline.to_string(),
                method: method.to_string(),
                cells,
            });
        }
    }
    let excluded: Vec<usize> = ex
        .instances
        .iter()
        .zip(ex.additive_cbr)
        .filter(|(_, e)| e.is_none())
        .map(|(&i, _)| i)
        .collect();
    Ok((
        local,
        RankingTable {
            subsets,
            rows: ranking_rows,
        },
        Exclusions {
            count: excluded.len(),
            instances: excluded,
        },
    ))
}

fn subset_header(out: &mut String, first: &str, subsets: &[SubsetInfo]) {
    let _ = write!(out, "| {first} |");
    for s in subsets {
        let _ = write!(out, " {} (n={}) |", s.label, s.size);
    }
    out.push_str("\n|---|");
    for _ in subsets {
        out.push_str("---|");
    }
    out.push('\n');
}

fn summary_rows(out: &mut String, rows: &[ModelRow]) {
    for r in rows {
        let _ = write!(out, "| {} |", r.model);
        for s in &r.summaries {
            let _ = write!(out, " {:.4} (σ {:.4}) |", s.mae, s.sigma);
        }
        out.push('\n');
    }
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("# Evaluation report\n\n");
        let _ = writeln!(out, "Test instances: {}\n", self.n_test);

        out.push_str("## Data models: test MAE\n\n");
        subset_header(&mut out, "Model", &self.subsets);
        summary_rows(&mut out, &self.data_models);
        if let Some(loo) = &self.cbr_train_loo {
            let _ = writeln!(
                out,
                "\nCBR leave-one-out on training data: MAE {:.4} (σ {:.4}, n={})",
                loo.mae, loo.sigma, loo.n
            );
        }

        out.push_str("\n## Case-base feature weights\n\n| Feature | Weight |\n|---|---|\n");
        for w in &self.feature_weights {
            let _ = writeln!(out, "| {} | {:.6} |", w.name, w.weight);
        }

        out.push_str("\n## Explanation local accuracy\n\n");
        match &self.local_accuracy {
            Some(t) => {
                let _ = writeln!(out, "Explained instances: {}\n", t.n_explained);
                subset_header(&mut out, "Method", &t.subsets);
                summary_rows(&mut out, &t.rows);
            }
            None => out.push_str("Not computed: explanations disabled.\n"),
        }

        out.push_str("\n## Ranking agreement (mean nDCG)\n\n");
        match &self.ranking {
            Some(t) => {
                subset_header(&mut out, "Baseline / method", &t.subsets);
                for r in &t.rows {
                    let _ = write!(out, "| {} / {} |", r.baseline, r.method);
                    for c in &r.cells {
                        match c.mean {
                            Some(m) => {
                                let _ = write!(out, " {:.4} (n={}) |", m, c.n);
                            }
                            None => out.push_str(" n/a |"),
                        }
                    }
                    out.push('\n');
                }
            }
            None => out.push_str("Not computed: explanations disabled.\n"),
        }
        if let Some(e) = &self.additive_cbr_exclusions {
            let _ = writeln!(
                out,
                "\nInstances excluded from additive CBR (undefined multiplier): {}",
                e.count
            );
        }

        if let (Some(la), Some(rk)) = (&self.local_accuracy, &self.ranking) {
            out.push_str("\n## Accuracy and agreement by subset\n\n");
            out.push_str("| Subset | GBDT MAE | CBR MAE | SHAP local MAE | LIME local MAE | nDCG SHAP vs additive CBR | nDCG LIME vs additive CBR |\n");
            out.push_str("|---|---|---|---|---|---|---|\n");
            let fmt = |c: &NdcgCell| c.mean.map_or("n/a".to_string(), |m| format!("{m:.4}"));
            let additive = |method: &str| {
                rk.rows
                    .iter()
                    .find(|r| r.baseline == "Additive CBR" && r.method == method)
            };
            for (i, s) in la.subsets.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "| {} | {:.4} | {:.4} | {:.4} | {:.4} | {} | {} |",
                    s.label,
                    self.data_models[1].summaries[i].mae,
                    self.data_models[0].summaries[i].mae,
                    la.rows[0].summaries[i].mae,
                    la.rows[1].summaries[i].mae,
                    additive("SHAP").map_or("n/a".to_string(), |r| fmt(&r.cells[i])),
                    additive("LIME").map_or("n/a".to_string(), |r| fmt(&r.cells[i])),
                );
            }
        }

        let _ = write!(
            out,
            "\n## Absolute error histogram (bin width {})\n\n",
            self.bin_width
        );
        out.push_str("| Model | Bin | Count |\n|---|---|---|\n");
        for h in &self.histograms {
            for b in &h.bins {
                let _ = writeln!(
                    out,
                    "| {} | [{}, {}) | {} |",
                    h.model, b.lower, b.upper, b.count
                );
            }
        }

        out.push_str(
            "\n## Error thresholds\n\n| Model | Threshold | Within | Above |\n|---|---|---|---|\n",
        );
        for t in &self.thresholds {
            for c in &t.counts {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    t.model, c.threshold, c.within, c.above
                );
            }
        }

        out.push_str("\n## Notes\n\n");
        for n in &self.notes {
            let _ = writeln!(out, "- {n}");
        }
        out
    }

    pub fn write_histogram_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["model", "bin_lower", "bin_upper", "count"])?;
        for h in &self.histograms {
            for b in &h.bins {
                w.write_record([
                    h.model.clone(),
                    b.lower.to_string(),
                    b.upper.to_string(),
                    b.count.to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_threshold_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["model", "threshold", "within", "above"])?;
        for t in &self.thresholds {
            for c in &t.counts {
                w.write_record([
                    t.model.clone(),
                    c.threshold.to_string(),
                    c.within.to_string(),
                    c.above.to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
