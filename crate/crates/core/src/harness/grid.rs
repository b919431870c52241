use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{audit_inner, resolve_targets, with_pool, AuditTarget, ExperimentConfig, StageAudit};
use crate::classifiers::ClassifierSpec;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::pipeline::PipelineSpec;
use crate::transformers::{StageCategory, StageSpec};

/// A dataset in the grid with the stages that make it classifier-ready
/// (encoding, imputation). The audited transformer goes after them.
#[derive(Clone, Debug)]
pub struct GridDataset<'a> {
    pub name: String,
    pub dataset: &'a Dataset,
    pub prelude: Vec<StageSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ran,
    Skipped { reason: String },
    Failed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub dataset: String,
    pub transformer: String,
    pub category: StageCategory,
    pub classifier: String,
    #[serde(flatten)]
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<StageAudit>,
}

impl GridCell {
    pub fn sf_mean(&self, m: Metric) -> Option<f64> {
        self.audit.as_ref()?.sf.get(&m)?.mean
    }
}

/// An expected qualitative outcome, reported rather than enforced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftCheck {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub cells: Vec<GridCell>,
    /// Dataset → category → mean |SF_SPD| over the cells that ran.
    pub category_bias: BTreeMap<String, BTreeMap<StageCategory, f64>>,
    pub soft_checks: Vec<SoftCheck>,
}

fn run_cell(
    g: &GridDataset,
    t: &StageSpec,
    c: &ClassifierSpec,
    cfg: &ExperimentConfig,
) -> GridCell {
    let mut stages = g.prelude.clone();
    stages.push(t.clone());
    let spec = PipelineSpec::new(
        format!("{}/{}/{}", g.name, t.display_name(), c.kind.name()),
        stages,
        c.clone(),
    );
    let audited = spec.stages.last().expect("transformer stage").display_name().to_string();
    let targets = [AuditTarget::stage(audited.clone())];
    let mut cell = GridCell {
        dataset: g.name.clone(),
        transformer: t.display_name().to_string(),
        category: t.kind.category(),
        classifier: c.kind.name().to_string(),
        status: CellStatus::Ran,
        audit: None,
    };
    if let Err(e) = resolve_targets(g.dataset, &spec, &targets) {
        cell.status = CellStatus::Skipped {
            reason: e.to_string(),
        };
        return cell;
    }
    match audit_inner(g.dataset, &spec, &targets, cfg) {
        Ok(mut run) => {
            let audit = run.stages.remove(0);
            if audit.failed_repeats == audit.repeats.len() {
                let reason = audit.repeats[0].error.clone().unwrap_or_default();
                cell.status = CellStatus::Failed { reason };
            } else {
                cell.audit = Some(audit);
            }
        }
        Err(e) => {
            cell.status = CellStatus::Failed {
                reason: e.to_string(),
            }
        }
    }
    cell
}

fn category_bias(cells: &[GridCell]) -> BTreeMap<String, BTreeMap<StageCategory, f64>> {
    let mut acc: BTreeMap<String, BTreeMap<StageCategory, Vec<f64>>> = BTreeMap::new();
    for c in cells {
        if let Some(v) = c.sf_mean(Metric::Spd) {
            acc.entry(c.dataset.clone())
                .or_default()
                .entry(c.category)
                .or_default()
                .push(v.abs());
        }
    }
    acc.into_iter()
        .map(|(d, cats)| {
            let means = cats
                .into_iter()
                .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
                .collect();
            (d, means)
        })
        .collect()
}

fn soft_checks(bias: &BTreeMap<String, BTreeMap<StageCategory, f64>>) -> Vec<SoftCheck> {
    let mut out = Vec::new();
    for (d, cats) in bias {
        let Some(&sampling) = cats.get(&StageCategory::Sampling) else {
            continue;
        };
        let (top, top_v) = cats
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| (*k, *v))
            .expect("non-empty");
        out.push(SoftCheck {
            name: format!("{d}: sampling stages most biased"),
            expected: "sampling has the largest mean |SF_SPD|".into(),
            observed: format!("largest is {top:?} ({top_v:.4}); sampling {sampling:.4}"),
            holds: top == StageCategory::Sampling,
        });
    }
    if bias.len() > 1 && bias.contains_key("compas") {
        let overall: Vec<(&String, f64)> = bias
            .iter()
            .map(|(d, c)| (d, c.values().sum::<f64>() / c.len() as f64))
            .collect();
        let (least, v) = overall
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        out.push(SoftCheck {
            name: "least biased dataset".into(),
            expected: "compas".into(),
            observed: format!("{least} ({v:.4})"),
            holds: least.as_str() == "compas",
        });
    }
    out
}

/// Audits every transformer inserted alone into every dataset's vanilla
/// pipeline, for every classifier. Cells whose pipeline does not validate
/// are skipped with the reason.
pub fn run_transformer_grid(
    datasets: &[GridDataset],
    transformers: &[StageSpec],
    classifiers: &[ClassifierSpec],
    cfg: &ExperimentConfig,
) -> Result<GridReport> {
    cfg.check()?;
    if datasets.is_empty() || transformers.is_empty() || classifiers.is_empty() {
        return Err(Error::Experiment("the grid needs at least one dataset, transformer and classifier".into()));
    }
    let units: Vec<(&GridDataset, &StageSpec, &ClassifierSpec)> = datasets
        .iter()
        .flat_map(|d| {
            transformers
                .iter()
                .flat_map(move |t| classifiers.iter().map(move |c| (d, t, c)))
        })
        .collect();
    let cells: Vec<GridCell> = with_pool(cfg.jobs, || {
        units
            .par_iter()
            .map(|(d, t, c)| run_cell(d, t, c, cfg))
            .collect()
    });
    let category_bias = category_bias(&cells);
    Ok(GridReport {
        soft_checks: soft_checks(&category_bias),
        category_bias,
        cells,
    })
}
