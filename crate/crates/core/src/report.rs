//! Serializable reports and their flat CSV tables.
//!
//! Reports are checked against the versioned layout in
//! `docs/report.schema.json` before they are written. The timestamp is the
//! only field allowed to differ between two runs of the same command.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::DatasetConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::harness::{
    AuditRun, AuditTarget, CompositionRun, ExperimentConfig, GridReport, MitigationRecommendation,
    MitigationRequest,
};
use crate::metrics::Metric;
use crate::pipeline::PipelineSpec;
use crate::transformers::StageSpec;
use crate::classifiers::ClassifierSpec;

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// F1 is computed for the favorable class.
pub const F1_CONVENTION: &str = "favorable-class";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub name: String,
    pub rows: usize,
    /// SHA-256 over the column declarations and group choices.
    pub schema_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

impl DatasetFingerprint {
    pub fn of(cfg: &DatasetConfig, d: &Dataset) -> Self {
        let mut canonical = cfg.clone();
        canonical.path = Default::default();
        canonical.sha256 = None;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        DatasetFingerprint {
            name: cfg.name.clone(),
            rows: d.len(),
            schema_hash: hex::encode(Sha256::digest(text.as_bytes())),
            sha256: cfg.sha256.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBody {
    Audit {
        pipeline: PipelineSpec,
        targets: Vec<AuditTarget>,
        run: AuditRun,
        composition: CompositionRun,
    },
    Grid {
        transformers: Vec<StageSpec>,
        classifiers: Vec<ClassifierSpec>,
        grid: GridReport,
    },
    Mitigation {
        request: MitigationRequest,
        recommendation: MitigationRecommendation,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub tool_version: String,
    #[serde(default)]
    pub timestamp: Option<String>,
    pub f1_convention: String,
    pub datasets: Vec<DatasetFingerprint>,
    pub experiment: ExperimentConfig,
    #[serde(flatten)]
    pub body: ReportBody,
}

impl Report {
    pub fn new(datasets: Vec<DatasetFingerprint>, experiment: ExperimentConfig, body: ReportBody) -> Self {
        Report {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: TOOL_VERSION.into(),
            timestamp: None,
            f1_convention: F1_CONVENTION.into(),
            datasets,
            experiment,
            body,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.body {
            ReportBody::Audit { .. } => "audit",
            ReportBody::Grid { .. } => "grid",
            ReportBody::Mitigation { .. } => "mitigation",
        }
    }

    /// Pretty JSON, validated first.
    pub fn to_json(&self) -> Result<String> {
        let v = serde_json::to_value(self).map_err(|e| Error::Report(e.to_string()))?;
        validate(&v)?;
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Report(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
        validate(&v)?;
        serde_json::from_value(v).map_err(|e| Error::Report(e.to_string()))
    }

    /// Flat tables as (file stem, CSV text).
    pub fn tables(&self) -> Result<Vec<(String, String)>> {
        match &self.body {
            ReportBody::Audit { run, .. } => Ok(vec![
                ("stages".into(), stage_table(run)?),
                ("global".into(), global_table(run)?),
            ]),
            ReportBody::Grid { grid, .. } => Ok(vec![("grid".into(), grid_table(grid)?)]),
            ReportBody::Mitigation { recommendation, .. } => {
                Ok(vec![("mitigation".into(), mitigation_table(recommendation)?)])
            }
        }
    }
}

/// Top-level keys every report carries, and the extra keys per kind. Kept in
/// step with `docs/report.schema.json` by a test.
pub const REQUIRED: &[&str] = &[
    "schema_version",
    "tool_version",
    "timestamp",
    "f1_convention",
    "datasets",
    "experiment",
    "kind",
];
pub const REQUIRED_AUDIT: &[&str] = &["pipeline", "targets", "run", "composition"];
pub const REQUIRED_GRID: &[&str] = &["transformers", "classifiers", "grid"];
pub const REQUIRED_MITIGATION: &[&str] = &["request", "recommendation"];

fn bad(msg: impl Into<String>) -> Error {
    Error::Report(msg.into())
}

fn require(obj: &serde_json::Map<String, Value>, keys: &[&str], at: &str) -> Result<()> {
    for k in keys {
        if !obj.contains_key(*k) {
            return Err(bad(format!("{at}: missing `{k}`")));
        }
    }
    Ok(())
}

fn is_aggregate(v: &Value) -> bool {
    v.as_object().is_some_and(|o| {
        ["mean", "std", "stderr", "valid", "undefined", "values"]
            .iter()
            .all(|k| o.contains_key(*k))
    })
}

fn check_metric_map(v: &Value, at: &str) -> Result<()> {
    let o = v.as_object().ok_or_else(|| bad(format!("{at}: expected an object")))?;
    for (k, a) in o {
        if !Metric::ALL.iter().any(|m| m.as_str() == k) {
            return Err(bad(format!("{at}: unknown metric `{k}`")));
        }
        if !is_aggregate(a) {
            return Err(bad(format!("{at}.{k}: not an aggregate")));
        }
    }
    Ok(())
}

/// Structural validation of a serialized report.
pub fn validate(v: &Value) -> Result<()> {
    let o = v.as_object().ok_or_else(|| bad("report is not an object"))?;
    require(o, REQUIRED, "report")?;
    if o["schema_version"] != SCHEMA_VERSION {
        return Err(bad(format!("schema_version {} != {SCHEMA_VERSION}", o["schema_version"])));
    }
    if !(o["timestamp"].is_null() || o["timestamp"].is_string()) {
        return Err(bad("timestamp must be a string or null"));
    }
    let datasets = o["datasets"].as_array().ok_or_else(|| bad("datasets: expected an array"))?;
    for (i, d) in datasets.iter().enumerate() {
        let d = d.as_object().ok_or_else(|| bad("dataset fingerprint is not an object"))?;
        require(d, &["name", "rows", "schema_hash"], &format!("datasets[{i}]"))?;
        if !d["rows"].is_u64() {
            return Err(bad(format!("datasets[{i}].rows: expected an integer")));
        }
    }
    match o["kind"].as_str() {
        Some("audit") => {
            require(o, REQUIRED_AUDIT, "audit report")?;
            let run = o["run"].as_object().ok_or_else(|| bad("run: expected an object"))?;
            require(run, &["global", "stages", "warnings"], "run")?;
            check_metric_map(&run["global"]["metrics"], "run.global.metrics")?;
            let stages = run["stages"].as_array().ok_or_else(|| bad("run.stages: expected an array"))?;
            for (i, s) in stages.iter().enumerate() {
                let at = format!("run.stages[{i}]");
                let so = s.as_object().ok_or_else(|| bad(format!("{at}: expected an object")))?;
                require(so, &["stage", "index", "kind", "mode", "sf", "tradeoff", "composition", "repeats"], &at)?;
                check_metric_map(&so["sf"], &format!("{at}.sf"))?;
            }
        }
        Some("grid") => {
            require(o, REQUIRED_GRID, "grid report")?;
            let cells = o["grid"]["cells"].as_array().ok_or_else(|| bad("grid.cells: expected an array"))?;
            for (i, c) in cells.iter().enumerate() {
                let co = c.as_object().ok_or_else(|| bad(format!("grid.cells[{i}]: expected an object")))?;
                require(co, &["dataset", "transformer", "category", "classifier", "status"], &format!("grid.cells[{i}]"))?;
                if !matches!(co["status"].as_str(), Some("ran" | "skipped" | "failed")) {
                    return Err(bad(format!("grid.cells[{i}].status: {}", co["status"])));
                }
            }
        }
        Some("mitigation") => {
            require(o, REQUIRED_MITIGATION, "mitigation report")?;
            let r = o["recommendation"]
                .as_object()
                .ok_or_else(|| bad("recommendation: expected an object"))?;
            require(r, &["upstream", "metric", "baseline", "candidates", "winner", "mitigates"], "recommendation")?;
            check_metric_map(&r["baseline"], "recommendation.baseline")?;
            if r["candidates"].as_array().is_none_or(|c| c.is_empty()) {
                return Err(bad("recommendation.candidates: expected a non-empty array"));
            }
        }
        other => return Err(bad(format!("unknown report kind {other:?}"))),
    }
    Ok(())
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Report(e.to_string())
}

/// One row per repeat per stage per metric.
pub fn stage_table(run: &AuditRun) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "pipeline",
        "stage",
        "mode",
        "repeat",
        "seed",
        "metric",
        "sf",
        "global_p",
        "global_pstar",
        "delta_global",
        "delta_accuracy",
        "delta_f1",
        "impact_fraction",
        "rows_evaluated",
        "error",
    ])
    .map_err(csv_err)?;
    for s in &run.stages {
        let mode = serde_json::to_value(s.mode).map_err(|e| Error::Report(e.to_string()))?;
        for r in &s.repeats {
            for m in Metric::ALL {
                if !s.sf.contains_key(&m) {
                    continue;
                }
                let gp = r.global_p.as_ref().and_then(|g| g.get(m));
                let gs = r.global_pstar.as_ref().and_then(|g| g.get(m));
                let delta = gp.zip(gs).map(|(a, b)| a - b);
                w.write_record([
                    run.pipeline.name.clone(),
                    s.stage.clone(),
                    mode.as_str().unwrap_or_default().to_string(),
                    r.repeat.to_string(),
                    r.seed.to_string(),
                    m.as_str().to_string(),
                    num(r.report.as_ref().and_then(|x| x.get(m))),
                    num(gp),
                    num(gs),
                    num(delta),
                    num(r.delta_accuracy),
                    num(r.delta_f1),
                    num(r.report.as_ref().map(|x| x.impact_fraction)),
                    r.rows_evaluated.to_string(),
                    r.error.clone().unwrap_or_default(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

/// One row per repeat per metric for the declared pipeline.
pub fn global_table(run: &AuditRun) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pipeline", "repeat", "seed", "metric", "value", "accuracy", "f1", "test_rows", "error"])
        .map_err(csv_err)?;
    for r in &run.global.repeats {
        for m in run.global.metrics.keys() {
            let f = r.fairness.as_ref();
            w.write_record([
                run.global.pipeline.clone(),
                r.repeat.to_string(),
                r.seed.to_string(),
                m.as_str().to_string(),
                num(f.and_then(|g| g.get(*m))),
                num(f.map(|g| g.accuracy)),
                num(f.map(|g| g.f1)),
                r.test_rows.to_string(),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// One row per cell per repeat per metric; skipped and failed cells get a
/// single row carrying the reason.
pub fn grid_table(g: &GridReport) -> Result<String> {
    use crate::harness::CellStatus;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dataset",
        "transformer",
        "category",
        "classifier",
        "status",
        "repeat",
        "metric",
        "sf",
        "reason",
    ])
    .map_err(csv_err)?;
    for c in &g.cells {
        let category = serde_json::to_value(c.category).map_err(|e| Error::Report(e.to_string()))?;
        let category = category.as_str().unwrap_or_default().to_string();
        let head = [c.dataset.clone(), c.transformer.clone(), category, c.classifier.clone()];
        match (&c.status, &c.audit) {
            (CellStatus::Ran, Some(a)) => {
                for r in &a.repeats {
                    for m in a.sf.keys() {
                        let mut rec = head.to_vec();
                        rec.extend([
                            "ran".into(),
                            r.repeat.to_string(),
                            m.as_str().into(),
                            num(r.report.as_ref().and_then(|x| x.get(*m))),
                            r.error.clone().unwrap_or_default(),
                        ]);
                        w.write_record(&rec).map_err(csv_err)?;
                    }
                }
            }
            (status, _) => {
                let (s, reason) = match status {
                    CellStatus::Skipped { reason } => ("skipped", reason.clone()),
                    CellStatus::Failed { reason } => ("failed", reason.clone()),
                    CellStatus::Ran => ("ran", String::new()),
                };
                let mut rec = head.to_vec();
                rec.extend([s.into(), String::new(), String::new(), String::new(), reason]);
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

/// One row per candidate per metric, best first.
pub fn mitigation_table(r: &MitigationRecommendation) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "candidate",
        "kind",
        "rank",
        "metric",
        "global_mean",
        "global_std",
        "global_stderr",
        "local_sf_mean",
        "baseline_mean",
        "error",
    ])
    .map_err(csv_err)?;
    for c in &r.candidates {
        for m in r.baseline.keys() {
            let g = c.global.get(m);
            w.write_record([
                c.stage.clone(),
                c.kind.clone(),
                c.rank.map(|x| x.to_string()).unwrap_or_default(),
                m.as_str().into(),
                num(g.and_then(|a| a.mean)),
                num(g.and_then(|a| a.std)),
                num(g.and_then(|a| a.stderr)),
                num(c.local_sf.get(m).and_then(|a| a.mean)),
                num(r.baseline.get(m).and_then(|a| a.mean)),
                c.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}
