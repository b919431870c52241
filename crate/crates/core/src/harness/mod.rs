//! Repeated, seeded experiments: stage audits, global fairness, the
//! transformer grid and downstream mitigation search.
//!
//! Repeat `r` always uses split seed `base_seed + r`. Work units run on a
//! rayon pool and results are collected by repeat index, so the thread
//! count never changes a number.

mod aggregate;
mod grid;
mod mitigate;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset, SplitPair};
use crate::error::{Error, Result};
use crate::metrics::{performance, GlobalFairness, Metric, PredictionSet};
use crate::pipeline::{
    self, ablate, default_replacement, AblationMode, AblationPlan, FittedPipeline, PipelineOutput,
    PipelineSpec, SchemaView,
};
use crate::stagefair::{stage_report, PredictionTriple, StageFairnessReport, TripleSet};
use crate::transformers::{StageCategory, StageSpec};

pub use aggregate::{sign, Aggregate};
pub use grid::{run_transformer_grid, CellStatus, GridCell, GridDataset, GridReport, SoftCheck};
pub use mitigate::{recommend_downstream, CandidateResult, MitigationRecommendation, MitigationRequest};

/// Dead zone for sign comparisons and for calling a stage fair.
pub const SIGN_EPSILON: f64 = 0.005;

fn default_repeats() -> usize {
    10
}
fn default_fraction() -> f64 {
    0.7
}
fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub stratify: bool,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default, skip_serializing)]
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            repeats: default_repeats(),
            base_seed: 0,
            train_fraction: default_fraction(),
            stratify: false,
            metrics: default_metrics(),
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Experiment("repeats must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Experiment(format!(
                "train_fraction {} is not in (0, 1)",
                self.train_fraction
            )));
        }
        if self.metrics.is_empty() {
            return Err(Error::Experiment("no metrics selected".into()));
        }
        Ok(())
    }

    pub fn seed(&self, repeat: usize) -> u64 {
        self.base_seed.wrapping_add(repeat as u64)
    }

    fn split(&self, d: &Dataset, repeat: usize) -> Result<SplitPair> {
        split(d, self.train_fraction, self.seed(repeat), self.stratify)
    }
}

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Remove; fall back to the default reference stage when removal
    /// breaks the pipeline and one exists.
    #[default]
    Auto,
    Remove,
    Replace,
}

/// Which stage of a pipeline to audit and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditTarget {
    pub stage: String,
    #[serde(default)]
    pub mode: TargetMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<StageSpec>,
}

impl AuditTarget {
    pub fn stage(name: impl Into<String>) -> Self {
        AuditTarget {
            stage: name.into(),
            mode: TargetMode::Auto,
            replacement: None,
        }
    }
}

/// An audit target resolved against a pipeline: the plan and P*.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedTarget {
    pub stage: String,
    pub plan: AblationPlan,
    pub counterfactual: PipelineSpec,
}

pub fn resolve_target(spec: &PipelineSpec, t: &AuditTarget, schema: &SchemaView) -> Result<ResolvedTarget> {
    let index = spec
        .stage_index(&t.stage)
        .ok_or_else(|| Error::Config(format!("pipeline `{}` has no stage `{}`", spec.name, t.stage)))?;
    let plan = match (t.mode, &t.replacement) {
        (TargetMode::Replace, Some(r)) => AblationPlan::replace(index, r.clone()),
        (TargetMode::Replace, None) => {
            match default_replacement(&spec.stages[index]) {
                Some(r) => AblationPlan::replace(index, r),
                None => {
                    return Err(Error::InvalidPlan(format!(
                        "stage `{}` has no default reference stage; give a replacement",
                        t.stage
                    )))
                }
            }
        }
        (_, Some(_)) => {
            return Err(Error::InvalidPlan(format!(
                "a replacement for `{}` needs mode = \"replace\"",
                t.stage
            )))
        }
        (_, None) => AblationPlan::remove(index),
    };
    match ablate(spec, &plan, schema) {
        Ok(counterfactual) => Ok(ResolvedTarget {
            stage: t.stage.clone(),
            plan,
            counterfactual,
        }),
        Err(e @ Error::RemovalInvalidatesPipeline { .. }) if t.mode == TargetMode::Auto => {
            let Some(r) = default_replacement(&spec.stages[index]) else {
                return Err(e);
            };
            let plan = AblationPlan::replace(index, r);
            let counterfactual = ablate(spec, &plan, schema)?;
            Ok(ResolvedTarget {
                stage: t.stage.clone(),
                plan,
                counterfactual,
            })
        }
        Err(e) => Err(e),
    }
}

/// Aligns two outputs on their common surviving rows, in the order of `p`.
pub fn pair(p: &PipelineOutput, s: &PipelineOutput) -> Result<(TripleSet, PredictionSet, PredictionSet)> {
    let pos = s.positions();
    let mut triples = Vec::new();
    let (mut y, mut yp, mut ys, mut g) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, r) in p.row_ids.iter().enumerate() {
        if let Some(&j) = pos.get(r) {
            debug_assert_eq!(p.labels[i], s.labels[j]);
            triples.push(PredictionTriple {
                y: p.labels[i],
                yhat_p: p.yhat[i],
                yhat_pstar: s.yhat[j],
                group: p.groups[i],
            });
            y.push(p.labels[i]);
            yp.push(p.yhat[i]);
            ys.push(s.yhat[j]);
            g.push(p.groups[i]);
        }
    }
    let t = TripleSet::new(triples)?;
    Ok((
        t,
        PredictionSet::from_parts(&y, &yp, &g)?,
        PredictionSet::from_parts(&y, &ys, &g)?,
    ))
}

/// One repeat of one stage audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRepeat {
    pub repeat: usize,
    pub seed: u64,
    pub split_fingerprint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub report: Option<StageFairnessReport>,
    pub global_p: Option<GlobalFairness>,
    pub global_pstar: Option<GlobalFairness>,
    pub delta_accuracy: Option<f64>,
    pub delta_f1: Option<f64>,
    pub rows_evaluated: usize,
    pub removed_p: usize,
    pub removed_pstar: usize,
}

impl StageRepeat {
    fn failed(repeat: usize, seed: u64, fingerprint: Option<String>, e: &Error) -> Self {
        StageRepeat {
            repeat,
            seed,
            split_fingerprint: fingerprint,
            error: Some(e.to_string()),
            report: None,
            global_p: None,
            global_pstar: None,
            delta_accuracy: None,
            delta_f1: None,
            rows_evaluated: 0,
            removed_p: 0,
            removed_pstar: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRecord {
    /// `Acc(P) − Acc(P*)`.
    pub delta_accuracy: Aggregate,
    /// `F1(P) − F1(P*)`.
    pub delta_f1: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipSummary {
    pub unprivileged_to_favorable: Aggregate,
    pub unprivileged_to_unfavorable: Aggregate,
    pub privileged_to_favorable: Aggregate,
    pub privileged_to_unfavorable: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionEntry {
    pub global_p: Aggregate,
    pub global_pstar: Aggregate,
    /// Global metric of P minus that of P*, per repeat.
    pub delta_global: Aggregate,
    pub sf: Aggregate,
    /// Signs of the mean Δglobal and mean SF agree (with the dead zone);
    /// `None` if either mean is undefined.
    pub agree: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionRecord {
    pub stage: String,
    pub metrics: BTreeMap<Metric, CompositionEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageAudit {
    pub stage: String,
    pub index: usize,
    pub kind: String,
    pub category: StageCategory,
    pub mode: AblationMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replacement: Option<StageSpec>,
    pub sf: BTreeMap<Metric, Aggregate>,
    pub tradeoff: TradeoffRecord,
    pub impact_fraction: Aggregate,
    pub flips: FlipSummary,
    pub composition: CompositionRecord,
    pub failed_repeats: usize,
    pub repeats: Vec<StageRepeat>,
}

impl StageAudit {
    fn build(spec: &PipelineSpec, target: &ResolvedTarget, repeats: Vec<StageRepeat>, metrics: &[Metric]) -> Self {
        let col = |f: &dyn Fn(&StageRepeat) -> Option<f64>| Aggregate::of(repeats.iter().map(f).collect());
        let stage = &spec.stages[target.plan.index];
        let mut sf = BTreeMap::new();
        let mut comp = BTreeMap::new();
        for &m in metrics {
            let local = col(&|r| r.report.as_ref().and_then(|x| x.get(m)));
            let gp = col(&|r| r.global_p.as_ref().and_then(|g| g.get(m)));
            let gs = col(&|r| r.global_pstar.as_ref().and_then(|g| g.get(m)));
            let delta = col(&|r| {
                let a = r.global_p.as_ref()?.get(m)?;
                let b = r.global_pstar.as_ref()?.get(m)?;
                Some(a - b)
            });
            let agree = match (delta.mean, local.mean) {
                (Some(d), Some(s)) => Some(sign(d, SIGN_EPSILON) == sign(s, SIGN_EPSILON)),
                _ => None,
            };
            comp.insert(
                m,
                CompositionEntry {
                    global_p: gp,
                    global_pstar: gs,
                    delta_global: delta,
                    sf: local.clone(),
                    agree,
                },
            );
            sf.insert(m, local);
        }
        let flip = |f: &dyn Fn(&StageFairnessReport) -> f64| col(&|r| r.report.as_ref().map(f));
        StageAudit {
            stage: target.stage.clone(),
            index: target.plan.index,
            kind: stage.kind.name().to_string(),
            category: stage.kind.category(),
            mode: target.plan.mode,
            replacement: target.plan.replacement.clone(),
            sf,
            tradeoff: TradeoffRecord {
                delta_accuracy: col(&|r| r.delta_accuracy),
                delta_f1: col(&|r| r.delta_f1),
            },
            impact_fraction: flip(&|x| x.impact_fraction),
            flips: FlipSummary {
                unprivileged_to_favorable: flip(&|x| x.flips_unprivileged.to_favorable),
                unprivileged_to_unfavorable: flip(&|x| x.flips_unprivileged.to_unfavorable),
                privileged_to_favorable: flip(&|x| x.flips_privileged.to_favorable),
                privileged_to_unfavorable: flip(&|x| x.flips_privileged.to_unfavorable),
            },
            composition: CompositionRecord {
                stage: target.stage.clone(),
                metrics: comp,
            },
            failed_repeats: repeats.iter().filter(|r| r.error.is_some()).count(),
            repeats,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalRepeat {
    pub repeat: usize,
    pub seed: u64,
    pub split_fingerprint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub fairness: Option<GlobalFairness>,
    pub test_rows: usize,
    pub removed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub pipeline: String,
    pub metrics: BTreeMap<Metric, Aggregate>,
    pub accuracy: Aggregate,
    pub f1: Aggregate,
    pub failed_repeats: usize,
    pub repeats: Vec<GlobalRepeat>,
}

impl GlobalSummary {
    fn build(name: &str, repeats: Vec<GlobalRepeat>, metrics: &[Metric]) -> Self {
        let col = |f: &dyn Fn(&GlobalFairness) -> Option<f64>| {
            Aggregate::of(repeats.iter().map(|r| r.fairness.as_ref().and_then(f)).collect())
        };
        GlobalSummary {
            pipeline: name.to_string(),
            metrics: metrics.iter().map(|&m| (m, col(&|g| g.get(m)))).collect(),
            accuracy: col(&|g| Some(g.accuracy)),
            f1: col(&|g| Some(g.f1)),
            failed_repeats: repeats.iter().filter(|r| r.error.is_some()).count(),
            repeats,
        }
    }

    pub fn mean(&self, m: Metric) -> Option<f64> {
        self.metrics.get(&m).and_then(|a| a.mean)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRun {
    pub pipeline: PipelineSpec,
    pub global: GlobalSummary,
    pub stages: Vec<StageAudit>,
    pub warnings: Vec<String>,
}

impl AuditRun {
    pub fn stage(&self, name: &str) -> Option<&StageAudit> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

fn global_repeat(
    repeat: usize,
    seed: u64,
    fingerprint: Option<String>,
    out: std::result::Result<&PipelineOutput, &Error>,
) -> GlobalRepeat {
    let fairness = match out {
        Ok(o) => o.prediction_set().map(|ps| (o, ps)).map_err(|e| e.to_string()),
        Err(e) => Err(e.to_string()),
    };
    match fairness {
        Ok((o, ps)) => GlobalRepeat {
            repeat,
            seed,
            split_fingerprint: fingerprint,
            error: None,
            fairness: Some(GlobalFairness::of(&ps)),
            test_rows: o.test_rows,
            removed: o.removed(),
        },
        Err(e) => GlobalRepeat {
            repeat,
            seed,
            split_fingerprint: fingerprint,
            error: Some(e),
            fairness: None,
            test_rows: 0,
            removed: 0,
        },
    }
}

fn fit_predict(spec: &PipelineSpec, s: &SplitPair) -> Result<(FittedPipeline, PipelineOutput)> {
    let fp = pipeline::fit(spec, s)?;
    let out = pipeline::predict(&fp, &s.test)?;
    Ok((fp, out))
}

fn stage_repeat(
    repeat: usize,
    seed: u64,
    s: &SplitPair,
    out_p: &PipelineOutput,
    target: &ResolvedTarget,
    warnings: &mut BTreeSet<String>,
) -> StageRepeat {
    let fingerprint = Some(s.fingerprint());
    let mut run = || -> Result<StageRepeat> {
        let (fs, out_s) = fit_predict(&target.counterfactual, s)?;
        warnings.extend(fs.warnings());
        let (t, ps_p, ps_s) = pair(out_p, &out_s)?;
        let report = stage_report(&t, &t.counts());
        let (acc_p, f1_p) = performance(&ps_p);
        let (acc_s, f1_s) = performance(&ps_s);
        Ok(StageRepeat {
            repeat,
            seed,
            split_fingerprint: fingerprint.clone(),
            error: None,
            report: Some(report),
            global_p: Some(GlobalFairness::of(&ps_p)),
            global_pstar: Some(GlobalFairness::of(&ps_s)),
            delta_accuracy: Some(acc_p - acc_s),
            delta_f1: Some(f1_p - f1_s),
            rows_evaluated: t.len(),
            removed_p: out_p.removed(),
            removed_pstar: out_s.removed(),
        })
    };
    run().unwrap_or_else(|e| StageRepeat::failed(repeat, seed, fingerprint.clone(), &e))
}

struct RepeatResult {
    global: GlobalRepeat,
    stages: Vec<StageRepeat>,
    warnings: BTreeSet<String>,
}

fn audit_repeat(d: &Dataset, spec: &PipelineSpec, targets: &[ResolvedTarget], cfg: &ExperimentConfig, r: usize) -> RepeatResult {
    let seed = cfg.seed(r);
    let mut warnings = BTreeSet::new();
    let s = match cfg.split(d, r) {
        Ok(s) => s,
        Err(e) => {
            return RepeatResult {
                global: global_repeat(r, seed, None, Err(&e)),
                stages: targets.iter().map(|_| StageRepeat::failed(r, seed, None, &e)).collect(),
                warnings,
            }
        }
    };
    let fingerprint = Some(s.fingerprint());
    let p = fit_predict(spec, &s);
    let stages = match &p {
        Ok((fp, out_p)) => {
            warnings.extend(fp.warnings());
            targets
                .iter()
                .map(|t| stage_repeat(r, seed, &s, out_p, t, &mut warnings))
                .collect()
        }
        Err(e) => targets
            .iter()
            .map(|_| StageRepeat::failed(r, seed, fingerprint.clone(), e))
            .collect(),
    };
    let global = global_repeat(r, seed, fingerprint, p.as_ref().map(|x| &x.1));
    RepeatResult {
        global,
        stages,
        warnings,
    }
}

/// Resolves every audit target up front; plan-time problems abort the run.
pub fn resolve_targets(d: &Dataset, spec: &PipelineSpec, targets: &[AuditTarget]) -> Result<Vec<ResolvedTarget>> {
    let schema = SchemaView::of(d);
    let diagnostics = pipeline::validate(spec, &schema);
    if !diagnostics.is_empty() {
        return Err(Error::Invalid(diagnostics));
    }
    targets.iter().map(|t| resolve_target(spec, t, &schema)).collect()
}

pub(crate) fn audit_inner(
    d: &Dataset,
    spec: &PipelineSpec,
    targets: &[AuditTarget],
    cfg: &ExperimentConfig,
) -> Result<AuditRun> {
    cfg.check()?;
    let resolved = resolve_targets(d, spec, targets)?;
    let results: Vec<RepeatResult> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| audit_repeat(d, spec, &resolved, cfg, r))
        .collect();
    if results.iter().all(|r| r.global.error.is_some()) {
        return Err(Error::AllRepeatsFailed(cfg.repeats));
    }
    let mut warnings = BTreeSet::new();
    let mut globals = Vec::new();
    let mut per_stage: Vec<Vec<StageRepeat>> = vec![Vec::new(); resolved.len()];
    for r in results {
        warnings.extend(r.warnings);
        globals.push(r.global);
        for (i, s) in r.stages.into_iter().enumerate() {
            per_stage[i].push(s);
        }
    }
    for (t, reps) in resolved.iter().zip(&per_stage) {
        if !reps.is_empty() && reps.iter().all(|r| r.error.is_some()) {
            warnings.insert(format!("every repeat of the `{}` audit failed", t.stage));
        }
    }
    let stages = resolved
        .iter()
        .zip(per_stage)
        .map(|(t, reps)| StageAudit::build(spec, t, reps, &cfg.metrics))
        .collect();
    Ok(AuditRun {
        pipeline: spec.clone(),
        global: GlobalSummary::build(&spec.name, globals, &cfg.metrics),
        stages,
        warnings: warnings.into_iter().collect(),
    })
}

/// Audits each target stage: per repeat, P and its counterfactual P* are
/// fitted on the same training rows and compared on the same test rows.
/// Repeats that fail are recorded and skipped; the run fails only if
/// every repeat fails.
pub fn run_stage_audit(
    d: &Dataset,
    spec: &PipelineSpec,
    targets: &[AuditTarget],
    cfg: &ExperimentConfig,
) -> Result<AuditRun> {
    with_pool(cfg.jobs, || audit_inner(d, spec, targets, cfg))
}

pub(crate) fn global_inner(d: &Dataset, spec: &PipelineSpec, cfg: &ExperimentConfig) -> Result<GlobalSummary> {
    cfg.check()?;
    let diagnostics = pipeline::validate(spec, &SchemaView::of(d));
    if !diagnostics.is_empty() {
        return Err(Error::Invalid(diagnostics));
    }
    let repeats: Vec<GlobalRepeat> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed(r);
            match cfg.split(d, r) {
                Ok(s) => {
                    let out = fit_predict(spec, &s);
                    global_repeat(r, seed, Some(s.fingerprint()), out.as_ref().map(|x| &x.1))
                }
                Err(e) => global_repeat(r, seed, None, Err(&e)),
            }
        })
        .collect();
    if repeats.iter().all(|r| r.error.is_some()) {
        return Err(Error::AllRepeatsFailed(cfg.repeats));
    }
    Ok(GlobalSummary::build(&spec.name, repeats, &cfg.metrics))
}

/// Global fairness and performance of one pipeline over repeats.
pub fn run_global_fairness(d: &Dataset, spec: &PipelineSpec, cfg: &ExperimentConfig) -> Result<GlobalSummary> {
    with_pool(cfg.jobs, || global_inner(d, spec, cfg))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub metric: Metric,
    pub agree: usize,
    pub compared: usize,
    pub fraction: Option<f64>,
}

impl AgreementSummary {
    pub fn of<'a>(records: impl IntoIterator<Item = &'a CompositionRecord>, metric: Metric) -> Self {
        let flags: Vec<bool> = records
            .into_iter()
            .filter_map(|c| c.metrics.get(&metric).and_then(|e| e.agree))
            .collect();
        let agree = flags.iter().filter(|&&b| b).count();
        AgreementSummary {
            metric,
            agree,
            compared: flags.len(),
            fraction: (!flags.is_empty()).then(|| agree as f64 / flags.len() as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionRun {
    pub pipeline: String,
    pub records: Vec<CompositionRecord>,
    pub agreement: Vec<AgreementSummary>,
}

/// Local stage fairness next to the change in global fairness it causes.
pub fn run_composition(
    d: &Dataset,
    spec: &PipelineSpec,
    targets: &[AuditTarget],
    cfg: &ExperimentConfig,
) -> Result<CompositionRun> {
    let run = run_stage_audit(d, spec, targets, cfg)?;
    Ok(composition_of(&run, &cfg.metrics))
}

pub fn composition_of(run: &AuditRun, metrics: &[Metric]) -> CompositionRun {
    let records: Vec<CompositionRecord> = run.stages.iter().map(|s| s.composition.clone()).collect();
    CompositionRun {
        pipeline: run.pipeline.name.clone(),
        agreement: metrics
            .iter()
            .map(|&m| AgreementSummary::of(&records, m))
            .collect(),
        records,
    }
}
