use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{audit_inner, sign, with_pool, Aggregate, AuditTarget, ExperimentConfig, SIGN_EPSILON};
use crate::classifiers::ClassifierSpec;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::pipeline::PipelineSpec;
use crate::transformers::StageSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationRequest {
    /// Stages before the upstream transformer (encoding and the like).
    #[serde(default)]
    pub prelude: Vec<StageSpec>,
    pub upstream: StageSpec,
    pub candidates: Vec<StageSpec>,
    pub classifier: ClassifierSpec,
    /// Ranking metric.
    pub metric: Metric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub stage: String,
    pub kind: String,
    /// 1-based; unranked if the candidate could not be evaluated.
    pub rank: Option<usize>,
    /// Global fairness of prelude → upstream → candidate → classifier.
    pub global: BTreeMap<Metric, Aggregate>,
    pub accuracy: Option<Aggregate>,
    /// The candidate's own stage fairness in that pipeline.
    pub local_sf: BTreeMap<Metric, Aggregate>,
    /// Local SF leans the opposite way to the baseline's global bias.
    pub opposes_baseline: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CandidateResult {
    pub fn score(&self, m: Metric) -> Option<f64> {
        self.global.get(&m)?.mean.map(f64::abs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationRecommendation {
    pub upstream: String,
    pub metric: Metric,
    /// Global fairness of prelude → upstream → classifier.
    pub baseline: BTreeMap<Metric, Aggregate>,
    pub baseline_accuracy: Aggregate,
    pub upstream_sf: BTreeMap<Metric, Aggregate>,
    /// Ranked best first; unevaluable candidates last.
    pub candidates: Vec<CandidateResult>,
    pub winner: String,
    /// The winner's |metric| is at most the baseline's.
    pub mitigates: bool,
}

impl MitigationRecommendation {
    pub fn winner(&self) -> &CandidateResult {
        &self.candidates[0]
    }

    pub fn baseline_score(&self) -> Option<f64> {
        self.baseline.get(&self.metric)?.mean.map(f64::abs)
    }
}

fn evaluate(
    d: &Dataset,
    req: &MitigationRequest,
    cand: &StageSpec,
    baseline_mean: Option<f64>,
    cfg: &ExperimentConfig,
) -> CandidateResult {
    let mut stages = req.prelude.clone();
    stages.push(req.upstream.clone());
    stages.push(cand.clone());
    let spec = PipelineSpec::new(format!("candidate/{}", cand.display_name()), stages, req.classifier.clone());
    let name = spec.stages.last().expect("candidate").display_name().to_string();
    let mut out = CandidateResult {
        stage: name.clone(),
        kind: cand.kind.name().to_string(),
        rank: None,
        global: BTreeMap::new(),
        accuracy: None,
        local_sf: BTreeMap::new(),
        opposes_baseline: None,
        error: None,
    };
    match audit_inner(d, &spec, &[AuditTarget::stage(name)], cfg) {
        Ok(mut run) => {
            let audit = run.stages.remove(0);
            let local = audit.sf.get(&req.metric).and_then(|a| a.mean);
            out.opposes_baseline = match (local, baseline_mean) {
                (Some(l), Some(b)) if sign(b, SIGN_EPSILON) != 0 => {
                    Some(sign(l, SIGN_EPSILON) == -sign(b, SIGN_EPSILON))
                }
                _ => None,
            };
            out.global = run.global.metrics;
            out.accuracy = Some(run.global.accuracy);
            out.local_sf = audit.sf;
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Tries each candidate downstream of `upstream` under identical seeds and
/// ranks them by the absolute global metric of the resulting pipeline.
pub fn recommend_downstream(
    d: &Dataset,
    req: &MitigationRequest,
    cfg: &ExperimentConfig,
) -> Result<MitigationRecommendation> {
    cfg.check()?;
    if req.candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut cfg = cfg.clone();
    if !cfg.metrics.contains(&req.metric) {
        cfg.metrics.push(req.metric);
    }
    with_pool(cfg.jobs, || {
        let mut stages = req.prelude.clone();
        stages.push(req.upstream.clone());
        let base = PipelineSpec::new("baseline", stages, req.classifier.clone());
        let upstream = base.stages.last().expect("upstream").display_name().to_string();
        let run = audit_inner(d, &base, &[AuditTarget::stage(upstream.clone())], &cfg)?;
        let baseline_mean = run.global.mean(req.metric);

        let mut candidates: Vec<CandidateResult> = req
            .candidates
            .par_iter()
            .map(|c| evaluate(d, req, c, baseline_mean, &cfg))
            .collect();
        if candidates.iter().all(|c| c.score(req.metric).is_none()) {
            let why: Vec<String> = candidates.iter().filter_map(|c| c.error.clone()).collect();
            return Err(Error::Experiment(format!("no candidate could be evaluated: {}", why.join("; "))));
        }
        // stable: equal scores keep the order given
        candidates.sort_by(|a, b| match (a.score(req.metric), b.score(req.metric)) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
        for (i, c) in candidates.iter_mut().enumerate() {
            if c.score(req.metric).is_some() {
                c.rank = Some(i + 1);
            }
        }
        let winner_score = candidates[0].score(req.metric);
        let mitigates = match (winner_score, baseline_mean) {
            (Some(w), Some(b)) => w <= b.abs(),
            _ => false,
        };
        let mut audit = run.stages;
        Ok(MitigationRecommendation {
            upstream,
            metric: req.metric,
            baseline: run.global.metrics,
            baseline_accuracy: run.global.accuracy,
            upstream_sf: audit.remove(0).sf,
            winner: candidates[0].stage.clone(),
            candidates,
            mitigates,
        })
    })
}
