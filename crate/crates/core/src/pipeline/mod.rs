//! Pipelines: an ordered list of stages ending in a classifier, plus the
//! ablated counterfactuals used by stage audits.

mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{self, ClassifierSpec, FittedClassifier};
use crate::data::{ColumnData, Dataset, Group, SplitPair};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::PredictionSet;
use crate::transformers::{self, FittedStage, StageKind, StageSpec};

pub use validate::{validate_stages, ColInfo, Diagnostic, DiagnosticCode, SchemaView};

/// Mixes a run seed with a tag into an independent 64-bit seed.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipelineSpec {
    name: String,
    #[serde(default)]
    stages: Vec<StageSpec>,
    classifier: ClassifierSpec,
}

impl From<RawPipelineSpec> for PipelineSpec {
    fn from(r: RawPipelineSpec) -> Self {
        PipelineSpec::new(r.name, r.stages, r.classifier)
    }
}

/// Every stage carries a unique name once constructed. Stage seeds derive
/// from names, so removing one stage leaves the others' randomness intact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawPipelineSpec")]
pub struct PipelineSpec {
    pub name: String,
    pub stages: Vec<StageSpec>,
    pub classifier: ClassifierSpec,
}

impl PipelineSpec {
    pub fn new(name: impl Into<String>, stages: Vec<StageSpec>, classifier: ClassifierSpec) -> Self {
        let explicit: Vec<String> = stages.iter().filter_map(|s| s.name.clone()).collect();
        let mut seen: Vec<String> = Vec::new();
        let stages = stages
            .into_iter()
            .map(|mut s| {
                let base = s.display_name().to_string();
                let mut name = base.clone();
                let mut i = 2;
                while seen.contains(&name) || (s.name.is_none() && explicit.contains(&name)) {
                    name = format!("{base}_{i}");
                    i += 1;
                }
                seen.push(name.clone());
                s.name = Some(name);
                s
            })
            .collect();
        PipelineSpec {
            name: name.into(),
            stages,
            classifier,
        }
    }

    /// A pipeline with no preprocessing stages.
    pub fn vanilla(name: impl Into<String>, classifier: ClassifierSpec) -> Self {
        PipelineSpec::new(name, Vec::new(), classifier)
    }

    pub fn stage_names(&self) -> Vec<&str> {
        self.stages.iter().map(|s| s.display_name()).collect()
    }

    pub fn stage_index(&self, name: &str) -> Option<usize> {
        self.stages.iter().position(|s| s.display_name() == name)
    }
}

/// Plan-time check of a pipeline against a dataset's columns.
pub fn validate(spec: &PipelineSpec, schema: &SchemaView) -> Vec<Diagnostic> {
    validate_stages(&spec.stages, schema.clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Remove,
    Replace,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationPlan {
    pub index: usize,
    pub mode: AblationMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replacement: Option<StageSpec>,
}

impl AblationPlan {
    pub fn new(index: usize, mode: AblationMode, replacement: Option<StageSpec>) -> Result<Self> {
        match (mode, &replacement) {
            (AblationMode::Replace, None) => {
                Err(Error::InvalidPlan("replace mode requires a replacement stage".into()))
            }
            (AblationMode::Remove, Some(_)) => {
                Err(Error::InvalidPlan("remove mode takes no replacement stage".into()))
            }
            _ => Ok(AblationPlan {
                index,
                mode,
                replacement,
            }),
        }
    }

    pub fn remove(index: usize) -> Self {
        AblationPlan {
            index,
            mode: AblationMode::Remove,
            replacement: None,
        }
    }

    pub fn replace(index: usize, replacement: StageSpec) -> Self {
        AblationPlan {
            index,
            mode: AblationMode::Replace,
            replacement: Some(replacement),
        }
    }
}

/// The reference stage used when a stage of this kind cannot simply be
/// removed. Only categorical encoders have one.
pub fn default_replacement(stage: &StageSpec) -> Option<StageSpec> {
    match stage.kind {
        StageKind::Onehot | StageKind::OrdinalLabel => Some(StageSpec {
            name: stage.name.clone(),
            columns: stage.columns.clone(),
            kind: StageKind::Onehot,
        }),
        _ => None,
    }
}

/// Builds the counterfactual pipeline: `spec` with exactly one stage
/// removed or swapped, everything else untouched.
pub fn ablate(spec: &PipelineSpec, plan: &AblationPlan, schema: &SchemaView) -> Result<PipelineSpec> {
    let k = plan.index;
    if k >= spec.stages.len() {
        return Err(Error::StageIndex {
            index: k,
            len: spec.stages.len(),
        });
    }
    let mut out = spec.clone();
    match (plan.mode, &plan.replacement) {
        (AblationMode::Remove, None) => {
            out.stages.remove(k);
        }
        (AblationMode::Replace, Some(r)) => {
            let mut r = r.clone();
            if r.name.is_none() {
                r.name = spec.stages[k].name.clone();
            }
            out.stages[k] = r;
        }
        _ => return Err(Error::InvalidPlan("mode and replacement disagree".into())),
    }
    let diagnostics = validate(&out, schema);
    if diagnostics.is_empty() {
        return Ok(out);
    }
    Err(match plan.mode {
        AblationMode::Remove => Error::RemovalInvalidatesPipeline {
            index: k,
            diagnostics,
        },
        AblationMode::Replace => Error::ReplacementIncompatible {
            index: k,
            diagnostics,
        },
    })
}

/// Rows a stage removed from a frame, by group.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRemoval {
    pub stage: String,
    pub unprivileged: usize,
    pub privileged: usize,
    /// Rows dropped because a cell the stage tests was missing.
    pub missing_cells: usize,
}

impl RowRemoval {
    pub fn total(&self) -> usize {
        self.unprivileged + self.privileged
    }
}

fn removal(stage: &FittedStage, before: &Frame, after: &Frame) -> Option<RowRemoval> {
    if after.len() == before.len() {
        return None;
    }
    let (b, a) = (before.group_counts(), after.group_counts());
    Some(RowRemoval {
        stage: stage.name.clone(),
        unprivileged: b.size(Group::Unprivileged) - a.size(Group::Unprivileged),
        privileged: b.size(Group::Privileged) - a.size(Group::Privileged),
        missing_cells: stage.missing_filter_failures(before),
    })
}

/// Digest of the feature block, labels and row ids of a frame.
pub fn frame_digest(f: &Frame) -> String {
    let mut h = Sha256::new();
    for c in &f.features {
        h.update(c.name.as_bytes());
        h.update([0]);
        match &c.data {
            ColumnData::Numeric(v) => {
                for x in v {
                    match x {
                        Some(x) => h.update(x.to_bits().to_le_bytes()),
                        None => h.update([1]),
                    }
                }
            }
            ColumnData::Categorical(v) => {
                for x in v {
                    match x {
                        Some(x) => {
                            h.update(x.as_bytes());
                            h.update([0]);
                        }
                        None => h.update([1]),
                    }
                }
            }
        }
    }
    h.update(&f.labels);
    for r in &f.row_ids {
        h.update(r.map_or(u64::MAX, |v| v as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug)]
pub struct FittedPipeline {
    pub spec: PipelineSpec,
    pub stages: Vec<FittedStage>,
    pub classifier: FittedClassifier,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Digest of the training frame leaving each stage.
    pub train_digests: Vec<String>,
    pub train_removals: Vec<RowRemoval>,
    pub train_rows: usize,
}

impl FittedPipeline {
    pub fn warnings(&self) -> Vec<String> {
        let mut w: Vec<String> = self
            .stages
            .iter()
            .flat_map(|s| s.warnings.iter().map(move |m| format!("{}: {m}", s.name)))
            .collect();
        w.extend(self.classifier.warnings.iter().map(|m| format!("{}: {m}", self.classifier.kind)));
        w
    }
}

/// Fits on the training half of a split.
pub fn fit(spec: &PipelineSpec, split: &SplitPair) -> Result<FittedPipeline> {
    fit_on(spec, &split.train, split.seed)
}

/// Fits every stage in order on `train`, then the classifier on the final
/// training matrix. Stage errors carry the stage position.
pub fn fit_on(spec: &PipelineSpec, train: &Dataset, seed: u64) -> Result<FittedPipeline> {
    let diagnostics = validate(spec, &SchemaView::of(train));
    if !diagnostics.is_empty() {
        return Err(Error::Invalid(diagnostics));
    }
    let mut frame = Frame::from_dataset(train);
    let mut stages = Vec::with_capacity(spec.stages.len());
    let mut train_digests = Vec::with_capacity(spec.stages.len());
    let mut train_removals = Vec::new();
    for (index, s) in spec.stages.iter().enumerate() {
        let name = s.display_name().to_string();
        let stage_seed = derive_seed(seed, &format!("stage/{name}"));
        let (fs, out) = transformers::fit(s, &frame, stage_seed).map_err(|e| Error::Stage {
            index,
            name,
            source: Box::new(e),
        })?;
        if !s.kind.is_sampler() {
            train_removals.extend(removal(&fs, &frame, &out));
        }
        train_digests.push(frame_digest(&out));
        stages.push(fs);
        frame = out;
    }
    let x = frame.matrix()?;
    let clf_seed = derive_seed(seed, &format!("classifier/{}", spec.classifier.seed));
    let classifier = classifiers::fit(&spec.classifier, &x, &frame.labels, clf_seed)?;
    Ok(FittedPipeline {
        spec: spec.clone(),
        stages,
        classifier,
        seed,
        feature_names: frame.feature_names().iter().map(|s| s.to_string()).collect(),
        train_digests,
        train_removals,
        train_rows: frame.len(),
    })
}

/// Predictions for the test rows that survive every stage.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub row_ids: Vec<usize>,
    pub labels: Vec<u8>,
    pub groups: Vec<Group>,
    pub yhat: Vec<u8>,
    pub removals: Vec<RowRemoval>,
    pub test_rows: usize,
}

impl PipelineOutput {
    pub fn removed(&self) -> usize {
        self.removals.iter().map(RowRemoval::total).sum()
    }

    pub fn prediction_set(&self) -> Result<PredictionSet> {
        PredictionSet::from_parts(&self.labels, &self.yhat, &self.groups)
    }

    /// `row id -> position` for pairing with another pipeline's output.
    pub fn positions(&self) -> BTreeMap<usize, usize> {
        self.row_ids.iter().enumerate().map(|(i, &r)| (r, i)).collect()
    }
}

pub fn predict(fp: &FittedPipeline, test: &Dataset) -> Result<PipelineOutput> {
    let mut frame = Frame::from_dataset(test);
    let mut removals = Vec::new();
    for (index, s) in fp.stages.iter().enumerate() {
        let out = s.apply(&frame).map_err(|e| Error::Stage {
            index,
            name: s.name.clone(),
            source: Box::new(e),
        })?;
        removals.extend(removal(s, &frame, &out));
        frame = out;
    }
    let x = frame.matrix()?;
    let yhat = fp.classifier.predict(&x)?;
    Ok(PipelineOutput {
        row_ids: frame
            .row_ids
            .iter()
            .map(|r| r.expect("test rows are never synthetic"))
            .collect(),
        labels: frame.labels,
        groups: frame.groups,
        yhat,
        removals,
        test_rows: test.len(),
    })
}
