//! Preprocessing stages: descriptors, fitting on training data, and
//! applying the fitted state to any later frame.

mod custom;
mod encode;
mod impute;
mod pca;
mod sample;
mod scale;
mod select;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::data::{ColumnData, ColumnKind};
use crate::error::{Error, Result};
use crate::frame::Frame;

pub use custom::{CompareOp, Predicate};
pub use pca::PcaState;
pub use scale::{yeo_johnson, yeo_johnson_log_likelihood};
pub use select::{anova_f, FeatureScore};

/// A literal in a declarative stage: a number or a category token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Text(String),
}

impl Scalar {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Num(x) => Some(*x),
            Scalar::Text(s) => s.trim().parse().ok(),
        }
    }

    pub fn as_text(&self) -> String {
        match self {
            Scalar::Num(x) => x.to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_text())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileOutput {
    Uniform,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeStrategy {
    Mean,
    Median,
    MostFrequent,
}

fn default_n_quantiles() -> usize {
    1000
}
fn default_uniform() -> QuantileOutput {
    QuantileOutput::Uniform
}
fn default_components() -> usize {
    2
}
fn default_k() -> usize {
    10
}
fn default_alpha() -> f64 {
    0.05
}
fn default_percentile() -> f64 {
    10.0
}
fn default_bins() -> usize {
    5
}
fn default_smote_k() -> usize {
    5
}

/// Every stage kind with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageKind {
    /// Passes data through unchanged; the control stage for audits.
    Identity,
    Zscore,
    Minmax,
    Maxabs,
    Robust,
    L1,
    L2,
    Quantile {
        #[serde(default = "default_n_quantiles")]
        n_quantiles: usize,
        #[serde(default = "default_uniform")]
        output: QuantileOutput,
    },
    Power,
    Pca {
        #[serde(default = "default_components")]
        n_components: usize,
        /// Append components next to the input columns instead of
        /// replacing them.
        #[serde(default)]
        keep_input: bool,
    },
    Kbest {
        #[serde(default = "default_k")]
        k: usize,
    },
    Fpr {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Percentile {
        #[serde(default = "default_percentile")]
        percentile: f64,
    },
    Onehot,
    OrdinalLabel,
    Kbins {
        #[serde(default = "default_bins")]
        n_bins: usize,
    },
    Binarize {
        #[serde(default)]
        threshold: f64,
    },
    Impute {
        strategy: ImputeStrategy,
    },
    DropMissing,
    Smote {
        #[serde(default = "default_smote_k")]
        k: usize,
    },
    EditedNnUndersample,
    RandomUndersample,
    RowFilter {
        #[serde(default)]
        predicates: Vec<Predicate>,
    },
    ValueReplace {
        from: Scalar,
        to: Scalar,
    },
    ColumnDrop,
}

/// Grouping used for grid reports and default replacements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageCategory {
    Control,
    Scaler,
    Normalizer,
    NonLinear,
    Extraction,
    Selection,
    Encoder,
    Imputation,
    Sampling,
    Custom,
}

impl StageKind {
    pub fn name(&self) -> &'static str {
        match self {
            StageKind::Identity => "identity",
            StageKind::Zscore => "zscore",
            StageKind::Minmax => "minmax",
            StageKind::Maxabs => "maxabs",
            StageKind::Robust => "robust",
            StageKind::L1 => "l1",
            StageKind::L2 => "l2",
            StageKind::Quantile { .. } => "quantile",
            StageKind::Power => "power",
            StageKind::Pca { .. } => "pca",
            StageKind::Kbest { .. } => "kbest",
            StageKind::Fpr { .. } => "fpr",
            StageKind::Percentile { .. } => "percentile",
            StageKind::Onehot => "onehot",
            StageKind::OrdinalLabel => "ordinal_label",
            StageKind::Kbins { .. } => "kbins",
            StageKind::Binarize { .. } => "binarize",
            StageKind::Impute { .. } => "impute",
            StageKind::DropMissing => "drop_missing",
            StageKind::Smote { .. } => "smote",
            StageKind::EditedNnUndersample => "edited_nn_undersample",
            StageKind::RandomUndersample => "random_undersample",
            StageKind::RowFilter { .. } => "row_filter",
            StageKind::ValueReplace { .. } => "value_replace",
            StageKind::ColumnDrop => "column_drop",
        }
    }

    pub fn category(&self) -> StageCategory {
        use StageKind::*;
        match self {
            Identity => StageCategory::Control,
            Zscore | Minmax | Maxabs | Robust => StageCategory::Scaler,
            L1 | L2 => StageCategory::Normalizer,
            Quantile { .. } | Power => StageCategory::NonLinear,
            Pca { .. } => StageCategory::Extraction,
            Kbest { .. } | Fpr { .. } | Percentile { .. } => StageCategory::Selection,
            Onehot | OrdinalLabel | Kbins { .. } | Binarize { .. } => StageCategory::Encoder,
            Impute { .. } | DropMissing => StageCategory::Imputation,
            Smote { .. } | EditedNnUndersample | RandomUndersample => StageCategory::Sampling,
            RowFilter { .. } | ValueReplace { .. } | ColumnDrop => StageCategory::Custom,
        }
    }

    /// Samplers change only the training rows.
    pub fn is_sampler(&self) -> bool {
        self.category() == StageCategory::Sampling
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::param(self.name(), m));
        match self {
            StageKind::Quantile { n_quantiles, .. } if *n_quantiles < 2 => {
                bad("n_quantiles must be at least 2")
            }
            StageKind::Pca { n_components, .. } if *n_components < 1 => {
                bad("n_components must be at least 1")
            }
            StageKind::Kbest { k } if *k < 1 => bad("k must be at least 1"),
            StageKind::Fpr { alpha } if !(*alpha > 0.0 && *alpha <= 1.0) => {
                bad("alpha must lie in (0, 1]")
            }
            StageKind::Percentile { percentile } if !(*percentile > 0.0 && *percentile <= 100.0) => {
                bad("percentile must lie in (0, 100]")
            }
            StageKind::Kbins { n_bins } if *n_bins < 2 => bad("n_bins must be at least 2"),
            StageKind::Binarize { threshold } if !threshold.is_finite() => {
                bad("threshold must be finite")
            }
            StageKind::Smote { k } if *k < 1 => bad("k must be at least 1"),
            _ => Ok(()),
        }
    }
}

/// A stage as declared in a pipeline: kind and parameters, an optional name
/// and an optional column subset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(flatten)]
    pub kind: StageKind,
}

impl StageSpec {
    pub fn new(kind: StageKind) -> Result<Self> {
        kind.check()?;
        Ok(StageSpec {
            name: None,
            columns: None,
            kind,
        })
    }

    /// A stage of the given kind with default parameters.
    pub fn of_kind(kind: &str) -> Result<Self> {
        let mut t = toml::Table::new();
        t.insert("kind".into(), toml::Value::String(kind.into()));
        StageSpec::deserialize(toml::Value::Table(t))
            .map_err(|e| Error::Config(format!("stage `{kind}`: {e}")))
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn on(mut self, columns: &[&str]) -> Self {
        self.columns = Some(columns.iter().map(|c| c.to_string()).collect());
        self
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.name())
    }
}

impl<'de> Deserialize<'de> for StageSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut table = toml::Table::deserialize(d)?;
        let name = match table.remove("name") {
            None => None,
            Some(toml::Value::String(s)) => Some(s),
            Some(_) => return Err(D::Error::custom("`name` must be a string")),
        };
        let columns = match table.remove("columns") {
            None => None,
            Some(v) => Some(Vec::<String>::deserialize(v).map_err(D::Error::custom)?),
        };
        let kind = StageKind::deserialize(toml::Value::Table(table)).map_err(D::Error::custom)?;
        kind.check().map_err(D::Error::custom)?;
        Ok(StageSpec {
            name,
            columns,
            kind,
        })
    }
}

/// Learned state of one stage.
#[derive(Clone, Debug, PartialEq)]
pub enum StageState {
    Identity,
    /// `x' = (x − shift) / scale` per column.
    Affine(Vec<(String, f64, f64)>),
    Normalize {
        columns: Vec<String>,
        l1: bool,
    },
    Quantile {
        columns: Vec<(String, Vec<f64>)>,
        references: Vec<f64>,
        output: QuantileOutput,
    },
    Power(Vec<scale::PowerColumn>),
    Pca(PcaState),
    Select {
        dropped: Vec<String>,
        scores: Vec<FeatureScore>,
    },
    Onehot(Vec<(String, Vec<String>)>),
    Ordinal(Vec<(String, Vec<String>)>),
    Kbins(Vec<(String, Vec<f64>)>),
    Binarize {
        columns: Vec<String>,
        threshold: f64,
    },
    Impute(Vec<(String, impute::Fill)>),
    DropMissing(Vec<String>),
    /// Train-only resampling; later frames pass through.
    Sampler,
    RowFilter(Vec<Predicate>),
    ValueReplace {
        columns: Vec<String>,
        from: Scalar,
        to: Scalar,
    },
    ColumnDrop(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedStage {
    pub name: String,
    pub kind: &'static str,
    pub state: StageState,
    pub warnings: Vec<String>,
}

impl FittedStage {
    /// Applies learned state to a frame that did not take part in fitting.
    /// Samplers leave such frames untouched.
    pub fn apply(&self, f: &Frame) -> Result<Frame> {
        match &self.state {
            StageState::Identity | StageState::Sampler => Ok(f.clone()),
            StageState::Affine(cols) => scale::apply_affine(cols, f),
            StageState::Normalize { columns, l1 } => scale::apply_normalize(columns, *l1, f),
            StageState::Quantile {
                columns,
                references,
                output,
            } => scale::apply_quantile(columns, references, *output, f),
            StageState::Power(cols) => scale::apply_power(cols, f),
            StageState::Pca(state) => pca::apply(state, f),
            StageState::Select { dropped, .. } => select::apply(dropped, f),
            StageState::Onehot(cols) => encode::apply_onehot(cols, f),
            StageState::Ordinal(cols) => encode::apply_ordinal(cols, f),
            StageState::Kbins(cols) => encode::apply_kbins(cols, f),
            StageState::Binarize { columns, threshold } => {
                encode::apply_binarize(columns, *threshold, f)
            }
            StageState::Impute(fills) => impute::apply(fills, f),
            StageState::DropMissing(cols) => impute::drop_missing(cols, f, &self.name),
            StageState::RowFilter(preds) => custom::filter(preds, f, &self.name),
            StageState::ValueReplace { columns, from, to } => {
                custom::replace(columns, from, to, f)
            }
            StageState::ColumnDrop(cols) => custom::drop_columns(cols, f),
        }
    }

    /// Rows of `f` that fail a row filter because a referenced cell is missing.
    pub fn missing_filter_failures(&self, f: &Frame) -> usize {
        match &self.state {
            StageState::RowFilter(preds) => custom::missing_failures(preds, f),
            _ => 0,
        }
    }
}

/// Fits a stage on `train` and returns the fitted state together with the
/// transformed training frame (resampled, for samplers).
pub fn fit(spec: &StageSpec, train: &Frame, seed: u64) -> Result<(FittedStage, Frame)> {
    let mut warnings = Vec::new();
    let name = spec.display_name().to_string();
    let targets = |pred: &dyn Fn(ColumnKind) -> bool| resolve_targets(spec, train, pred);
    let numeric = |k: ColumnKind| k == ColumnKind::Numeric;
    let categorical = |k: ColumnKind| k == ColumnKind::Categorical;

    let state = match &spec.kind {
        StageKind::Identity => StageState::Identity,
        StageKind::Zscore | StageKind::Minmax | StageKind::Maxabs | StageKind::Robust => {
            let cols = numeric_targets(spec, train, &targets(&numeric)?)?;
            StageState::Affine(scale::fit_affine(&spec.kind, &cols, &mut warnings))
        }
        StageKind::L1 | StageKind::L2 => {
            let cols = numeric_targets(spec, train, &targets(&numeric)?)?;
            StageState::Normalize {
                columns: cols.into_iter().map(|(n, _)| n).collect(),
                l1: spec.kind == StageKind::L1,
            }
        }
        StageKind::Quantile {
            n_quantiles,
            output,
        } => {
            let cols = numeric_targets(spec, train, &targets(&numeric)?)?;
            let (columns, references) = scale::fit_quantile(&cols, *n_quantiles, &mut warnings);
            StageState::Quantile {
                columns,
                references,
                output: *output,
            }
        }
        StageKind::Power => {
            let cols = numeric_targets(spec, train, &targets(&numeric)?)?;
            StageState::Power(scale::fit_power(&cols, &mut warnings))
        }
        StageKind::Pca {
            n_components,
            keep_input,
        } => {
            let cols = numeric_targets(spec, train, &targets(&|_| true)?)?;
            StageState::Pca(pca::fit(&cols, *n_components, *keep_input, &name, &mut warnings)?)
        }
        StageKind::Kbest { .. } | StageKind::Fpr { .. } | StageKind::Percentile { .. } => {
            let cols = numeric_targets(spec, train, &targets(&|_| true)?)?;
            let (dropped, scores) = select::fit(&spec.kind, &cols, &train.labels, &mut warnings)?;
            StageState::Select { dropped, scores }
        }
        StageKind::Onehot | StageKind::OrdinalLabel => {
            let idx = targets(&categorical)?;
            let cols = categorical_targets(spec, train, &idx)?;
            let cats = encode::fit_categories(&cols);
            if spec.kind == StageKind::Onehot {
                StageState::Onehot(cats)
            } else {
                StageState::Ordinal(cats)
            }
        }
        StageKind::Kbins { n_bins } => {
            let cols = numeric_targets(spec, train, &targets(&numeric)?)?;
            StageState::Kbins(encode::fit_kbins(&cols, *n_bins, &mut warnings))
        }
        StageKind::Binarize { threshold } => {
            let cols = numeric_targets(spec, train, &targets(&numeric)?)?;
            StageState::Binarize {
                columns: cols.into_iter().map(|(n, _)| n).collect(),
                threshold: *threshold,
            }
        }
        StageKind::Impute { strategy } => {
            let idx = match strategy {
                ImputeStrategy::MostFrequent => targets(&|_| true)?,
                _ => targets(&numeric)?,
            };
            StageState::Impute(impute::fit(spec, *strategy, train, &idx)?)
        }
        StageKind::DropMissing => {
            let idx = targets(&|_| true)?;
            StageState::DropMissing(idx.iter().map(|&i| train.features[i].name.clone()).collect())
        }
        StageKind::Smote { k } => {
            let out = sample::smote(train, *k, seed)?;
            return Ok((fitted(name, spec, StageState::Sampler, warnings), out));
        }
        StageKind::EditedNnUndersample => {
            let out = sample::all_knn(train, &mut warnings)?;
            return Ok((fitted(name, spec, StageState::Sampler, warnings), out));
        }
        StageKind::RandomUndersample => {
            let out = sample::random_undersample(train, seed)?;
            return Ok((fitted(name, spec, StageState::Sampler, warnings), out));
        }
        StageKind::RowFilter { predicates } => {
            for p in predicates {
                if train.any_column(&p.column).is_none() {
                    return Err(Error::UnknownColumn(p.column.clone()));
                }
            }
            StageState::RowFilter(predicates.clone())
        }
        StageKind::ValueReplace { from, to } => StageState::ValueReplace {
            columns: custom::replace_targets(spec, train)?,
            from: from.clone(),
            to: to.clone(),
        },
        StageKind::ColumnDrop => {
            let cols = spec
                .columns
                .clone()
                .ok_or_else(|| Error::param("column_drop", "`columns` is required"))?;
            for c in &cols {
                if train.any_column(c).is_none() {
                    return Err(Error::UnknownColumn(c.clone()));
                }
            }
            StageState::ColumnDrop(cols)
        }
    };
    for w in &warnings {
        log::debug!("{name}: {w}");
    }
    let fs = fitted(name, spec, state, warnings);
    let out = fs.apply(train)?;
    Ok((fs, out))
}

fn fitted(name: String, spec: &StageSpec, state: StageState, warnings: Vec<String>) -> FittedStage {
    FittedStage {
        name,
        kind: spec.kind.name(),
        state,
        warnings,
    }
}

/// Feature indices a stage operates on: the declared columns, or every
/// feature accepted by `default_filter`.
fn resolve_targets(
    spec: &StageSpec,
    f: &Frame,
    default_filter: &dyn Fn(ColumnKind) -> bool,
) -> Result<Vec<usize>> {
    match &spec.columns {
        Some(names) => names
            .iter()
            .map(|n| f.feature_index(n).ok_or_else(|| Error::UnknownColumn(n.clone())))
            .collect(),
        None => Ok((0..f.width())
            .filter(|&i| default_filter(f.features[i].kind()))
            .collect()),
    }
}

fn numeric_targets(spec: &StageSpec, f: &Frame, idx: &[usize]) -> Result<Vec<(String, Vec<f64>)>> {
    idx.iter()
        .map(|&i| {
            let c = &f.features[i];
            match &c.data {
                ColumnData::Categorical(_) => Err(Error::ColumnKind {
                    stage: spec.display_name().into(),
                    column: c.name.clone(),
                    expected: "numeric",
                    found: "categorical",
                }),
                ColumnData::Numeric(_) => c
                    .dense()
                    .map(|v| (c.name.clone(), v))
                    .ok_or_else(|| Error::UnexpectedMissing {
                        stage: spec.display_name().into(),
                        column: c.name.clone(),
                    }),
            }
        })
        .collect()
}

fn categorical_targets<'a>(
    spec: &StageSpec,
    f: &'a Frame,
    idx: &[usize],
) -> Result<Vec<(String, Vec<&'a str>)>> {
    idx.iter()
        .map(|&i| {
            let c = &f.features[i];
            match &c.data {
                ColumnData::Numeric(_) => Err(Error::ColumnKind {
                    stage: spec.display_name().into(),
                    column: c.name.clone(),
                    expected: "categorical",
                    found: "numeric",
                }),
                ColumnData::Categorical(v) => v
                    .iter()
                    .map(|x| x.as_deref())
                    .collect::<Option<Vec<&str>>>()
                    .map(|v| (c.name.clone(), v))
                    .ok_or_else(|| Error::UnexpectedMissing {
                        stage: spec.display_name().into(),
                        column: c.name.clone(),
                    }),
            }
        })
        .collect()
}

/// Replaces the named numeric feature columns of `f` with new values.
pub(crate) fn with_numeric(f: &Frame, updates: Vec<(usize, Vec<f64>)>) -> Frame {
    let mut out = f.clone();
    for (i, v) in updates {
        out.features[i].data = ColumnData::Numeric(v.into_iter().map(Some).collect());
    }
    out
}

/// Dense values of a named numeric feature column in a frame being
/// transformed by an already fitted stage.
pub(crate) fn dense_feature(f: &Frame, name: &str, stage: &str) -> Result<(usize, Vec<f64>)> {
    let i = f
        .feature_index(name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
    let c = &f.features[i];
    match &c.data {
        ColumnData::Categorical(_) => Err(Error::ColumnKind {
            stage: stage.into(),
            column: name.into(),
            expected: "numeric",
            found: "categorical",
        }),
        ColumnData::Numeric(_) => c.dense().map(|v| (i, v)).ok_or_else(|| Error::UnexpectedMissing {
            stage: stage.into(),
            column: name.into(),
        }),
    }
}
