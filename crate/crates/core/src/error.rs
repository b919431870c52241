use std::path::PathBuf;

use thiserror::Error;

use crate::pipeline::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate column `{0}` in schema")]
    DuplicateColumn(String),

    #[error("missing value in column `{column}` (row {row}) which does not allow missing cells")]
    MissingNotAllowed { column: String, row: usize },

    #[error("column `{column}` row {row}: cannot parse `{value}` as a number")]
    NotNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("label column `{column}` is not binary after favorability mapping (offending value `{value}`)")]
    NonBinaryLabel { column: String, value: String },

    #[error("invalid group specification: {0}")]
    InvalidGroup(String),

    #[error("group `{0}` is empty")]
    EmptyGroup(&'static str),

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("degenerate split fraction {fraction} for {n} rows")]
    DegenerateFraction { fraction: f64, n: usize },

    #[error("stratified split impossible: class {class} has {count} instances")]
    StratifyImpossible { class: u8, count: usize },

    #[error("invalid parameter for `{kind}`: {message}")]
    InvalidParam { kind: String, message: String },

    #[error("column `{column}` has kind {found} but `{stage}` requires {expected}")]
    ColumnKind {
        stage: String,
        column: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("column `{column}` contains missing cells, which `{stage}` cannot consume")]
    UnexpectedMissing { stage: String, column: String },

    #[error("column `{0}` has no observed values in the training data")]
    NoObservedValues(String),

    #[error("feature selection kept no features")]
    EmptyFeatureSet,

    #[error("all rows were removed by `{0}`")]
    AllRowsRemoved(String),

    #[error("minority class has {0} instances; SMOTE needs at least 2")]
    MinorityTooSmall(usize),

    #[error("input width {found} does not match the trained width {expected}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("stage {index} (`{name}`): {source}")]
    Stage {
        index: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("pipeline does not validate: {}", render(.0))]
    Invalid(Vec<Diagnostic>),

    #[error("removing stage {index} invalidates the pipeline ({}); use replace mode", render(.diagnostics))]
    RemovalInvalidatesPipeline {
        index: usize,
        diagnostics: Vec<Diagnostic>,
    },

    #[error("replacement for stage {index} is incompatible: {}", render(.diagnostics))]
    ReplacementIncompatible {
        index: usize,
        diagnostics: Vec<Diagnostic>,
    },

    #[error("stage index {index} out of range for a pipeline with {len} stages")]
    StageIndex { index: usize, len: usize },

    #[error("invalid ablation plan: {0}")]
    InvalidPlan(String),

    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error("empty candidate list")]
    EmptyCandidates,

    #[error("all {0} repeats failed")]
    AllRepeatsFailed(usize),

    #[error("invalid experiment: {0}")]
    Experiment(String),

    #[error("report failed validation: {0}")]
    Report(String),
}

fn render(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParam {
            kind: kind.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by configuration or plan-time validation rather
    /// than by the data seen during a run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParam { .. }
                | Error::Invalid(_)
                | Error::RemovalInvalidatesPipeline { .. }
                | Error::ReplacementIncompatible { .. }
                | Error::StageIndex { .. }
                | Error::InvalidPlan(_)
                | Error::EmptyCandidates
                | Error::Experiment(_)
                | Error::UnknownColumn(_)
                | Error::DuplicateColumn(_)
                | Error::InvalidGroup(_)
                | Error::DegenerateFraction { .. }
        )
    }
}
