use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::transformers::{ImputeStrategy, StageKind, StageSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticCode {
    MissingReachesClassifier,
    CategoricalReachesClassifier,
    NoFeatures,
    KindMismatch,
    MissingIntoStage,
    UnknownColumn,
    UnresolvedColumnReference,
    InvalidParams,
}

/// A plan-time problem found by walking the column schema through the
/// stages.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    /// Stage position; `None` for problems at the classifier.
    pub stage: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(i) => write!(f, "{:?} at stage {i}: {}", self.code, self.message),
            None => write!(f, "{:?}: {}", self.code, self.message),
        }
    }
}

/// What is statically known about one column at some point in a pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct ColInfo {
    pub name: String,
    pub kind: ColumnKind,
    pub may_missing: bool,
    /// A block whose names depend on the data (one-hot indicators).
    pub dynamic: bool,
    /// May have been dropped by a data-dependent selector.
    pub uncertain: bool,
}

impl ColInfo {
    fn fixed(name: String, kind: ColumnKind, may_missing: bool) -> Self {
        ColInfo {
            name,
            kind,
            may_missing,
            dynamic: false,
            uncertain: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemaView {
    pub features: Vec<ColInfo>,
    pub aux: Vec<ColInfo>,
}

impl SchemaView {
    pub fn of(d: &Dataset) -> Self {
        let info = |i: usize| {
            let s = &d.schema()[i];
            ColInfo::fixed(s.name.clone(), s.kind, s.allowed_missing)
        };
        SchemaView {
            features: d.feature_indices().iter().map(|&i| info(i)).collect(),
            aux: (0..d.schema().len())
                .filter(|i| !d.feature_indices().contains(i))
                .map(info)
                .collect(),
        }
    }
}

struct Walker {
    view: SchemaView,
    out: Vec<Diagnostic>,
    stage: usize,
}

enum Lookup {
    Feature(usize),
    Aux,
    Unresolved,
    Unknown,
}

impl Walker {
    fn diag(&mut self, code: DiagnosticCode, message: String) {
        self.out.push(Diagnostic {
            code,
            stage: Some(self.stage),
            message,
        });
    }

    fn lookup(&self, name: &str) -> Lookup {
        if let Some(i) = self.view.features.iter().position(|c| c.name == name && !c.dynamic) {
            return if self.view.features[i].uncertain {
                Lookup::Unresolved
            } else {
                Lookup::Feature(i)
            };
        }
        let dynamic_hit = self.view.features.iter().any(|c| {
            c.dynamic && name.starts_with(c.name.trim_end_matches('*'))
        });
        if dynamic_hit {
            return Lookup::Unresolved;
        }
        if self.view.aux.iter().any(|c| c.name == name) {
            return Lookup::Aux;
        }
        Lookup::Unknown
    }

    /// Feature positions addressed by a stage; reports bad references.
    fn targets(&mut self, spec: &StageSpec, default: impl Fn(&ColInfo) -> bool) -> Vec<usize> {
        match &spec.columns {
            None => (0..self.view.features.len())
                .filter(|&i| default(&self.view.features[i]))
                .collect(),
            Some(names) => {
                let mut idx = Vec::new();
                for n in names {
                    match self.lookup(n) {
                        Lookup::Feature(i) => idx.push(i),
                        Lookup::Unresolved => self.diag(
                            DiagnosticCode::UnresolvedColumnReference,
                            format!("`{n}` may not exist here: an earlier stage derives or selects columns from the data"),
                        ),
                        Lookup::Aux | Lookup::Unknown => self.diag(
                            DiagnosticCode::UnknownColumn,
                            format!("`{n}` is not a feature column at this point"),
                        ),
                    }
                }
                idx
            }
        }
    }

    fn require(&mut self, idx: &[usize], kind: ColumnKind, no_missing: bool, what: &str) {
        for &i in idx {
            let c = self.view.features[i].clone();
            if c.kind != kind {
                self.diag(
                    DiagnosticCode::KindMismatch,
                    format!("{what} needs {kind} input but `{}` is {}", c.name, c.kind),
                );
            }
            if no_missing && c.may_missing {
                self.diag(
                    DiagnosticCode::MissingIntoStage,
                    format!("`{}` may contain missing cells, which {what} cannot consume", c.name),
                );
            }
        }
    }

    fn step(&mut self, spec: &StageSpec) {
        use ColumnKind::{Categorical, Numeric};
        let what = format!("`{}` ({})", spec.display_name(), spec.kind.name());
        let numeric = |c: &ColInfo| c.kind == Numeric;
        match &spec.kind {
            StageKind::Identity => {}
            StageKind::Zscore
            | StageKind::Minmax
            | StageKind::Maxabs
            | StageKind::Robust
            | StageKind::L1
            | StageKind::L2
            | StageKind::Quantile { .. }
            | StageKind::Power
            | StageKind::Kbins { .. }
            | StageKind::Binarize { .. } => {
                let idx = self.targets(spec, numeric);
                self.require(&idx, Numeric, true, &what);
            }
            StageKind::Pca {
                n_components,
                keep_input,
            } => {
                let idx = self.targets(spec, |_| true);
                self.require(&idx, Numeric, true, &what);
                let sized = idx.iter().all(|&i| !self.view.features[i].dynamic);
                if sized && *n_components > idx.len() {
                    self.diag(
                        DiagnosticCode::InvalidParams,
                        format!("n_components {n_components} exceeds the {} input columns", idx.len()),
                    );
                }
                if !keep_input {
                    let mut i = 0;
                    self.view.features.retain(|_| {
                        i += 1;
                        !idx.contains(&(i - 1))
                    });
                }
                let name = spec.display_name();
                for j in 1..=*n_components {
                    self.view
                        .features
                        .push(ColInfo::fixed(format!("{name}_{j}"), Numeric, false));
                }
            }
            StageKind::Kbest { .. } | StageKind::Fpr { .. } | StageKind::Percentile { .. } => {
                let idx = self.targets(spec, |_| true);
                self.require(&idx, Numeric, true, &what);
                let keeps_all = match spec.kind {
                    StageKind::Kbest { k } => {
                        idx.iter().all(|&i| !self.view.features[i].dynamic) && k >= idx.len()
                    }
                    StageKind::Percentile { percentile } => percentile >= 100.0,
                    _ => false,
                };
                if !keeps_all {
                    for &i in &idx {
                        self.view.features[i].uncertain = true;
                    }
                }
            }
            StageKind::Onehot | StageKind::OrdinalLabel => {
                let idx = self.targets(spec, |c| c.kind == Categorical);
                self.require(&idx, Categorical, true, &what);
                for &i in &idx {
                    let c = &mut self.view.features[i];
                    c.kind = Numeric;
                    if spec.kind == StageKind::Onehot {
                        c.name = format!("{}=*", c.name);
                        c.dynamic = true;
                    }
                }
            }
            StageKind::Impute { strategy } => {
                let idx = match strategy {
                    ImputeStrategy::MostFrequent => self.targets(spec, |_| true),
                    _ => {
                        let idx = self.targets(spec, numeric);
                        self.require(&idx, Numeric, false, &what);
                        idx
                    }
                };
                for i in idx {
                    self.view.features[i].may_missing = false;
                }
            }
            StageKind::DropMissing => {
                let idx = self.targets(spec, |_| true);
                for i in idx {
                    self.view.features[i].may_missing = false;
                }
            }
            StageKind::Smote { .. } | StageKind::EditedNnUndersample | StageKind::RandomUndersample => {
                if spec.columns.is_some() {
                    self.diag(
                        DiagnosticCode::InvalidParams,
                        format!("{what} acts on every feature and takes no `columns`"),
                    );
                }
                let idx: Vec<usize> = (0..self.view.features.len()).collect();
                self.require(&idx, Numeric, true, &what);
            }
            StageKind::RowFilter { predicates } => {
                for p in predicates {
                    match self.lookup(&p.column) {
                        Lookup::Feature(_) | Lookup::Aux => {}
                        Lookup::Unresolved => self.diag(
                            DiagnosticCode::UnresolvedColumnReference,
                            format!("filter column `{}` may not exist here", p.column),
                        ),
                        Lookup::Unknown => self.diag(
                            DiagnosticCode::UnknownColumn,
                            format!("filter column `{}` does not exist", p.column),
                        ),
                    }
                }
            }
            StageKind::ValueReplace { .. } | StageKind::ColumnDrop => {
                let names = spec.columns.clone().unwrap_or_default();
                if spec.kind == StageKind::ColumnDrop && names.is_empty() {
                    self.diag(DiagnosticCode::InvalidParams, format!("{what} needs `columns`"));
                }
                for n in &names {
                    match self.lookup(n) {
                        Lookup::Feature(_) | Lookup::Aux => {}
                        Lookup::Unresolved => self.diag(
                            DiagnosticCode::UnresolvedColumnReference,
                            format!("`{n}` may not exist here"),
                        ),
                        Lookup::Unknown => self.diag(
                            DiagnosticCode::UnknownColumn,
                            format!("`{n}` does not exist"),
                        ),
                    }
                }
                if spec.kind == StageKind::ColumnDrop {
                    self.view.features.retain(|c| !names.contains(&c.name));
                    self.view.aux.retain(|c| !names.contains(&c.name));
                }
            }
        }
    }
}

/// Walks the schema through every stage and checks what reaches the
/// classifier. Returns every problem found; an empty list means the
/// pipeline is well formed for this dataset.
pub fn validate_stages(stages: &[StageSpec], view: SchemaView) -> Vec<Diagnostic> {
    let mut w = Walker {
        view,
        out: Vec::new(),
        stage: 0,
    };
    for (i, s) in stages.iter().enumerate() {
        w.stage = i;
        w.step(s);
    }
    let mut out = w.out;
    let features = &w.view.features;
    let missing: Vec<&str> = features
        .iter()
        .filter(|c| c.may_missing)
        .map(|c| c.name.as_str())
        .collect();
    if !missing.is_empty() {
        out.push(Diagnostic {
            code: DiagnosticCode::MissingReachesClassifier,
            stage: None,
            message: format!("columns {missing:?} may still hold missing cells"),
        });
    }
    let cat: Vec<&str> = features
        .iter()
        .filter(|c| c.kind == ColumnKind::Categorical)
        .map(|c| c.name.as_str())
        .collect();
    if !cat.is_empty() {
        out.push(Diagnostic {
            code: DiagnosticCode::CategoricalReachesClassifier,
            stage: None,
            message: format!("columns {cat:?} are still categorical"),
        });
    }
    if features.is_empty() {
        out.push(Diagnostic {
            code: DiagnosticCode::NoFeatures,
            stage: None,
            message: "no feature column reaches the classifier".into(),
        });
    }
    out
}
