//! Seedable binary classifiers: logistic regression, CART, random forest and
//! k-nearest neighbours.
//!
//! Ties always resolve toward label 0: equal votes, a zero logit, and equal
//! leaf counts all predict the unfavorable class.

mod knn;
mod logistic;
mod tree;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::frame::Matrix;

pub use knn::Knn;
pub use logistic::{logistic_gradient, logistic_objective, Logistic};
pub use tree::{Forest, Tree, TreeParams};

fn default_c() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    100
}
fn default_tol() -> f64 {
    1e-6
}
fn default_leaf() -> usize {
    1
}
fn default_split() -> usize {
    2
}
fn default_trees() -> usize {
    100
}
fn default_neighbors() -> usize {
    5
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierKind {
    LogisticRegression {
        /// Inverse L2 strength; the penalty is `‖w‖² / (2C)` on the summed loss.
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default)]
        standardize: bool,
    },
    DecisionTree {
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "default_leaf")]
        min_samples_leaf: usize,
        #[serde(default = "default_split")]
        min_samples_split: usize,
    },
    RandomForest {
        #[serde(default = "default_trees")]
        n_trees: usize,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "default_leaf")]
        min_samples_leaf: usize,
        #[serde(default = "default_split")]
        min_samples_split: usize,
        /// Features tried per split; `√d` (rounded down, at least 1) if unset.
        #[serde(default)]
        max_features: Option<usize>,
        #[serde(default = "default_true")]
        bootstrap: bool,
    },
    KNeighbors {
        #[serde(default = "default_neighbors")]
        k: usize,
    },
}

impl ClassifierKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::LogisticRegression { .. } => "logistic_regression",
            ClassifierKind::DecisionTree { .. } => "decision_tree",
            ClassifierKind::RandomForest { .. } => "random_forest",
            ClassifierKind::KNeighbors { .. } => "k_neighbors",
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::param(self.name(), m));
        match self {
            ClassifierKind::LogisticRegression { c, tol, max_iter, .. } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return bad("c must be positive");
                }
                if !(*tol > 0.0) {
                    return bad("tol must be positive");
                }
                if *max_iter == 0 {
                    return bad("max_iter must be at least 1");
                }
                Ok(())
            }
            ClassifierKind::DecisionTree {
                max_depth,
                min_samples_leaf,
                min_samples_split,
            } => check_tree(*max_depth, *min_samples_leaf, *min_samples_split, self.name()),
            ClassifierKind::RandomForest {
                n_trees,
                max_depth,
                min_samples_leaf,
                min_samples_split,
                max_features,
                ..
            } => {
                if *n_trees == 0 {
                    return bad("n_trees must be at least 1");
                }
                if *max_features == Some(0) {
                    return bad("max_features must be at least 1");
                }
                check_tree(*max_depth, *min_samples_leaf, *min_samples_split, self.name())
            }
            ClassifierKind::KNeighbors { k } if *k == 0 => bad("k must be at least 1"),
            ClassifierKind::KNeighbors { .. } => Ok(()),
        }
    }
}

fn check_tree(depth: Option<usize>, leaf: usize, split: usize, kind: &str) -> Result<()> {
    if depth == Some(0) {
        return Err(Error::param(kind, "max_depth must be at least 1"));
    }
    if leaf == 0 {
        return Err(Error::param(kind, "min_samples_leaf must be at least 1"));
    }
    if split < 2 {
        return Err(Error::param(kind, "min_samples_split must be at least 2"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifierSpec {
    #[serde(flatten)]
    pub kind: ClassifierKind,
    /// Mixed into the per-repeat seed.
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Result<Self> {
        kind.check()?;
        Ok(ClassifierSpec { kind, seed: 0 })
    }

    /// A classifier of the given kind with default parameters.
    pub fn of_kind(kind: &str) -> Result<Self> {
        let mut t = toml::Table::new();
        t.insert("kind".into(), toml::Value::String(kind.into()));
        ClassifierSpec::deserialize(toml::Value::Table(t))
            .map_err(|e| Error::Config(format!("classifier `{kind}`: {e}")))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl<'de> Deserialize<'de> for ClassifierSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut table = toml::Table::deserialize(d)?;
        let seed = match table.remove("seed") {
            None => 0,
            Some(toml::Value::Integer(s)) if s >= 0 => s as u64,
            Some(_) => return Err(D::Error::custom("`seed` must be a non-negative integer")),
        };
        let kind =
            ClassifierKind::deserialize(toml::Value::Table(table)).map_err(D::Error::custom)?;
        kind.check().map_err(D::Error::custom)?;
        Ok(ClassifierSpec { kind, seed })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Constant(u8),
    Logistic(Logistic),
    Tree(Tree),
    Forest(Forest),
    Knn(Knn),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedClassifier {
    pub kind: &'static str,
    pub width: usize,
    pub model: Model,
    pub warnings: Vec<String>,
}

impl FittedClassifier {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        if x.cols != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                found: x.cols,
            });
        }
        Ok(match &self.model {
            Model::Constant(c) => vec![*c; x.rows],
            Model::Logistic(m) => (0..x.rows).map(|i| m.predict_row(x.row(i))).collect(),
            Model::Tree(t) => (0..x.rows).map(|i| t.predict_row(x.row(i))).collect(),
            Model::Forest(f) => (0..x.rows).map(|i| f.predict_row(x.row(i))).collect(),
            Model::Knn(m) => (0..x.rows).map(|i| m.predict_row(x.row(i))).collect(),
        })
    }
}

/// Trains a classifier. Single-class training data yields a constant
/// classifier with a warning.
pub fn fit(spec: &ClassifierSpec, x: &Matrix, y: &[u8], seed: u64) -> Result<FittedClassifier> {
    assert_eq!(x.rows, y.len());
    if x.rows == 0 {
        return Err(Error::EmptyDataset);
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::param(spec.kind.name(), "input contains non-finite values"));
    }
    let kind = spec.kind.name();
    let ones = y.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == y.len() {
        let c = (ones > 0) as u8;
        let w = format!("training labels are all {c}; predicting {c} everywhere");
        log::debug!("{kind}: {w}");
        return Ok(FittedClassifier {
            kind,
            width: x.cols,
            model: Model::Constant(c),
            warnings: vec![w],
        });
    }
    let model = match &spec.kind {
        ClassifierKind::LogisticRegression {
            c,
            max_iter,
            tol,
            standardize,
        } => Model::Logistic(Logistic::fit(x, y, *c, *max_iter, *tol, *standardize)),
        ClassifierKind::DecisionTree {
            max_depth,
            min_samples_leaf,
            min_samples_split,
        } => {
            let params = TreeParams {
                max_depth: *max_depth,
                min_samples_leaf: *min_samples_leaf,
                min_samples_split: *min_samples_split,
                max_features: None,
            };
            let rows: Vec<usize> = (0..x.rows).collect();
            Model::Tree(Tree::fit(x, y, &rows, &params, seed))
        }
        ClassifierKind::RandomForest {
            n_trees,
            max_depth,
            min_samples_leaf,
            min_samples_split,
            max_features,
            bootstrap,
        } => {
            let m = max_features.unwrap_or(((x.cols as f64).sqrt().floor() as usize).max(1));
            let params = TreeParams {
                max_depth: *max_depth,
                min_samples_leaf: *min_samples_leaf,
                min_samples_split: *min_samples_split,
                max_features: Some(m.min(x.cols)),
            };
            Model::Forest(Forest::fit(x, y, *n_trees, &params, *bootstrap, seed))
        }
        ClassifierKind::KNeighbors { k } => Model::Knn(Knn::fit(x, y, *k)),
    };
    Ok(FittedClassifier {
        kind,
        width: x.cols,
        model,
        warnings: Vec::new(),
    })
}
