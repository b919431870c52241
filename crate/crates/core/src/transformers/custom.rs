use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{Scalar, StageSpec};
use crate::data::{ColumnData, ColumnKind};
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "=", alias = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl CompareOp {
    fn holds(self, o: Ordering) -> bool {
        match self {
            CompareOp::Le => o != Ordering::Greater,
            CompareOp::Ge => o != Ordering::Less,
            CompareOp::Lt => o == Ordering::Less,
            CompareOp::Gt => o == Ordering::Greater,
            CompareOp::Eq => o == Ordering::Equal,
            CompareOp::Ne => o != Ordering::Equal,
        }
    }
}

/// `column op value`, e.g. `days_b_screening_arrest <= 30`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    pub column: String,
    pub op: CompareOp,
    pub value: Scalar,
}

impl Predicate {
    pub fn new(column: &str, op: CompareOp, value: Scalar) -> Self {
        Predicate {
            column: column.to_string(),
            op,
            value,
        }
    }

    /// `None` when the cell is missing.
    fn eval(&self, data: &ColumnData, row: usize) -> Option<bool> {
        match data {
            ColumnData::Numeric(v) => {
                let x = v[row]?;
                Some(match self.value.as_f64() {
                    Some(t) => self.op.holds(x.total_cmp(&t)),
                    None => self.op == CompareOp::Ne,
                })
            }
            ColumnData::Categorical(v) => {
                let x = v[row].as_deref()?;
                let t = self.value.as_text();
                let o = match (x.trim().parse::<f64>(), t.trim().parse::<f64>()) {
                    (Ok(a), Ok(b)) => a.total_cmp(&b),
                    _ => x.cmp(t.as_str()),
                };
                Some(self.op.holds(o))
            }
        }
    }
}

fn outcomes(preds: &[Predicate], f: &Frame) -> Result<Vec<Option<bool>>> {
    let cols: Vec<&ColumnData> = preds
        .iter()
        .map(|p| {
            f.any_column(&p.column)
                .map(|c| &c.data)
                .ok_or_else(|| Error::UnknownColumn(p.column.clone()))
        })
        .collect::<Result<_>>()?;
    Ok((0..f.len())
        .map(|r| {
            let mut all = Some(true);
            for (p, c) in preds.iter().zip(&cols) {
                match p.eval(c, r) {
                    None => return None,
                    Some(false) => all = Some(false),
                    Some(true) => {}
                }
            }
            all
        })
        .collect())
}

/// Keeps rows satisfying every predicate; a missing referenced cell fails.
pub(super) fn filter(preds: &[Predicate], f: &Frame, stage: &str) -> Result<Frame> {
    if preds.is_empty() {
        return Ok(f.clone());
    }
    let keep: Vec<usize> = outcomes(preds, f)?
        .into_iter()
        .enumerate()
        .filter(|(_, o)| *o == Some(true))
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::AllRowsRemoved(stage.to_string()));
    }
    Ok(f.take(&keep))
}

pub(super) fn missing_failures(preds: &[Predicate], f: &Frame) -> usize {
    outcomes(preds, f).map_or(0, |o| o.iter().filter(|x| x.is_none()).count())
}

pub(super) fn replace_targets(spec: &StageSpec, f: &Frame) -> Result<Vec<String>> {
    if let Some(cols) = &spec.columns {
        for c in cols {
            if f.any_column(c).is_none() {
                return Err(Error::UnknownColumn(c.clone()));
            }
        }
        return Ok(cols.clone());
    }
    let StageSpec {
        kind: super::StageKind::ValueReplace { from, .. },
        ..
    } = spec
    else {
        unreachable!("not a value_replace stage")
    };
    let want = match from {
        Scalar::Num(_) => ColumnKind::Numeric,
        Scalar::Text(_) => ColumnKind::Categorical,
    };
    Ok(f.features
        .iter()
        .chain(&f.aux)
        .filter(|c| c.kind() == want)
        .map(|c| c.name.clone())
        .collect())
}

pub(super) fn replace(columns: &[String], from: &Scalar, to: &Scalar, f: &Frame) -> Result<Frame> {
    let mut out = f.clone();
    for name in columns {
        let col = out
            .features
            .iter_mut()
            .chain(out.aux.iter_mut())
            .find(|c| &c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        match &mut col.data {
            ColumnData::Numeric(v) => {
                let (Some(a), Some(b)) = (from.as_f64(), to.as_f64()) else {
                    return Err(Error::param(
                        "value_replace",
                        format!("numeric column `{name}` needs numeric `from` and `to`"),
                    ));
                };
                v.iter_mut()
                    .filter(|x| **x == Some(a))
                    .for_each(|x| *x = Some(b));
            }
            ColumnData::Categorical(v) => {
                let (a, b) = (from.as_text(), to.as_text());
                v.iter_mut()
                    .filter(|x| x.as_deref() == Some(a.as_str()))
                    .for_each(|x| *x = Some(b.clone()));
            }
        }
    }
    Ok(out)
}

pub(super) fn drop_columns(cols: &[String], f: &Frame) -> Result<Frame> {
    let mut out = f.clone();
    for c in cols {
        if out.any_column(c).is_none() {
            return Err(Error::UnknownColumn(c.clone()));
        }
    }
    out.features.retain(|c| !cols.contains(&c.name));
    out.aux.retain(|c| !cols.contains(&c.name));
    Ok(out)
}
