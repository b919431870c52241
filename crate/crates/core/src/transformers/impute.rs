use std::collections::BTreeMap;

use super::scale::percentile_sorted;
use super::{ImputeStrategy, StageSpec};
use crate::data::ColumnData;
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Clone, Debug, PartialEq)]
pub enum Fill {
    Num(f64),
    Cat(String),
}

pub(super) fn fit(
    spec: &StageSpec,
    strategy: ImputeStrategy,
    train: &Frame,
    idx: &[usize],
) -> Result<Vec<(String, Fill)>> {
    let mut fills = Vec::with_capacity(idx.len());
    for &i in idx {
        let c = &train.features[i];
        let fill = match (&c.data, strategy) {
            (ColumnData::Numeric(v), _) => {
                let mut obs: Vec<f64> = v.iter().flatten().copied().collect();
                if obs.is_empty() {
                    return Err(Error::NoObservedValues(c.name.clone()));
                }
                obs.sort_by(f64::total_cmp);
                Fill::Num(match strategy {
                    ImputeStrategy::Mean => obs.iter().sum::<f64>() / obs.len() as f64,
                    ImputeStrategy::Median => percentile_sorted(&obs, 0.5),
                    ImputeStrategy::MostFrequent => {
                        // sorted input: first longest run is the smallest mode
                        let (mut best, mut best_n, mut run) = (obs[0], 0usize, 0usize);
                        for (j, &x) in obs.iter().enumerate() {
                            run = if j > 0 && obs[j - 1] == x { run + 1 } else { 1 };
                            if run > best_n {
                                best = x;
                                best_n = run;
                            }
                        }
                        best
                    }
                })
            }
            (ColumnData::Categorical(v), ImputeStrategy::MostFrequent) => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for x in v.iter().flatten() {
                    *counts.entry(x.as_str()).or_default() += 1;
                }
                let max = counts.values().copied().max().ok_or_else(|| Error::NoObservedValues(c.name.clone()))?;
                let mode = counts.iter().find(|(_, &n)| n == max).map(|(k, _)| *k).unwrap();
                Fill::Cat(mode.to_string())
            }
            (ColumnData::Categorical(_), _) => {
                return Err(Error::ColumnKind {
                    stage: spec.display_name().into(),
                    column: c.name.clone(),
                    expected: "numeric",
                    found: "categorical",
                })
            }
        };
        fills.push((c.name.clone(), fill));
    }
    Ok(fills)
}

pub(super) fn apply(fills: &[(String, Fill)], f: &Frame) -> Result<Frame> {
    let mut out = f.clone();
    for (name, fill) in fills {
        let i = out
            .feature_index(name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        match (&mut out.features[i].data, fill) {
            (ColumnData::Numeric(v), Fill::Num(x)) => {
                v.iter_mut().filter(|c| c.is_none()).for_each(|c| *c = Some(*x));
            }
            (ColumnData::Categorical(v), Fill::Cat(x)) => {
                v.iter_mut()
                    .filter(|c| c.is_none())
                    .for_each(|c| *c = Some(x.clone()));
            }
            (data, _) => {
                return Err(Error::ColumnKind {
                    stage: "impute".into(),
                    column: name.clone(),
                    expected: match fill {
                        Fill::Num(_) => "numeric",
                        Fill::Cat(_) => "categorical",
                    },
                    found: data.kind().as_str(),
                })
            }
        }
    }
    Ok(out)
}

/// Removes rows with a missing cell in any of `cols`.
pub(super) fn drop_missing(cols: &[String], f: &Frame, stage: &str) -> Result<Frame> {
    let columns: Vec<&ColumnData> = cols
        .iter()
        .map(|c| {
            f.any_column(c)
                .map(|c| &c.data)
                .ok_or_else(|| Error::UnknownColumn(c.clone()))
        })
        .collect::<Result<_>>()?;
    let keep: Vec<usize> = (0..f.len())
        .filter(|&r| columns.iter().all(|c| !c.is_missing(r)))
        .collect();
    if keep.is_empty() {
        return Err(Error::AllRowsRemoved(stage.to_string()));
    }
    Ok(f.take(&keep))
}
