use std::collections::BTreeSet;

use super::{dense_feature, with_numeric};
use crate::data::ColumnData;
use crate::error::{Error, Result};
use crate::frame::{Column, Frame};

pub(super) fn fit_categories(cols: &[(String, Vec<&str>)]) -> Vec<(String, Vec<String>)> {
    cols.iter()
        .map(|(name, v)| {
            let cats: BTreeSet<&str> = v.iter().copied().collect();
            (name.clone(), cats.into_iter().map(str::to_string).collect())
        })
        .collect()
}

fn categorical<'a>(f: &'a Frame, name: &str, stage: &str) -> Result<(usize, Vec<&'a str>)> {
    let i = f
        .feature_index(name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
    match &f.features[i].data {
        ColumnData::Numeric(_) => Err(Error::ColumnKind {
            stage: stage.into(),
            column: name.into(),
            expected: "categorical",
            found: "numeric",
        }),
        ColumnData::Categorical(v) => v
            .iter()
            .map(|x| x.as_deref())
            .collect::<Option<Vec<_>>>()
            .map(|v| (i, v))
            .ok_or_else(|| Error::UnexpectedMissing {
                stage: stage.into(),
                column: name.into(),
            }),
    }
}

/// One indicator column `name=category` per training category, in place of
/// the source column. Unseen categories produce an all-zero block.
pub(super) fn apply_onehot(cols: &[(String, Vec<String>)], f: &Frame) -> Result<Frame> {
    let mut out = f.clone();
    for (name, cats) in cols {
        let (i, v) = categorical(&out, name, "onehot")?;
        let block: Vec<Column> = cats
            .iter()
            .map(|c| Column {
                name: format!("{name}={c}"),
                data: ColumnData::Numeric(
                    v.iter()
                        .map(|x| Some(if x == c { 1.0 } else { 0.0 }))
                        .collect(),
                ),
            })
            .collect();
        out.features.splice(i..=i, block);
    }
    Ok(out)
}

/// Codes `0..n` in sorted category order; an unseen category gets `n`.
pub(super) fn apply_ordinal(cols: &[(String, Vec<String>)], f: &Frame) -> Result<Frame> {
    let mut out = f.clone();
    for (name, cats) in cols {
        let (i, v) = categorical(&out, name, "ordinal_label")?;
        let codes: Vec<Option<f64>> = v
            .iter()
            .map(|x| {
                Some(
                    cats.binary_search_by(|c| c.as_str().cmp(x))
                        .unwrap_or(cats.len()) as f64,
                )
            })
            .collect();
        out.features[i].data = ColumnData::Numeric(codes);
    }
    Ok(out)
}

pub(super) fn fit_kbins(
    cols: &[(String, Vec<f64>)],
    n_bins: usize,
    warnings: &mut Vec<String>,
) -> Vec<(String, Vec<f64>)> {
    cols.iter()
        .map(|(name, v)| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi == lo {
                warnings.push(format!("column `{name}` is constant; every value falls in bin 0"));
                return (name.clone(), vec![lo, hi]);
            }
            let edges = (0..=n_bins)
                .map(|b| lo + (hi - lo) * b as f64 / n_bins as f64)
                .collect();
            (name.clone(), edges)
        })
        .collect()
}

/// Bin index of `x` given uniform edges; values outside the training range
/// fall in the first or last bin.
pub(crate) fn bin_of(x: f64, edges: &[f64]) -> usize {
    let inner = &edges[1..edges.len() - 1];
    inner.partition_point(|&e| e <= x)
}

pub(super) fn apply_kbins(cols: &[(String, Vec<f64>)], f: &Frame) -> Result<Frame> {
    let mut updates = Vec::with_capacity(cols.len());
    for (name, edges) in cols {
        let (i, v) = dense_feature(f, name, "kbins")?;
        updates.push((i, v.into_iter().map(|x| bin_of(x, edges) as f64).collect()));
    }
    Ok(with_numeric(f, updates))
}

pub(super) fn apply_binarize(columns: &[String], threshold: f64, f: &Frame) -> Result<Frame> {
    let mut updates = Vec::with_capacity(columns.len());
    for name in columns {
        let (i, v) = dense_feature(f, name, "binarize")?;
        updates.push((
            i,
            v.into_iter()
                .map(|x| if x > threshold { 1.0 } else { 0.0 })
                .collect(),
        ));
    }
    Ok(with_numeric(f, updates))
}
