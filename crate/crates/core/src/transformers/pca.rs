use nalgebra::{DMatrix, SymmetricEigen};

use super::dense_feature;
use crate::data::ColumnData;
use crate::error::{Error, Result};
use crate::frame::{Column, Frame};

#[derive(Clone, Debug, PartialEq)]
pub struct PcaState {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    /// One unit-length direction per row.
    pub components: Vec<Vec<f64>>,
    /// Variance of the training data along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Sum of the per-column training variances.
    pub total_variance: f64,
    pub effective_rank: usize,
    pub keep_input: bool,
    pub output_names: Vec<String>,
}

pub(super) fn fit(
    cols: &[(String, Vec<f64>)],
    k: usize,
    keep_input: bool,
    stage: &str,
    warnings: &mut Vec<String>,
) -> Result<PcaState> {
    let d = cols.len();
    if k > d {
        return Err(Error::param(
            "pca",
            format!("n_components {k} exceeds the {d} input columns"),
        ));
    }
    let n = cols[0].1.len();
    if n < 2 {
        return Err(Error::param("pca", "needs at least two training rows"));
    }
    let means: Vec<f64> = cols
        .iter()
        .map(|(_, v)| v.iter().sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, d, |i, j| cols[j].1[i] - means[j]);
    let cov = (x.transpose() * &x) / (n - 1) as f64;
    let total_variance = cov.trace();

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let effective_rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > top * 1e-12 && eig.eigenvalues[i] > 0.0)
        .count();
    if effective_rank < k {
        warnings.push(format!(
            "training data has rank {effective_rank}; only {effective_rank} of {k} components carry variance"
        ));
    }

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        // Sign convention: the largest-magnitude loading is positive.
        let pivot = v
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map_or(0, |(j, _)| j);
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[i].max(0.0));
    }

    Ok(PcaState {
        columns: cols.iter().map(|(c, _)| c.clone()).collect(),
        means,
        components,
        explained_variance,
        total_variance,
        effective_rank,
        keep_input,
        output_names: (1..=k).map(|i| format!("{stage}_{i}")).collect(),
    })
}

pub(super) fn apply(s: &PcaState, f: &Frame) -> Result<Frame> {
    let inputs: Vec<(usize, Vec<f64>)> = s
        .columns
        .iter()
        .map(|c| dense_feature(f, c, "pca"))
        .collect::<Result<_>>()?;
    let n = f.len();
    let mut projected = vec![vec![0.0; n]; s.components.len()];
    for r in 0..n {
        for (p, comp) in projected.iter_mut().zip(&s.components) {
            p[r] = inputs
                .iter()
                .zip(&s.means)
                .zip(comp)
                .map(|(((_, v), m), w)| (v[r] - m) * w)
                .sum();
        }
    }
    let mut out = f.clone();
    if !s.keep_input {
        let drop: Vec<usize> = inputs.iter().map(|(i, _)| *i).collect();
        out.features = out
            .features
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, c)| c)
            .collect();
    }
    for (name, v) in s.output_names.iter().zip(projected) {
        out.features.push(Column {
            name: name.clone(),
            data: ColumnData::Numeric(v.into_iter().map(Some).collect()),
        });
    }
    Ok(out)
}
