use statrs::distribution::{ContinuousCDF, Normal};

use super::{dense_feature, with_numeric, QuantileOutput, StageKind};
use crate::error::Result;
use crate::frame::Frame;

const QUANTILE_BOUND: f64 = 1e-7;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub(super) fn fit_affine(
    kind: &StageKind,
    cols: &[(String, Vec<f64>)],
    warnings: &mut Vec<String>,
) -> Vec<(String, f64, f64)> {
    let mut out = Vec::new();
    for (name, v) in cols {
        let (shift, scale) = match kind {
            StageKind::Zscore => (mean(v), sample_std(v)),
            StageKind::Minmax => {
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
            StageKind::Maxabs => (0.0, v.iter().map(|x| x.abs()).fold(0.0, f64::max)),
            StageKind::Robust => {
                let s = sorted(v);
                (
                    percentile_sorted(&s, 0.5),
                    percentile_sorted(&s, 0.75) - percentile_sorted(&s, 0.25),
                )
            }
            _ => unreachable!("not an affine scaler"),
        };
        if scale == 0.0 || !scale.is_finite() {
            warnings.push(format!("column `{name}` has zero spread; left unscaled"));
            continue;
        }
        out.push((name.clone(), shift, scale));
    }
    out
}

pub(super) fn apply_affine(cols: &[(String, f64, f64)], f: &Frame) -> Result<Frame> {
    let mut updates = Vec::with_capacity(cols.len());
    for (name, shift, scale) in cols {
        let (i, v) = dense_feature(f, name, "scaler")?;
        updates.push((i, v.into_iter().map(|x| (x - shift) / scale).collect()));
    }
    Ok(with_numeric(f, updates))
}

pub(super) fn apply_normalize(columns: &[String], l1: bool, f: &Frame) -> Result<Frame> {
    let cols: Vec<(usize, Vec<f64>)> = columns
        .iter()
        .map(|c| dense_feature(f, c, "normalizer"))
        .collect::<Result<_>>()?;
    let mut updates: Vec<(usize, Vec<f64>)> =
        cols.iter().map(|(i, _)| (*i, vec![0.0; f.len()])).collect();
    for r in 0..f.len() {
        let norm = if l1 {
            cols.iter().map(|(_, v)| v[r].abs()).sum::<f64>()
        } else {
            cols.iter().map(|(_, v)| v[r] * v[r]).sum::<f64>().sqrt()
        };
        for (j, (_, v)) in cols.iter().enumerate() {
            updates[j].1[r] = if norm == 0.0 { v[r] } else { v[r] / norm };
        }
    }
    Ok(with_numeric(f, updates))
}

pub(super) fn fit_quantile(
    cols: &[(String, Vec<f64>)],
    n_quantiles: usize,
    warnings: &mut Vec<String>,
) -> (Vec<(String, Vec<f64>)>, Vec<f64>) {
    let n = cols.first().map_or(n_quantiles, |(_, v)| v.len());
    let q = if n_quantiles > n {
        warnings.push(format!(
            "n_quantiles {n_quantiles} exceeds {n} training rows; reduced to {n}"
        ));
        n.max(2)
    } else {
        n_quantiles
    };
    let references: Vec<f64> = (0..q).map(|i| i as f64 / (q - 1) as f64).collect();
    let columns = cols
        .iter()
        .map(|(name, v)| {
            let s = sorted(v);
            let mut qs: Vec<f64> = references.iter().map(|&r| percentile_sorted(&s, r)).collect();
            // keep the quantile sequence monotone despite rounding
            for i in 1..qs.len() {
                if qs[i] < qs[i - 1] {
                    qs[i] = qs[i - 1];
                }
            }
            (name.clone(), qs)
        })
        .collect();
    (columns, references)
}

/// Piecewise-linear interpolation on increasing `xs` (ties resolved to the
/// rightmost knot), clamped at both ends.
fn interp(x: f64, xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|&k| k <= x);
    let (x0, x1, y0, y1) = (xs[j - 1], xs[j], ys[j - 1], ys[j]);
    if x1 == x0 {
        y1
    } else {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Empirical CDF value of `x`, averaging the left- and right-tie
/// interpolations so repeated quantiles map to their midpoint.
pub(crate) fn quantile_map(x: f64, quantiles: &[f64], references: &[f64]) -> f64 {
    let fwd = interp(x, quantiles, references);
    let neg_q: Vec<f64> = quantiles.iter().rev().map(|q| -q).collect();
    let neg_r: Vec<f64> = references.iter().rev().map(|r| -r).collect();
    let bwd = -interp(-x, &neg_q, &neg_r);
    0.5 * (fwd + bwd)
}

pub(super) fn apply_quantile(
    cols: &[(String, Vec<f64>)],
    references: &[f64],
    output: QuantileOutput,
    f: &Frame,
) -> Result<Frame> {
    let normal = Normal::standard();
    let mut updates = Vec::with_capacity(cols.len());
    for (name, qs) in cols {
        let (i, v) = dense_feature(f, name, "quantile")?;
        let mapped = v
            .into_iter()
            .map(|x| {
                let u = quantile_map(x, qs, references);
                match output {
                    QuantileOutput::Uniform => u,
                    QuantileOutput::Normal => {
                        normal.inverse_cdf(u.clamp(QUANTILE_BOUND, 1.0 - QUANTILE_BOUND))
                    }
                }
            })
            .collect();
        updates.push((i, mapped));
    }
    Ok(with_numeric(f, updates))
}

/// The Yeo-Johnson transform of one value.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    const EPS: f64 = 1e-12;
    if x >= 0.0 {
        if lambda.abs() < EPS {
            x.ln_1p()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if (lambda - 2.0).abs() < EPS {
        -(-x).ln_1p()
    } else {
        -((1.0 - x).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

/// Profile log-likelihood of `λ` under a normal model of the transformed data.
pub fn yeo_johnson_log_likelihood(v: &[f64], lambda: f64) -> f64 {
    let n = v.len() as f64;
    let t: Vec<f64> = v.iter().map(|&x| yeo_johnson(x, lambda)).collect();
    let m = mean(&t);
    let var = t.iter().map(|y| (y - m).powi(2)).sum::<f64>() / n;
    let jac: f64 = v.iter().map(|&x| x.signum() * x.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jac
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-9 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerColumn {
    pub name: String,
    pub lambda: f64,
    pub mean: f64,
    pub std: f64,
}

pub(super) fn fit_power(cols: &[(String, Vec<f64>)], warnings: &mut Vec<String>) -> Vec<PowerColumn> {
    let mut out = Vec::new();
    for (name, v) in cols {
        if v.iter().all(|&x| x == v[0]) {
            warnings.push(format!("column `{name}` is constant; left unchanged"));
            continue;
        }
        let lambda = golden_max(|l| yeo_johnson_log_likelihood(v, l), -5.0, 5.0);
        let t: Vec<f64> = v.iter().map(|&x| yeo_johnson(x, lambda)).collect();
        let std = sample_std(&t);
        if std == 0.0 || !std.is_finite() {
            warnings.push(format!("column `{name}` collapses under the power map; left unchanged"));
            continue;
        }
        out.push(PowerColumn {
            name: name.clone(),
            lambda,
            mean: mean(&t),
            std,
        });
    }
    out
}

pub(super) fn apply_power(cols: &[PowerColumn], f: &Frame) -> Result<Frame> {
    let mut updates = Vec::with_capacity(cols.len());
    for c in cols {
        let (i, v) = dense_feature(f, &c.name, "power")?;
        updates.push((
            i,
            v.into_iter()
                .map(|x| (yeo_johnson(x, c.lambda) - c.mean) / c.std)
                .collect(),
        ));
    }
    Ok(with_numeric(f, updates))
}
