use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::StageKind;
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub f: f64,
    pub p: f64,
}

/// One-way ANOVA F statistic of `x` split by the binary `y`, with its
/// p-value. Returns `(0, 1)` for a feature with no variation at all and
/// `(inf, 0)` when the classes are internally constant but differ.
pub fn anova_f(x: &[f64], y: &[u8]) -> (f64, f64) {
    let n = x.len();
    let mut sum = [0.0; 2];
    let mut cnt = [0usize; 2];
    for (&v, &c) in x.iter().zip(y) {
        sum[(c == 1) as usize] += v;
        cnt[(c == 1) as usize] += 1;
    }
    if cnt[0] == 0 || cnt[1] == 0 || n < 3 {
        return (0.0, 1.0);
    }
    let grand = (sum[0] + sum[1]) / n as f64;
    let means = [sum[0] / cnt[0] as f64, sum[1] / cnt[1] as f64];
    let ssb: f64 = (0..2)
        .map(|g| cnt[g] as f64 * (means[g] - grand).powi(2))
        .sum();
    let ssw: f64 = x
        .iter()
        .zip(y)
        .map(|(&v, &c)| (v - means[(c == 1) as usize]).powi(2))
        .sum();
    let df_b = 1.0;
    let df_w = (n - 2) as f64;
    if ssw == 0.0 {
        return if ssb == 0.0 { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
    }
    let f = (ssb / df_b) / (ssw / df_w);
    let p = FisherSnedecor::new(df_b, df_w).map_or(f64::NAN, |d| d.sf(f));
    (f, p)
}

pub(super) fn fit(
    kind: &StageKind,
    cols: &[(String, Vec<f64>)],
    y: &[u8],
    warnings: &mut Vec<String>,
) -> Result<(Vec<String>, Vec<FeatureScore>)> {
    let scores: Vec<FeatureScore> = cols
        .iter()
        .map(|(name, v)| {
            let (f, p) = anova_f(v, y);
            FeatureScore {
                name: name.clone(),
                f,
                p,
            }
        })
        .collect();
    let d = scores.len();
    // Rank by F descending; equal scores keep column order.
    let mut rank: Vec<usize> = (0..d).collect();
    rank.sort_by(|&a, &b| scores[b].f.total_cmp(&scores[a].f).then(a.cmp(&b)));

    let keep: Vec<usize> = match kind {
        StageKind::Kbest { k } => {
            if *k > d {
                warnings.push(format!("k = {k} exceeds the {d} candidate columns; keeping all"));
            }
            rank.into_iter().take(*k).collect()
        }
        StageKind::Percentile { percentile } => {
            let m = (d as f64 * percentile / 100.0).floor() as usize;
            rank.into_iter().take(m).collect()
        }
        StageKind::Fpr { alpha } => (0..d).filter(|&i| scores[i].p < *alpha).collect(),
        _ => unreachable!("not a selector"),
    };
    if keep.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let dropped = (0..d)
        .filter(|i| !keep.contains(i))
        .map(|i| scores[i].name.clone())
        .collect();
    Ok((dropped, scores))
}

pub(super) fn apply(dropped: &[String], f: &Frame) -> Result<Frame> {
    for d in dropped {
        if f.feature_index(d).is_none() {
            return Err(Error::UnknownColumn(d.clone()));
        }
    }
    let mut out = f.clone();
    out.features.retain(|c| !dropped.contains(&c.name));
    Ok(out)
}
