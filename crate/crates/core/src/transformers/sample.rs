use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::ColumnData;
use crate::error::{Error, Result};
use crate::frame::{Frame, Matrix};

fn class_sizes(y: &[u8]) -> [usize; 2] {
    let ones = y.iter().filter(|&&v| v == 1).count();
    [y.len() - ones, ones]
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest of `candidates` to row `i` (excluding `i`), by distance
/// then index.
fn nearest(m: &Matrix, i: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| (sq_dist(m.row(i), m.row(j)), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Appends synthetic minority rows until both classes have equal counts.
pub(super) fn smote(train: &Frame, k: usize, seed: u64) -> Result<Frame> {
    let sizes = class_sizes(&train.labels);
    if sizes[0] == sizes[1] {
        return Ok(train.clone());
    }
    let minority = (sizes[1] < sizes[0]) as u8;
    let n_min = sizes[minority as usize];
    if n_min < 2 {
        return Err(Error::MinorityTooSmall(n_min));
    }
    let k = k.min(n_min - 1);
    let x = train.matrix()?;
    let min_idx: Vec<usize> = (0..train.len())
        .filter(|&i| train.labels[i] == minority)
        .collect();
    let neighbors: Vec<Vec<usize>> = min_idx.iter().map(|&i| nearest(&x, i, &min_idx, k)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_new = sizes[1 - minority as usize] - n_min;
    let mut out = train.clone();
    let mut base_rows = Vec::with_capacity(n_new);
    let mut synth: Vec<Vec<f64>> = Vec::with_capacity(n_new);
    for _ in 0..n_new {
        let a = rng.random_range(0..n_min);
        let b = neighbors[a][rng.random_range(0..k)];
        let gap: f64 = rng.random();
        let (ra, rb) = (x.row(min_idx[a]), x.row(b));
        synth.push(ra.iter().zip(rb).map(|(p, q)| p + gap * (q - p)).collect());
        base_rows.push(min_idx[a]);
    }
    for (j, col) in out.features.iter_mut().enumerate() {
        if let ColumnData::Numeric(v) = &mut col.data {
            v.extend(synth.iter().map(|s| Some(s[j])));
        }
    }
    // Non-feature columns and group membership follow the base sample.
    let extra = train.take(&base_rows);
    for (col, add) in out.aux.iter_mut().zip(extra.aux) {
        match (&mut col.data, add.data) {
            (ColumnData::Numeric(v), ColumnData::Numeric(w)) => v.extend(w),
            (ColumnData::Categorical(v), ColumnData::Categorical(w)) => v.extend(w),
            _ => unreachable!("aux column kinds are fixed"),
        }
    }
    out.labels.extend(std::iter::repeat_n(minority, n_new));
    out.groups.extend(extra.groups);
    out.row_ids.extend(std::iter::repeat_n(None, n_new));
    Ok(out)
}

/// Repeated edited nearest neighbours for k = 1, 2, 3: a majority row is
/// removed when the vote of its k nearest neighbours (ties to label 0)
/// disagrees with it. A round that would leave the majority smaller than the
/// minority is discarded and ends the procedure.
pub(super) fn all_knn(train: &Frame, warnings: &mut Vec<String>) -> Result<Frame> {
    let sizes = class_sizes(&train.labels);
    if sizes[0] == sizes[1] {
        return Ok(train.clone());
    }
    let majority = (sizes[1] > sizes[0]) as u8;
    let n_min = sizes[1 - majority as usize];
    let x = train.matrix()?;
    let mut alive: Vec<usize> = (0..train.len()).collect();
    for k in 1..=3 {
        let kept: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&i| {
                if train.labels[i] != majority {
                    return true;
                }
                let nn = nearest(&x, i, &alive, k);
                let ones = nn.iter().filter(|&&j| train.labels[j] == 1).count();
                let vote = (2 * ones > nn.len()) as u8;
                vote == majority
            })
            .collect();
        let n_maj = kept.iter().filter(|&&i| train.labels[i] == majority).count();
        if n_maj < n_min {
            warnings.push(format!("stopped before k = {k}: majority would fall below minority"));
            break;
        }
        alive = kept;
    }
    Ok(train.take(&alive))
}

/// Seeded uniform downsampling of the majority class to the minority count.
pub(super) fn random_undersample(train: &Frame, seed: u64) -> Result<Frame> {
    let sizes = class_sizes(&train.labels);
    if sizes[0] == sizes[1] {
        return Ok(train.clone());
    }
    let majority = (sizes[1] > sizes[0]) as u8;
    let n_min = sizes[1 - majority as usize];
    if n_min == 0 {
        return Err(Error::MinorityTooSmall(0));
    }
    let maj: Vec<usize> = (0..train.len())
        .filter(|&i| train.labels[i] == majority)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, maj.len(), n_min);
    let mut keep: Vec<usize> = (0..train.len())
        .filter(|&i| train.labels[i] != majority)
        .chain(chosen.iter().map(|j| maj[j]))
        .collect();
    keep.sort_unstable();
    Ok(train.take(&keep))
}
