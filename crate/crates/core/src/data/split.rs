use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::Dataset;
use crate::error::{Error, Result};

/// A deterministic train/test partition of one dataset.
#[derive(Clone, Debug)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub train_fraction: f64,
}

impl SplitPair {
    /// Digest of the row ids on each side; equal fingerprints mean the same
    /// partition of the same source rows.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for id in self.train.row_ids() {
            h.update((*id as u64).to_le_bytes());
        }
        h.update(b"|");
        for id in self.test.row_ids() {
            h.update((*id as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Shuffles with a ChaCha stream seeded by `seed` and cuts at
/// `round(n * fraction)`. With `stratify_on_label`, each class is shuffled
/// and cut separately. Both sides keep source row order.
pub fn split(d: &Dataset, fraction: f64, seed: u64, stratify_on_label: bool) -> Result<SplitPair> {
    let n = d.len();
    let nf = n as f64;
    if !(fraction > 0.0 && fraction < 1.0) || nf * fraction < 1.0 || nf * (1.0 - fraction) < 1.0 {
        return Err(Error::DegenerateFraction { fraction, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (mut train, mut test) = if stratify_on_label {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in [0u8, 1u8] {
            let mut idx: Vec<usize> = (0..n).filter(|&i| d.labels()[i] == class).collect();
            let k = idx.len();
            let cut = (k as f64 * fraction).round() as usize;
            if cut == 0 || cut == k {
                return Err(Error::StratifyImpossible { class, count: k });
            }
            idx.shuffle(&mut rng);
            train.extend_from_slice(&idx[..cut]);
            test.extend_from_slice(&idx[cut..]);
        }
        (train, test)
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let cut = ((nf * fraction).round() as usize).clamp(1, n - 1);
        let test = idx.split_off(cut);
        (idx, test)
    };
    train.sort_unstable();
    test.sort_unstable();

    Ok(SplitPair {
        train: d.subset(&train),
        test: d.subset(&test),
        seed,
        train_fraction: fraction,
    })
}
