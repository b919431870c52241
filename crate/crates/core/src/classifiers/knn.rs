use crate::frame::Matrix;

/// Stored training set with a Euclidean k-nearest-neighbour vote. Equal
/// distances resolve to the lower training index; a tied vote predicts 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Knn {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub k: usize,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[u8], k: usize) -> Knn {
        Knn {
            x: x.clone(),
            y: y.to_vec(),
            k: k.min(x.rows),
        }
    }

    pub fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..self.x.rows)
            .map(|i| {
                let dist: f64 = self
                    .x
                    .row(i)
                    .iter()
                    .zip(row)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (dist, i)
            })
            .collect();
        let k = self.k;
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
        }
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let nn = self.neighbors(row);
        let ones = nn.iter().filter(|&&i| self.y[i] == 1).count();
        (2 * ones > nn.len()) as u8
    }
}
