use nalgebra::{DMatrix, DVector};

use crate::frame::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Logistic {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Per-column `(mean, std)` applied before the linear map, if enabled.
    pub scaling: Option<Vec<(f64, f64)>>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(theta: &[f64], row: &[f64]) -> f64 {
    let d = row.len();
    theta[..d].iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + theta[d]
}

/// Mean log-loss plus `‖w‖² / (2Cn)`; `theta` is the weights followed by the
/// unpenalized intercept.
pub fn logistic_objective(theta: &[f64], x: &Matrix, y: &[u8], c: f64) -> f64 {
    let n = x.rows as f64;
    let loss: f64 = (0..x.rows)
        .map(|i| {
            let z = logit(theta, x.row(i));
            softplus(z) - y[i] as f64 * z
        })
        .sum();
    let w2: f64 = theta[..x.cols].iter().map(|w| w * w).sum();
    loss / n + w2 / (2.0 * c * n)
}

pub fn logistic_gradient(theta: &[f64], x: &Matrix, y: &[u8], c: f64) -> Vec<f64> {
    let n = x.rows as f64;
    let d = x.cols;
    let mut g = vec![0.0; d + 1];
    for i in 0..x.rows {
        let row = x.row(i);
        let r = sigmoid(logit(theta, row)) - y[i] as f64;
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
        g[d] += r;
    }
    for (j, gj) in g.iter_mut().enumerate() {
        *gj /= n;
        if j < d {
            *gj += theta[j] / (c * n);
        }
    }
    g
}

/// Hessian of [`logistic_objective`] at `theta`.
fn hessian(theta: &[f64], x: &Matrix, c: f64) -> DMatrix<f64> {
    let d = x.cols + 1;
    let n = x.rows as f64;
    let mut h = DMatrix::<f64>::zeros(d, d);
    let mut row1 = vec![1.0; d];
    for i in 0..x.rows {
        let row = x.row(i);
        row1[..x.cols].copy_from_slice(row);
        let p = sigmoid(logit(theta, row));
        let w = p * (1.0 - p);
        if w == 0.0 {
            continue;
        }
        for a in 0..d {
            let wa = w * row1[a];
            if wa == 0.0 {
                continue;
            }
            for b in a..d {
                h[(a, b)] += wa * row1[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    h /= n;
    for j in 0..x.cols {
        h[(j, j)] += 1.0 / (c * n);
    }
    h
}

fn newton_direction(h: DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let d = g.len();
    let rhs = DVector::from_column_slice(g);
    let mut ridge = 0.0;
    loop {
        let mut m = h.clone();
        for j in 0..d {
            m[(j, j)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(&rhs).iter().map(|v| -v).collect();
        }
        ridge = if ridge == 0.0 { 1e-10 } else { ridge * 10.0 };
    }
}

impl Logistic {
    /// Damped Newton iterations with a backtracking (Armijo) line search;
    /// stops once the gradient norm drops below `tol` or after `max_iter`
    /// steps.
    pub fn fit(x: &Matrix, y: &[u8], c: f64, max_iter: usize, tol: f64, standardize: bool) -> Self {
        let (x, scaling) = if standardize {
            let stats: Vec<(f64, f64)> = (0..x.cols)
                .map(|j| {
                    let col = x.column(j);
                    let m = col.iter().sum::<f64>() / col.len() as f64;
                    let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
                    (m, if s > 0.0 { s } else { 1.0 })
                })
                .collect();
            let mut z = x.clone();
            for i in 0..z.rows {
                for (j, (m, s)) in stats.iter().enumerate() {
                    z.data[i * z.cols + j] = (z.data[i * z.cols + j] - m) / s;
                }
            }
            (z, Some(stats))
        } else {
            (x.clone(), None)
        };

        let mut theta = vec![0.0; x.cols + 1];
        let mut f = logistic_objective(&theta, &x, y, c);
        let mut iterations = 0;
        let mut gradient_norm = f64::INFINITY;
        while iterations < max_iter {
            let g = logistic_gradient(&theta, &x, y, c);
            gradient_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gradient_norm < tol {
                break;
            }
            let dir = newton_direction(hessian(&theta, &x, c), &g);
            let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..50 {
                let cand: Vec<f64> = theta.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                let fc = logistic_objective(&cand, &x, y, c);
                if fc <= f + 1e-4 * t * slope {
                    theta = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            if !accepted {
                break;
            }
        }
        let intercept = theta.pop().unwrap();
        Logistic {
            weights: theta,
            intercept,
            scaling,
            iterations,
            gradient_norm,
        }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        let z: f64 = match &self.scaling {
            Some(s) => self
                .weights
                .iter()
                .zip(row)
                .zip(s)
                .map(|((w, x), (m, sd))| w * (x - m) / sd)
                .sum(),
            None => self.weights.iter().zip(row).map(|(w, x)| w * x).sum(),
        };
        z + self.intercept
    }

    /// Probability 0.5 (zero logit) predicts 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        (self.decision(row) > 0.0) as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_points_fit_perfectly() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0 - 1.0]).collect();
        let y: Vec<u8> = (0..20).map(|i| (i >= 10) as u8).collect();
        let x = Matrix::from_rows(&rows);
        let m = Logistic::fit(&x, &y, 100.0, 2000, 1e-6, false);
        let acc = (0..20).filter(|&i| m.predict_row(x.row(i)) == y[i]).count();
        assert_eq!(acc, 20);
    }

    #[test]
    fn zero_weights_follow_intercept_sign() {
        let m = Logistic {
            weights: vec![0.0, 0.0],
            intercept: 0.3,
            scaling: None,
            iterations: 0,
            gradient_norm: 0.0,
        };
        assert_eq!(m.predict_row(&[5.0, -9.0]), 1);
        let m = Logistic { intercept: -0.3, ..m };
        assert_eq!(m.predict_row(&[5.0, -9.0]), 0);
        let m = Logistic { intercept: 0.0, ..m };
        assert_eq!(m.predict_row(&[5.0, -9.0]), 0);
    }
}
