use serde::{Deserialize, Serialize};

/// Summary of one quantity over repeats. Repeats where the quantity was
/// undefined (or the repeat failed) are stored as `None` and excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Option<f64>,
    /// Sample standard deviation; needs two valid repeats.
    pub std: Option<f64>,
    /// `std / √valid`; needs two valid repeats.
    pub stderr: Option<f64>,
    pub valid: usize,
    pub undefined: usize,
    pub values: Vec<Option<f64>>,
}

impl Aggregate {
    pub fn of(values: Vec<Option<f64>>) -> Self {
        let ok: Vec<f64> = values.iter().flatten().copied().collect();
        let valid = ok.len();
        let mean = (valid > 0).then(|| ok.iter().sum::<f64>() / valid as f64);
        let std = match (mean, valid) {
            (Some(m), n) if n >= 2 => {
                Some((ok.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt())
            }
            _ => None,
        };
        Aggregate {
            mean,
            std,
            stderr: std.map(|s| s / (valid as f64).sqrt()),
            valid,
            undefined: values.len() - valid,
            values,
        }
    }

    /// Fraction of valid repeats with a strictly positive value.
    pub fn positive_fraction(&self) -> Option<f64> {
        (self.valid > 0).then(|| {
            self.values.iter().flatten().filter(|v| **v > 0.0).count() as f64 / self.valid as f64
        })
    }
}

/// Sign with a dead zone: values with `|x| < eps` count as zero.
pub fn sign(x: f64, eps: f64) -> i8 {
    if x.abs() < eps {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_skips_undefined() {
        let a = Aggregate::of(vec![Some(1.0), None, Some(3.0)]);
        assert_eq!(a.mean, Some(2.0));
        assert_eq!(a.valid, 2);
        assert_eq!(a.undefined, 1);
        assert!((a.std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((a.stderr.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_value_has_no_spread() {
        let a = Aggregate::of(vec![Some(0.4)]);
        assert_eq!(a.mean, Some(0.4));
        assert_eq!(a.std, None);
        assert_eq!(a.stderr, None);
    }

    #[test]
    fn dead_zone() {
        assert_eq!(sign(0.004, 0.005), 0);
        assert_eq!(sign(-0.004, 0.005), 0);
        assert_eq!(sign(0.005, 0.005), 1);
        assert_eq!(sign(-0.2, 0.005), -1);
    }
}
