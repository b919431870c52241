#![allow(dead_code)]
//! Fixtures and from-definition oracles shared by the integration tests.

use std::path::PathBuf;

use rand::Rng;

use fairstage::data::{ColumnData, Group};
use fairstage::frame::{Column, Frame};
use fairstage::metrics::Prediction;
use fairstage::stagefair::PredictionTriple;

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Exact rational `num / den`; `den > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratio {
    pub num: i64,
    pub den: i64,
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Option<Ratio> {
        (den != 0).then_some(Ratio { num, den })
    }

    pub fn sub(self, o: Ratio) -> Ratio {
        Ratio {
            num: self.num * o.den - o.num * self.den,
            den: self.den * o.den,
        }
    }

    pub fn add(self, o: Ratio) -> Ratio {
        self.sub(Ratio { num: -o.num, den: o.den })
    }

    pub fn half(self) -> Ratio {
        Ratio {
            num: self.num,
            den: 2 * self.den,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Cm {
    tp: i64,
    fp: i64,
    tn: i64,
    fn_: i64,
}

impl Cm {
    fn add(&mut self, y: u8, yhat: u8) {
        match (y, yhat) {
            (1, 1) => self.tp += 1,
            (1, 0) => self.fn_ += 1,
            (0, 1) => self.fp += 1,
            _ => self.tn += 1,
        }
    }
    fn n(&self) -> i64 {
        self.tp + self.fp + self.tn + self.fn_
    }
    fn pos(&self) -> i64 {
        self.tp + self.fn_
    }
    fn neg(&self) -> i64 {
        self.fp + self.tn
    }
}

fn group_index(g: Group) -> usize {
    match g {
        Group::Unprivileged => 0,
        Group::Privileged => 1,
    }
}

/// Per-group confusion matrices of one prediction vector.
fn confusion(records: impl Iterator<Item = (u8, u8, Group)>) -> [Cm; 2] {
    let mut cm = [Cm::default(); 2];
    for (y, yhat, g) in records {
        cm[group_index(g)].add(y, yhat);
    }
    cm
}

/// SPD, EOD, AOD, ERD of one prediction vector, by hand from the group
/// confusion matrices; `None` where a denominator is empty.
pub fn global_oracle(records: &[Prediction]) -> [Option<Ratio>; 4] {
    let cm = confusion(records.iter().map(|r| (r.y, r.yhat, r.group)));
    let fav = |c: &Cm| Ratio::new(c.tp + c.fp, c.n());
    let tpr = |c: &Cm| Ratio::new(c.tp, c.pos());
    let fpr = |c: &Cm| Ratio::new(c.fp, c.neg());
    let fnr = |c: &Cm| Ratio::new(c.fn_, c.pos());
    let diff = |f: &dyn Fn(&Cm) -> Option<Ratio>| Some(f(&cm[0])?.sub(f(&cm[1])?));
    let spd = diff(&fav);
    let eod = diff(&tpr);
    let aod = (|| Some(diff(&tpr)?.add(diff(&fpr)?).half()))();
    let erd = (|| Some(diff(&fpr)?.add(diff(&fnr)?)))();
    [spd, eod, aod, erd]
}

/// SF_SPD, SF_EOD, SF_AOD, SF_ERD from their definitions. Per group, each
/// rate is the change in the corresponding confusion count when the stage is
/// applied (P minus P*), divided by the full stratum size; the false-negative
/// change counts a new miss as +1. The score is unprivileged minus privileged.
pub fn sf_oracle(triples: &[PredictionTriple]) -> [Option<Ratio>; 4] {
    let with = confusion(triples.iter().map(|t| (t.y, t.yhat_p, t.group)));
    let without = confusion(triples.iter().map(|t| (t.y, t.yhat_pstar, t.group)));
    let rate = |g: usize, f: &dyn Fn(&Cm) -> i64, den: &dyn Fn(&Cm) -> i64| {
        Ratio::new(f(&with[g]) - f(&without[g]), den(&with[g]))
    };
    let n = |c: &Cm| c.n();
    let pos = |c: &Cm| c.pos();
    let neg = |c: &Cm| c.neg();
    let fav = |c: &Cm| c.tp + c.fp;
    let tp = |c: &Cm| c.tp;
    let fp = |c: &Cm| c.fp;
    let fn_ = |c: &Cm| c.fn_;
    let per_group = |g: usize| -> [Option<Ratio>; 4] {
        let spd = rate(g, &fav, &n);
        let eod = rate(g, &tp, &pos);
        let aod = (|| Some(rate(g, &tp, &pos)?.add(rate(g, &fp, &neg)?).half()))();
        let erd = (|| Some(rate(g, &fp, &neg)?.add(rate(g, &fn_, &pos)?)))();
        [spd, eod, aod, erd]
    };
    let (u, p) = (per_group(0), per_group(1));
    std::array::from_fn(|i| Some(u[i]?.sub(p[i]?)))
}

pub fn close(a: Option<f64>, b: Option<Ratio>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(r)) => (x - r.to_f64()).abs() <= tol,
        _ => false,
    }
}

/// Triple `i` of the 16 per-instance states: bits are y, ŷ(P), ŷ(P*), group.
pub fn triple_of_code(code: u32) -> PredictionTriple {
    PredictionTriple {
        y: (code & 1) as u8,
        yhat_p: ((code >> 1) & 1) as u8,
        yhat_pstar: ((code >> 2) & 1) as u8,
        group: if code & 8 == 0 { Group::Unprivileged } else { Group::Privileged },
    }
}

pub fn random_group(rng: &mut impl Rng) -> Group {
    if rng.random_bool(0.5) {
        Group::Unprivileged
    } else {
        Group::Privileged
    }
}

/// `n` random triples in which every (group, label) stratum is non-empty,
/// so all four stage metrics are defined. `n >= 4`.
pub fn random_triples(rng: &mut impl Rng, n: usize, same_predictions: bool) -> Vec<PredictionTriple> {
    let mut out: Vec<PredictionTriple> = (0..n)
        .map(|i| {
            let (y, group) = if i < 4 {
                ((i % 2) as u8, if i < 2 { Group::Unprivileged } else { Group::Privileged })
            } else {
                (rng.random_range(0..2), random_group(rng))
            };
            let yhat_p = rng.random_range(0..2);
            let yhat_pstar = if same_predictions { yhat_p } else { rng.random_range(0..2) };
            PredictionTriple {
                y,
                yhat_p,
                yhat_pstar,
                group,
            }
        })
        .collect();
    // keep the forced strata from always sitting at the front
    for i in (1..out.len()).rev() {
        out.swap(i, rng.random_range(0..=i));
    }
    out
}

pub fn numeric_column(name: &str, v: &[f64]) -> Column {
    Column::numeric(name, v.to_vec())
}

pub fn categorical_column(name: &str, v: &[&str]) -> Column {
    Column {
        name: name.to_string(),
        data: ColumnData::Categorical(v.iter().map(|s| Some(s.to_string())).collect()),
    }
}

/// A frame of the given feature columns; groups alternate, labels as given.
pub fn frame(features: Vec<Column>, labels: Vec<u8>) -> Frame {
    let n = labels.len();
    Frame {
        features,
        aux: Vec::new(),
        groups: (0..n)
            .map(|i| if i % 2 == 0 { Group::Unprivileged } else { Group::Privileged })
            .collect(),
        row_ids: (0..n).map(Some).collect(),
        labels,
    }
}

pub fn column_values(f: &Frame, name: &str) -> Vec<f64> {
    f.features
        .iter()
        .find(|c| c.name == name)
        .and_then(|c| c.dense())
        .unwrap_or_else(|| panic!("no dense column `{name}`"))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// One-way ANOVA F for two classes via the pooled within-class variance.
pub fn anova_f_direct(x: &[f64], y: &[u8]) -> f64 {
    let a: Vec<f64> = x.iter().zip(y).filter(|(_, &c)| c == 0).map(|(&v, _)| v).collect();
    let b: Vec<f64> = x.iter().zip(y).filter(|(_, &c)| c == 1).map(|(&v, _)| v).collect();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(&a), mean(&b));
    let pooled = ((na - 1.0) * sample_std(&a).powi(2) + (nb - 1.0) * sample_std(&b).powi(2)) / (na + nb - 2.0);
    // two groups: F = t², t the pooled-variance two-sample statistic
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    t * t
}
