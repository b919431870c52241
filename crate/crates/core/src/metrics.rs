//! Whole-pipeline group fairness (SPD, EOD, AOD, ERD) and performance.
//!
//! Every difference is taken unprivileged minus privileged, so a positive
//! value means the predictions favor the unprivileged group.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Group, GroupCounts};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Spd,
    Eod,
    Aod,
    Erd,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Spd, Metric::Eod, Metric::Aod, Metric::Erd];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Spd => "spd",
            Metric::Eod => "eod",
            Metric::Aod => "aod",
            Metric::Erd => "erd",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spd" => Ok(Metric::Spd),
            "eod" => Ok(Metric::Eod),
            "aod" => Ok(Metric::Aod),
            "erd" => Ok(Metric::Erd),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Why a rate (and every metric built on it) is undefined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Undefined {
    EmptyGroup(Group),
    NoPositives(Group),
    NoNegatives(Group),
}

impl fmt::Display for Undefined {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |g: &Group| match g {
            Group::Unprivileged => "unprivileged",
            Group::Privileged => "privileged",
        };
        match self {
            Undefined::EmptyGroup(g) => write!(f, "{} group is empty", name(g)),
            Undefined::NoPositives(g) => write!(f, "{} group has no Y=1 instances", name(g)),
            Undefined::NoNegatives(g) => write!(f, "{} group has no Y=0 instances", name(g)),
        }
    }
}

pub type MetricValue = std::result::Result<f64, Undefined>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub y: u8,
    pub yhat: u8,
    pub group: Group,
}

/// Labels and predictions for one evaluated set of instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    records: Vec<Prediction>,
}

impl PredictionSet {
    pub fn new(records: Vec<Prediction>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for g in [Group::Unprivileged, Group::Privileged] {
            if !records.iter().any(|r| r.group == g) {
                return Err(Error::EmptyGroup(match g {
                    Group::Unprivileged => "unprivileged",
                    Group::Privileged => "privileged",
                }));
            }
        }
        Ok(PredictionSet { records })
    }

    pub fn from_parts(y: &[u8], yhat: &[u8], groups: &[Group]) -> Result<Self> {
        assert_eq!(y.len(), yhat.len());
        assert_eq!(y.len(), groups.len());
        PredictionSet::new(
            y.iter()
                .zip(yhat)
                .zip(groups)
                .map(|((&y, &yhat), &group)| Prediction { y, yhat, group })
                .collect(),
        )
    }

    pub fn records(&self) -> &[Prediction] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn counts(&self) -> GroupCounts {
        let y: Vec<u8> = self.records.iter().map(|r| r.y).collect();
        let g: Vec<Group> = self.records.iter().map(|r| r.group).collect();
        GroupCounts::tally(&y, &g)
    }

    /// Same records with the group designation swapped.
    pub fn swapped(&self) -> Self {
        PredictionSet {
            records: self
                .records
                .iter()
                .map(|r| Prediction {
                    group: r.group.flipped(),
                    ..*r
                })
                .collect(),
        }
    }
}

/// Confusion-matrix cells for one group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }
}

/// Per-group rates; a rate is `None` when its denominator stratum is empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub favorable_rate: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub confusion: Confusion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub unprivileged: RateSet,
    pub privileged: RateSet,
    pub counts: GroupCounts,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl GroupRates {
    pub fn of(ps: &PredictionSet) -> Self {
        let mut cm = [Confusion::default(); 2];
        for r in ps.records() {
            let c = &mut cm[(r.group == Group::Privileged) as usize];
            match (r.y, r.yhat) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fn_ += 1,
                (_, 1) => c.fp += 1,
                _ => c.tn += 1,
            }
        }
        let rates = |c: Confusion| RateSet {
            favorable_rate: ratio(c.tp + c.fp, c.n()),
            tpr: ratio(c.tp, c.positives()),
            fpr: ratio(c.fp, c.negatives()),
            fnr: ratio(c.fn_, c.positives()),
            confusion: c,
        };
        GroupRates {
            unprivileged: rates(cm[0]),
            privileged: rates(cm[1]),
            counts: ps.counts(),
        }
    }

    fn get(&self, g: Group) -> &RateSet {
        match g {
            Group::Unprivileged => &self.unprivileged,
            Group::Privileged => &self.privileged,
        }
    }

    fn favorable(&self, g: Group) -> MetricValue {
        self.get(g).favorable_rate.ok_or(Undefined::EmptyGroup(g))
    }

    fn tpr(&self, g: Group) -> MetricValue {
        self.get(g).tpr.ok_or(Undefined::NoPositives(g))
    }

    fn fpr(&self, g: Group) -> MetricValue {
        self.get(g).fpr.ok_or(Undefined::NoNegatives(g))
    }

    fn fnr(&self, g: Group) -> MetricValue {
        self.get(g).fnr.ok_or(Undefined::NoPositives(g))
    }

    fn diff(&self, f: impl Fn(&Self, Group) -> MetricValue) -> MetricValue {
        Ok(f(self, Group::Unprivileged)? - f(self, Group::Privileged)?)
    }
}

/// `P[Ŷ=1 | unprivileged] − P[Ŷ=1 | privileged]`.
pub fn spd(ps: &PredictionSet) -> MetricValue {
    GroupRates::of(ps).diff(GroupRates::favorable)
}

/// `TPR(u) − TPR(p)`.
pub fn eod(ps: &PredictionSet) -> MetricValue {
    GroupRates::of(ps).diff(GroupRates::tpr)
}

/// `½[(TPR(u) − TPR(p)) + (FPR(u) − FPR(p))]`.
pub fn aod(ps: &PredictionSet) -> MetricValue {
    let r = GroupRates::of(ps);
    Ok(0.5 * (r.diff(GroupRates::tpr)? + r.diff(GroupRates::fpr)?))
}

/// `(FPR(u) − FPR(p)) + (FNR(u) − FNR(p))`.
pub fn erd(ps: &PredictionSet) -> MetricValue {
    let r = GroupRates::of(ps);
    Ok(r.diff(GroupRates::fpr)? + r.diff(GroupRates::fnr)?)
}

pub fn metric(m: Metric, ps: &PredictionSet) -> MetricValue {
    match m {
        Metric::Spd => spd(ps),
        Metric::Eod => eod(ps),
        Metric::Aod => aod(ps),
        Metric::Erd => erd(ps),
    }
}

/// Accuracy and the F1 score of the favorable class (0 when precision and
/// recall are both 0).
pub fn performance(ps: &PredictionSet) -> (f64, f64) {
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for r in ps.records() {
        correct += (r.y == r.yhat) as usize;
        match (r.y, r.yhat) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => {}
        }
    }
    let accuracy = correct as f64 / ps.len() as f64;
    // F1 = 2TP / (2TP + FP + FN), which is 0 whenever TP is 0.
    let denom = 2 * tp + fp + fn_;
    let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
    (accuracy, f1)
}

/// Global fairness and performance of one pipeline on one test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalFairness {
    pub spd: Option<f64>,
    pub eod: Option<f64>,
    pub aod: Option<f64>,
    pub erd: Option<f64>,
    pub accuracy: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<(Metric, Undefined)>,
}

impl GlobalFairness {
    pub fn of(ps: &PredictionSet) -> Self {
        let mut undefined = Vec::new();
        let mut get = |m: Metric| match metric(m, ps) {
            Ok(v) => Some(v),
            Err(u) => {
                undefined.push((m, u));
                None
            }
        };
        let spd = get(Metric::Spd);
        let eod = get(Metric::Eod);
        let aod = get(Metric::Aod);
        let erd = get(Metric::Erd);
        let (accuracy, f1) = performance(ps);
        GlobalFairness {
            spd,
            eod,
            aod,
            erd,
            accuracy,
            f1,
            undefined,
        }
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Spd => self.spd,
            Metric::Eod => self.eod,
            Metric::Aod => self.aod,
            Metric::Erd => self.erd,
        }
    }
}
