//! Stage fairness from paired predictions.
//!
//! For one test set, `yhat_p` is the prediction of the full pipeline and
//! `yhat_pstar` the prediction of the same pipeline with one stage removed
//! (or replaced). Each instance contributes a signed tally in {-1, 0, +1} per
//! metric: +1 when applying the stage moves it in the favorable direction of
//! that metric, -1 for the opposite move. Group tallies are divided by the
//! full test-set stratum sizes, and the stage score is the unprivileged rate
//! minus the privileged rate. Instances whose two predictions agree tally 0
//! everywhere, so only the impact set moves the score.
//!
//! SF_SPD, SF_EOD and SF_AOD lie in [-2, 2]. SF_ERD adds a false-positive and
//! a false-negative rate per group, so its attainable range is [-4, 4].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Group, GroupCounts};
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricValue, Undefined};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredictionTriple {
    pub y: u8,
    pub yhat_p: u8,
    pub yhat_pstar: u8,
    pub group: Group,
}

impl PredictionTriple {
    pub fn changed(&self) -> bool {
        self.yhat_p != self.yhat_pstar
    }

    /// Stage turned the prediction favorable (+1) or unfavorable (−1).
    pub fn spd_change(&self) -> i8 {
        match (self.yhat_p, self.yhat_pstar) {
            (1, 0) => 1,
            (0, 1) => -1,
            _ => 0,
        }
    }

    /// True-positive change: restricted to `Y = 1`.
    pub fn tp_change(&self) -> i8 {
        if self.y == 1 {
            self.spd_change()
        } else {
            0
        }
    }

    /// False-positive change: restricted to `Y = 0`.
    pub fn fp_change(&self) -> i8 {
        if self.y == 0 {
            self.spd_change()
        } else {
            0
        }
    }

    /// False-negative change: `+1` when the stage turns a correct positive
    /// into a miss.
    pub fn fn_change(&self) -> i8 {
        if self.y == 1 {
            -self.spd_change()
        } else {
            0
        }
    }
}

/// The paired predictions of one stage audit on one test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleSet {
    triples: Vec<PredictionTriple>,
}

impl TripleSet {
    pub fn new(triples: Vec<PredictionTriple>) -> Result<Self> {
        if triples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !triples.iter().any(|t| t.group == Group::Unprivileged) {
            return Err(Error::EmptyGroup("unprivileged"));
        }
        if !triples.iter().any(|t| t.group == Group::Privileged) {
            return Err(Error::EmptyGroup("privileged"));
        }
        Ok(TripleSet { triples })
    }

    pub fn triples(&self) -> &[PredictionTriple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn counts(&self) -> GroupCounts {
        let y: Vec<u8> = self.triples.iter().map(|t| t.y).collect();
        let g: Vec<Group> = self.triples.iter().map(|t| t.group).collect();
        GroupCounts::tally(&y, &g)
    }

    pub fn swapped_groups(&self) -> Self {
        TripleSet {
            triples: self
                .triples
                .iter()
                .map(|t| PredictionTriple {
                    group: t.group.flipped(),
                    ..*t
                })
                .collect(),
        }
    }

    pub fn swapped_pipelines(&self) -> Self {
        TripleSet {
            triples: self
                .triples
                .iter()
                .map(|t| PredictionTriple {
                    yhat_p: t.yhat_pstar,
                    yhat_pstar: t.yhat_p,
                    ..*t
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactSet {
    pub indicators: Vec<u8>,
    pub changed: usize,
}

pub fn impact_set(t: &TripleSet) -> ImpactSet {
    let indicators: Vec<u8> = t.triples().iter().map(|x| x.changed() as u8).collect();
    let changed = indicators.iter().map(|&i| i as usize).sum();
    ImpactSet {
        indicators,
        changed,
    }
}

/// Signed change tallies for one group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeTally {
    pub spd: i64,
    pub eod: i64,
    pub tp: i64,
    pub fp: i64,
    #[serde(rename = "fn")]
    pub fn_: i64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTallies {
    pub unprivileged: ChangeTally,
    pub privileged: ChangeTally,
}

impl GroupTallies {
    pub fn of(t: &TripleSet) -> Self {
        let mut out = GroupTallies::default();
        for x in t.triples() {
            let tally = match x.group {
                Group::Unprivileged => &mut out.unprivileged,
                Group::Privileged => &mut out.privileged,
            };
            tally.spd += x.spd_change() as i64;
            tally.tp += x.tp_change() as i64;
            tally.eod += x.tp_change() as i64;
            tally.fp += x.fp_change() as i64;
            tally.fn_ += x.fn_change() as i64;
        }
        out
    }

    pub fn get(&self, g: Group) -> &ChangeTally {
        match g {
            Group::Unprivileged => &self.unprivileged,
            Group::Privileged => &self.privileged,
        }
    }
}

fn rate(tally: i64, den: usize, undefined: Undefined) -> MetricValue {
    if den == 0 {
        Err(undefined)
    } else {
        Ok(tally as f64 / den as f64)
    }
}

fn sfr(m: Metric, tally: &ChangeTally, gc: &GroupCounts, g: Group) -> MetricValue {
    let n = gc.size(g);
    let pos = gc.positives(g);
    let neg = gc.negatives(g);
    match m {
        Metric::Spd => rate(tally.spd, n, Undefined::EmptyGroup(g)),
        Metric::Eod => rate(tally.eod, pos, Undefined::NoPositives(g)),
        Metric::Aod => {
            let tp = rate(tally.tp, pos, Undefined::NoPositives(g))?;
            let fp = rate(tally.fp, neg, Undefined::NoNegatives(g))?;
            Ok(0.5 * (tp + fp))
        }
        Metric::Erd => {
            let fp = rate(tally.fp, neg, Undefined::NoNegatives(g))?;
            let fn_ = rate(tally.fn_, pos, Undefined::NoPositives(g))?;
            Ok(fp + fn_)
        }
    }
}

fn sf(m: Metric, t: &TripleSet, gc: &GroupCounts) -> MetricValue {
    let tallies = GroupTallies::of(t);
    let u = sfr(m, &tallies.unprivileged, gc, Group::Unprivileged)?;
    let p = sfr(m, &tallies.privileged, gc, Group::Privileged)?;
    Ok(u - p)
}

pub fn sf_spd(t: &TripleSet, gc: &GroupCounts) -> MetricValue {
    sf(Metric::Spd, t, gc)
}

pub fn sf_eod(t: &TripleSet, gc: &GroupCounts) -> MetricValue {
    sf(Metric::Eod, t, gc)
}

pub fn sf_aod(t: &TripleSet, gc: &GroupCounts) -> MetricValue {
    sf(Metric::Aod, t, gc)
}

pub fn sf_erd(t: &TripleSet, gc: &GroupCounts) -> MetricValue {
    sf(Metric::Erd, t, gc)
}

pub fn stage_metric(m: Metric, t: &TripleSet, gc: &GroupCounts) -> MetricValue {
    sf(m, t, gc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub unprivileged: Option<f64>,
    pub privileged: Option<f64>,
}

/// Direction-specific flip fractions within one group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlipRates {
    /// Fraction whose prediction became favorable once the stage is applied.
    pub to_favorable: f64,
    /// Fraction whose prediction became unfavorable once the stage is applied.
    pub to_unfavorable: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFairnessReport {
    pub sf_spd: Option<f64>,
    pub sf_eod: Option<f64>,
    pub sf_aod: Option<f64>,
    pub sf_erd: Option<f64>,
    pub rates: BTreeMap<Metric, RatePair>,
    pub tallies: GroupTallies,
    pub counts: GroupCounts,
    pub impact_fraction: f64,
    pub flips_unprivileged: FlipRates,
    pub flips_privileged: FlipRates,
    pub undefined: BTreeMap<Metric, Undefined>,
}

impl StageFairnessReport {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Spd => self.sf_spd,
            Metric::Eod => self.sf_eod,
            Metric::Aod => self.sf_aod,
            Metric::Erd => self.sf_erd,
        }
    }
}

/// All four stage metrics plus their per-group ingredients. Undefined
/// metrics are flagged individually; the report itself always succeeds.
pub fn stage_report(t: &TripleSet, gc: &GroupCounts) -> StageFairnessReport {
    let tallies = GroupTallies::of(t);
    let mut rates = BTreeMap::new();
    let mut undefined = BTreeMap::new();
    let mut values = [None; 4];
    for (slot, m) in Metric::ALL.into_iter().enumerate() {
        let u = sfr(m, &tallies.unprivileged, gc, Group::Unprivileged);
        let p = sfr(m, &tallies.privileged, gc, Group::Privileged);
        rates.insert(
            m,
            RatePair {
                unprivileged: u.ok(),
                privileged: p.ok(),
            },
        );
        match (u, p) {
            (Ok(u), Ok(p)) => values[slot] = Some(u - p),
            (Err(e), _) | (_, Err(e)) => {
                undefined.insert(m, e);
            }
        }
    }

    let mut flips = [(0usize, 0usize); 2];
    for x in t.triples() {
        let f = &mut flips[(x.group == Group::Privileged) as usize];
        match x.spd_change() {
            1 => f.0 += 1,
            -1 => f.1 += 1,
            _ => {}
        }
    }
    let flip_rates = |(fav, unfav): (usize, usize), n: usize| {
        if n == 0 {
            FlipRates::default()
        } else {
            FlipRates {
                to_favorable: fav as f64 / n as f64,
                to_unfavorable: unfav as f64 / n as f64,
            }
        }
    };

    StageFairnessReport {
        sf_spd: values[0],
        sf_eod: values[1],
        sf_aod: values[2],
        sf_erd: values[3],
        rates,
        tallies,
        counts: *gc,
        impact_fraction: impact_set(t).changed as f64 / t.len() as f64,
        flips_unprivileged: flip_rates(flips[0], gc.n_u),
        flips_privileged: flip_rates(flips[1], gc.n_p),
        undefined,
    }
}
