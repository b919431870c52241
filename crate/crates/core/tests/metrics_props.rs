mod common;

use proptest::prelude::*;

use fairstage::data::Group;
use fairstage::metrics::{self, GlobalFairness, Metric, Prediction, PredictionSet};

use common::{close, global_oracle};

fn prediction() -> impl Strategy<Value = Prediction> {
    (0u8..2, 0u8..2, any::<bool>()).prop_map(|(y, yhat, g)| Prediction {
        y,
        yhat,
        group: if g { Group::Privileged } else { Group::Unprivileged },
    })
}

fn prediction_set() -> impl Strategy<Value = PredictionSet> {
    prop::collection::vec(prediction(), 2..80).prop_filter_map("both groups", |v| PredictionSet::new(v).ok())
}

proptest! {
    #[test]
    fn matches_confusion_matrices(ps in prediction_set()) {
        let want = global_oracle(ps.records());
        for (m, w) in Metric::ALL.into_iter().zip(want) {
            prop_assert!(close(metrics::metric(m, &ps).ok(), w, 1e-12));
        }
    }

    #[test]
    fn bounded(ps in prediction_set()) {
        let g = GlobalFairness::of(&ps);
        for m in [Metric::Spd, Metric::Eod, Metric::Aod] {
            if let Some(v) = g.get(m) {
                prop_assert!(v.abs() <= 1.0);
            }
        }
        if let Some(v) = g.erd {
            prop_assert!(v.abs() <= 2.0);
        }
        prop_assert!((0.0..=1.0).contains(&g.accuracy));
        prop_assert!((0.0..=1.0).contains(&g.f1));
    }

    #[test]
    fn swapping_groups_negates(ps in prediction_set()) {
        let sw = ps.swapped();
        for m in Metric::ALL {
            prop_assert_eq!(metrics::metric(m, &ps).ok().map(|v| -v), metrics::metric(m, &sw).ok());
        }
    }

    #[test]
    fn performance_by_hand(ps in prediction_set()) {
        let r = ps.records();
        let correct = r.iter().filter(|p| p.y == p.yhat).count() as f64;
        let tp = r.iter().filter(|p| p.y == 1 && p.yhat == 1).count() as f64;
        let predicted = r.iter().filter(|p| p.yhat == 1).count() as f64;
        let actual = r.iter().filter(|p| p.y == 1).count() as f64;
        let f1 = if tp == 0.0 { 0.0 } else {
            let (prec, rec) = (tp / predicted, tp / actual);
            2.0 * prec * rec / (prec + rec)
        };
        let (acc, got) = metrics::performance(&ps);
        prop_assert!((acc - correct / r.len() as f64).abs() < 1e-12);
        prop_assert!((got - f1).abs() < 1e-12);
    }
}

#[test]
fn hand_computed_example() {
    use Group::*;
    let p = |y, yhat, group| Prediction { y, yhat, group };
    // unprivileged: TP, FN, TN ; privileged: TP, FP, TN
    let ps = PredictionSet::new(vec![
        p(1, 1, Unprivileged),
        p(1, 0, Unprivileged),
        p(0, 0, Unprivileged),
        p(1, 1, Privileged),
        p(0, 1, Privileged),
        p(0, 0, Privileged),
    ])
    .unwrap();
    assert!((metrics::spd(&ps).unwrap() - (1.0 / 3.0 - 2.0 / 3.0)).abs() < 1e-15);
    assert_eq!(metrics::eod(&ps).unwrap(), 0.5 - 1.0);
    assert_eq!(metrics::aod(&ps).unwrap(), 0.5 * ((0.5 - 1.0) + (0.0 - 0.5)));
    assert_eq!(metrics::erd(&ps).unwrap(), (0.0 - 0.5) + (0.5 - 0.0));
}

#[test]
fn undefined_rates_are_reported() {
    use Group::*;
    let ps = PredictionSet::new(vec![
        Prediction { y: 0, yhat: 1, group: Unprivileged },
        Prediction { y: 1, yhat: 1, group: Privileged },
        Prediction { y: 0, yhat: 0, group: Privileged },
    ])
    .unwrap();
    let g = GlobalFairness::of(&ps);
    assert!(g.spd.is_some());
    assert!(g.eod.is_none() && g.aod.is_none() && g.erd.is_none());
    assert_eq!(g.undefined.len(), 3);
}
