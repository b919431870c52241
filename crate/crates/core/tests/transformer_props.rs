mod common;

use proptest::prelude::*;

use fairstage::frame::Frame;
use fairstage::transformers::{self, yeo_johnson, StageKind, StageSpec, StageState};

use common::{column_values, frame, mean, numeric_column, sample_std};

/// Three numeric columns of `n` rows with enough spread to be scaled.
fn data() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (8usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(-1e3f64..1e3, n), 3)
                .prop_filter("spread", |cols| cols.iter().all(|c| sample_std(c) > 1e-3)),
            prop::collection::vec(0u8..2, n).prop_filter("both labels", |y| y.contains(&0) && y.contains(&1)),
        )
    })
}

fn build(cols: &[Vec<f64>], y: &[u8]) -> Frame {
    frame(
        cols.iter()
            .enumerate()
            .map(|(j, c)| numeric_column(&format!("x{j}"), c))
            .collect(),
        y.to_vec(),
    )
}

fn fit(kind: StageKind, f: &Frame) -> (transformers::FittedStage, Frame) {
    transformers::fit(&StageSpec::new(kind).unwrap(), f, 11).unwrap()
}

fn rows(f: &Frame) -> Vec<Vec<f64>> {
    let m = f.matrix().unwrap();
    (0..m.rows).map(|i| m.row(i).to_vec()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zscore_standardizes_training_data((cols, y) in data()) {
        let (_, out) = fit(StageKind::Zscore, &build(&cols, &y));
        for j in 0..3 {
            let v = column_values(&out, &format!("x{j}"));
            prop_assert!(mean(&v).abs() < 1e-9);
            prop_assert!((sample_std(&v) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn minmax_and_maxabs_ranges((cols, y) in data()) {
        let f = build(&cols, &y);
        let (_, mm) = fit(StageKind::Minmax, &f);
        let (_, ma) = fit(StageKind::Maxabs, &f);
        for r in rows(&mm) {
            prop_assert!(r.iter().all(|x| (0.0..=1.0).contains(x)));
        }
        for r in rows(&ma) {
            prop_assert!(r.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn normalizers_give_unit_rows((cols, y) in data()) {
        let f = build(&cols, &y);
        let (_, l1) = fit(StageKind::L1, &f);
        let (_, l2) = fit(StageKind::L2, &f);
        for (a, b) in rows(&l1).iter().zip(rows(&l2)) {
            prop_assert!((a.iter().map(|x| x.abs()).sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((b.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn apply_is_row_wise((cols, y) in data(), cut in 1usize..7) {
        // a fitted stage maps each row on its own: transforming two halves
        // separately equals transforming the whole
        let f = build(&cols, &y);
        let n = f.len();
        let cut = cut.min(n - 1);
        for kind in [StageKind::Zscore, StageKind::Robust, StageKind::Quantile { n_quantiles: 20, output: transformers::QuantileOutput::Normal }, StageKind::Power, StageKind::Pca { n_components: 2, keep_input: false }, StageKind::Kbins { n_bins: 4 }, StageKind::L2] {
            let (st, _) = fit(kind, &f);
            let whole = rows(&st.apply(&f).unwrap());
            let head = rows(&st.apply(&f.take(&(0..cut).collect::<Vec<_>>())).unwrap());
            let tail = rows(&st.apply(&f.take(&(cut..n).collect::<Vec<_>>())).unwrap());
            let parts: Vec<Vec<f64>> = head.into_iter().chain(tail).collect();
            prop_assert_eq!(&whole, &parts);
        }
    }

    #[test]
    fn pca_components_orthonormal((cols, y) in data()) {
        let (st, _) = fit(StageKind::Pca { n_components: 3, keep_input: false }, &build(&cols, &y));
        let StageState::Pca(p) = st.state else { panic!("pca state") };
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = p.components[a].iter().zip(&p.components[b]).map(|(x, y)| x * y).sum();
                prop_assert!((dot - (a == b) as u8 as f64).abs() < 1e-8);
            }
        }
        prop_assert!(p.explained_variance.windows(2).all(|w| w[0] >= w[1] - 1e-9));
    }

    #[test]
    fn kbins_codes_in_range((cols, y) in data(), bins in 2usize..8) {
        let f = build(&cols, &y);
        let (_, out) = fit(StageKind::Kbins { n_bins: bins }, &f);
        for r in rows(&out) {
            prop_assert!(r.iter().all(|&x| x >= 0.0 && x < bins as f64 && x.fract() == 0.0));
        }
    }

    #[test]
    fn quantile_map_monotone((cols, y) in data(), probe in prop::collection::vec(-2e3f64..2e3, 2..50)) {
        let f = build(&cols, &y);
        let spec = StageSpec::of_kind("quantile").unwrap();
        let (st, _) = transformers::fit(&spec, &f, 0).unwrap();
        let mut sorted = probe.clone();
        sorted.sort_by(f64::total_cmp);
        let g = build(&[sorted.clone(), sorted.clone(), sorted.clone()], &vec![0; sorted.len()]);
        let out = column_values(&st.apply(&g).unwrap(), "x0");
        prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(out.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn samplers_balance_classes((cols, y) in data()) {
        let f = build(&cols, &y);
        let (_, under) = fit(StageKind::RandomUndersample, &f);
        let pos = under.labels.iter().filter(|&&v| v == 1).count();
        prop_assert_eq!(2 * pos, under.len());
        // undersampling keeps original rows only
        prop_assert!(under.row_ids.iter().all(|r| r.is_some()));

        let minority = y.iter().filter(|&&v| v == 1).count().min(y.iter().filter(|&&v| v == 0).count());
        if minority >= 2 {
            let (_, over) = fit(StageKind::Smote { k: 3 }, &f);
            let pos = over.labels.iter().filter(|&&v| v == 1).count();
            prop_assert_eq!(2 * pos, over.len());
            prop_assert_eq!(&over.take(&(0..f.len()).collect::<Vec<_>>()), &f);
        }
    }

    #[test]
    fn samplers_leave_later_frames_alone((cols, y) in data()) {
        let f = build(&cols, &y);
        for kind in [StageKind::RandomUndersample, StageKind::EditedNnUndersample] {
            let (st, _) = fit(kind, &f);
            prop_assert_eq!(&st.apply(&f).unwrap(), &f);
        }
    }

    #[test]
    fn identity_is_a_no_op((cols, y) in data()) {
        let f = build(&cols, &y);
        let (st, out) = fit(StageKind::Identity, &f);
        prop_assert_eq!(&out, &f);
        prop_assert_eq!(&st.apply(&f).unwrap(), &f);
    }

    #[test]
    fn yeo_johnson_is_monotone(lambda in -4.0f64..4.0, a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(yeo_johnson(lo, lambda) <= yeo_johnson(hi, lambda));
    }
}

#[test]
fn onehot_unseen_category_gives_zero_block() {
    let f = frame(vec![common::categorical_column("c", &["a", "b", "a"])], vec![0, 1, 0]);
    let (st, out) = fit(StageKind::Onehot, &f);
    assert_eq!(out.feature_names(), vec!["c=a", "c=b"]);
    let g = frame(vec![common::categorical_column("c", &["z", "b"])], vec![0, 1]);
    let m = st.apply(&g).unwrap().matrix().unwrap();
    assert_eq!(m.row(0), &[0.0, 0.0]);
    assert_eq!(m.row(1), &[0.0, 1.0]);
}

#[test]
fn ordinal_codes_sorted_categories() {
    let f = frame(vec![common::categorical_column("c", &["m", "f", "x", "f"])], vec![0, 1, 0, 1]);
    let (st, out) = fit(StageKind::OrdinalLabel, &f);
    assert_eq!(column_values(&out, "c"), vec![1.0, 0.0, 2.0, 0.0]);
    let g = frame(vec![common::categorical_column("c", &["q"])], vec![0]);
    assert_eq!(column_values(&st.apply(&g).unwrap(), "c"), vec![3.0]);
}

#[test]
fn yeo_johnson_hand_values() {
    assert!((yeo_johnson(3.0, 0.0) - 4f64.ln()).abs() < 1e-15);
    assert!((yeo_johnson(3.0, 2.0) - (16.0 - 1.0) / 2.0).abs() < 1e-12);
    assert!((yeo_johnson(-3.0, 2.0) + 4f64.ln()).abs() < 1e-15);
    assert!((yeo_johnson(-3.0, 0.0) + (16.0 - 1.0) / 2.0).abs() < 1e-12);
    assert_eq!(yeo_johnson(5.0, 1.0), 5.0);
}
