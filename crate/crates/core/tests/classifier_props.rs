use proptest::prelude::*;

use fairstage::classifiers::{self, logistic_gradient, logistic_objective, ClassifierSpec, Model};
use fairstage::frame::Matrix;

fn dataset() -> impl Strategy<Value = (Matrix, Vec<u8>)> {
    (10usize..60, 1usize..5).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * d).prop_map(move |v| Matrix::new(n, d, v)),
            prop::collection::vec(0u8..2, n).prop_filter("both labels", |y| y.contains(&0) && y.contains(&1)),
        )
    })
}

fn spec(toml_text: &str) -> ClassifierSpec {
    toml::from_str(toml_text).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_finite_differences(
        (x, y) in dataset(),
        seed_theta in prop::collection::vec(-3.0f64..3.0, 6),
        c in 0.05f64..20.0,
    ) {
        let theta = seed_theta[..=x.cols].to_vec();
        let g = logistic_gradient(&theta, &x, &y, c);
        let h = 1e-5;
        let fd: Vec<f64> = (0..theta.len())
            .map(|j| {
                let (mut up, mut down) = (theta.clone(), theta.clone());
                up[j] += h;
                down[j] -= h;
                (logistic_objective(&up, &x, &y, c) - logistic_objective(&down, &x, &y, c)) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&diff) <= 1e-5 * norm(&g).max(1e-3));
    }

    #[test]
    fn logistic_fit_is_stationary((x, y) in dataset()) {
        let f = classifiers::fit(&spec("kind = \"logistic_regression\""), &x, &y, 0).unwrap();
        let Model::Logistic(m) = &f.model else { panic!("logistic model") };
        let mut theta = m.weights.clone();
        theta.push(m.intercept);
        prop_assert!(norm(&logistic_gradient(&theta, &x, &y, 1.0)) < 1e-5);
    }

    #[test]
    fn predictions_are_binary_and_seeded((x, y) in dataset(), seed in any::<u64>()) {
        for text in [
            "kind = \"logistic_regression\"\nstandardize = true",
            "kind = \"decision_tree\"\nmax_depth = 3",
            "kind = \"random_forest\"\nn_trees = 15",
            "kind = \"k_neighbors\"\nk = 3",
        ] {
            let s = spec(text);
            let a = classifiers::fit(&s, &x, &y, seed).unwrap().predict(&x).unwrap();
            let b = classifiers::fit(&s, &x, &y, seed).unwrap().predict(&x).unwrap();
            prop_assert!(a.iter().all(|&v| v <= 1));
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn unlimited_tree_and_one_neighbour_memorize((x, y) in dataset()) {
        // duplicates with conflicting labels cannot be memorized
        let distinct = (0..x.rows).all(|i| (0..i).all(|j| x.row(i) != x.row(j)));
        prop_assume!(distinct);
        for text in ["kind = \"decision_tree\"", "kind = \"k_neighbors\"\nk = 1"] {
            let f = classifiers::fit(&spec(text), &x, &y, 1).unwrap();
            prop_assert_eq!(f.predict(&x).unwrap(), y.clone());
        }
    }
}

#[test]
fn single_class_gives_constant_model() {
    let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
    let f = classifiers::fit(&spec("kind = \"random_forest\""), &x, &[1, 1, 1], 0).unwrap();
    assert!(matches!(f.model, Model::Constant(1)));
    assert!(!f.warnings.is_empty());
    assert_eq!(f.predict(&x).unwrap(), vec![1, 1, 1]);
}

#[test]
fn width_mismatch_rejected() {
    let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
    let f = classifiers::fit(&spec("kind = \"k_neighbors\"\nk = 1"), &x, &[0, 1], 0).unwrap();
    assert!(f.predict(&Matrix::from_rows(&[vec![0.0]])).is_err());
}

#[test]
fn invalid_hyperparameters_rejected() {
    for text in [
        "kind = \"logistic_regression\"\nc = 0.0",
        "kind = \"random_forest\"\nn_trees = 0",
        "kind = \"k_neighbors\"\nk = 0",
        "kind = \"decision_tree\"\nmin_samples_leaf = 0",
        "kind = \"svm\"",
    ] {
        assert!(toml::from_str::<ClassifierSpec>(text).is_err(), "{text}");
    }
}
