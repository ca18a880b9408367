mod common;

use bidguard::conference::BidMatrix;
use bidguard::scoring::{
    average_precision_at_k, cap_positive_bids, holdout_split, norm, predict_scores, train_ridge, ApAxis, ScoreMatrix,
    ScoreModel,
};
use bidguard::sparse::CsrMatrix;
use common::{dense, dense_ridge, max_abs_diff, random_design, random_labels, rng};
use proptest::prelude::*;

/// Plain gradient descent on the ridge objective with step 1/L.
fn gradient_descent(x: &nalgebra::DMatrix<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
    let y = nalgebra::DVector::from_column_slice(y);
    let d = x.ncols();
    let lipschitz = x.iter().map(|v| v * v).sum::<f64>() + lambda;
    let step = 1.0 / lipschitz;
    let mut w = nalgebra::DVector::<f64>::zeros(d);
    for _ in 0..500_000 {
        let grad = x.transpose() * (x * &w - &y) + &w * lambda;
        if grad.norm() < 1e-13 {
            break;
        }
        w -= grad * step;
    }
    w.iter().copied().collect()
}

#[test]
fn weights_match_gradient_descent() {
    let mut r = rng(11);
    let x = random_design(&mut r, 50, 8, 0.6);
    let y = random_labels(&mut r, 50, 0.4);
    let model = train_ridge(&x, &y, 1.0).unwrap();
    let oracle = gradient_descent(&dense(&x), &y, 1.0);
    assert!(max_abs_diff(model.weights(), &oracle) <= 1e-6);
}

#[test]
fn scores_match_explicit_solve() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let x = random_design(&mut r, 40, 12, 0.3);
        let y = random_labels(&mut r, 40, 0.3);
        let model = train_ridge(&x, &y, 0.5).unwrap();
        let xd = dense(&x);
        let oracle = &xd * dense_ridge(&xd, &y, 0.5, None);
        let s = model.predict(&x).unwrap();
        assert!(max_abs_diff(&s, oracle.as_slice()) <= 1e-8, "seed {seed}");
    }
}

fn dense_residual(x: &CsrMatrix, y: &[f64], lambda: f64, w: &[f64]) -> (f64, f64) {
    let xd = dense(x);
    let w = nalgebra::DVector::from_column_slice(w);
    let yv = nalgebra::DVector::from_column_slice(y);
    let xty = xd.transpose() * &yv;
    let res = xd.transpose() * (&xd * &w) + &w * lambda - &xty;
    (res.norm(), xty.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimality_residual_is_tiny(seed in 0u64..10_000, rows in 5usize..60, d in 1usize..20, lambda in 0.01f64..10.0) {
        let mut r = rng(seed);
        let x = random_design(&mut r, rows, d, 0.3);
        let y = random_labels(&mut r, rows, 0.4);
        let model = train_ridge(&x, &y, lambda).unwrap();
        let (res, scale) = dense_residual(&x, &y, lambda, model.weights());
        prop_assert!(res <= 1e-8 * scale.max(1.0), "residual {res}");
    }

    #[test]
    fn scores_are_linear_in_labels(seed in 0u64..10_000, a in -3.0f64..3.0) {
        let mut r = rng(seed);
        let x = random_design(&mut r, 30, 10, 0.3);
        let y1 = random_labels(&mut r, 30, 0.4);
        let y2 = random_labels(&mut r, 30, 0.4);
        let sum: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + q).collect();
        let s1 = train_ridge(&x, &y1, 1.0).unwrap().predict(&x).unwrap();
        let s2 = train_ridge(&x, &y2, 1.0).unwrap().predict(&x).unwrap();
        let s = train_ridge(&x, &sum, 1.0).unwrap().predict(&x).unwrap();
        let combined: Vec<f64> = s1.iter().zip(&s2).map(|(p, q)| a * p + q).collect();
        prop_assert!(max_abs_diff(&s, &combined) <= 1e-8);
    }

    #[test]
    fn weight_norm_shrinks_with_lambda(seed in 0u64..10_000, l1 in 0.01f64..5.0, gap in 0.01f64..5.0) {
        let mut r = rng(seed);
        let x = random_design(&mut r, 25, 6, 0.5);
        let y = random_labels(&mut r, 25, 0.5);
        let w1 = train_ridge(&x, &y, l1).unwrap();
        let w2 = train_ridge(&x, &y, l1 + gap).unwrap();
        prop_assert!(norm(w1.weights()) >= norm(w2.weights()) - 1e-12);
    }

    #[test]
    fn rank_table_follows_sort(seed in 0u64..10_000, m in 1usize..12, n in 1usize..6) {
        let mut r = rng(seed);
        // Coarse values so ties are common.
        let values: Vec<f64> = (0..m * n).map(|_| f64::from(rand::Rng::random_range(&mut r, 0u8..4))).collect();
        let s = ScoreMatrix::new(m, n, values.clone()).unwrap();
        for p in 0..n {
            let mut oracle: Vec<usize> = (0..m).collect();
            oracle.sort_by(|&a, &b| values[b * n + p].partial_cmp(&values[a * n + p]).unwrap().then(a.cmp(&b)));
            let got: Vec<usize> = s.ranking(p).iter().map(|&t| t as usize).collect();
            prop_assert_eq!(&got, &oracle);
            for (k, &t) in oracle.iter().enumerate() {
                prop_assert_eq!(s.rank(t, p), k + 1);
            }
        }
    }
}

#[test]
fn precision_hand_count() {
    // One reviewer, three papers ranked (pos, neg, pos).
    let scores = ScoreMatrix::new(1, 3, vec![3.0, 2.0, 1.0]).unwrap();
    let positives = BidMatrix::from_entries(1, 3, vec![(0, 0, 2), (0, 2, 1)]).unwrap();
    assert_eq!(average_precision_at_k(&scores, &positives, 2, ApAxis::PerReviewer, None).unwrap(), 0.5);
    assert_eq!(average_precision_at_k(&scores, &positives, 1, ApAxis::PerReviewer, None).unwrap(), 1.0);
    // Excluding the top pair promotes the third paper.
    let exclude = BidMatrix::from_entries(1, 3, vec![(0, 0, 1)]).unwrap();
    assert_eq!(average_precision_at_k(&scores, &positives, 2, ApAxis::PerReviewer, Some(&exclude)).unwrap(), 0.5);
    assert!(average_precision_at_k(&scores, &positives, 4, ApAxis::PerReviewer, None).unwrap_err().is_param());
}

#[test]
fn cap_and_holdout_partition_positives() {
    let mut r = rng(5);
    let labels = random_labels(&mut r, 20 * 30, 0.5);
    let bids = BidMatrix::from_labels(20, 30, &labels).unwrap();
    let capped = cap_positive_bids(&bids, 4, 9).unwrap();
    for t in 0..20 {
        assert_eq!(capped.positive_count(t), bids.positive_count(t).min(4));
        for &(p, b) in capped.row(t) {
            assert_eq!(bids.get(t, p as usize), b);
        }
    }
    assert_eq!(capped, cap_positive_bids(&bids, 4, 9).unwrap());
    let (train, test) = holdout_split(&bids, 0.2, 3).unwrap();
    for (t, p, b) in bids.entries() {
        assert!((train.get(t, p) == b) ^ (test.get(t, p) == b));
    }
    assert_eq!(train.nnz() + test.nnz(), bids.nnz());
}

#[test]
fn model_file_round_trip() {
    let mut r = rng(2);
    let x = random_design(&mut r, 30, 7, 0.4);
    let y = random_labels(&mut r, 30, 0.4);
    let model = train_ridge(&x, &y, 2.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    model.save(&path).unwrap();
    let loaded = ScoreModel::load(&path).unwrap();
    assert_eq!(loaded.weights(), model.weights());
    assert_eq!(loaded.lambda(), 2.0);
    let b: Vec<f64> = (0..7).map(f64::from).collect();
    assert_eq!(loaded.solve(&b), model.solve(&b));
    let s1 = predict_scores(&model, &x, 5, 6).unwrap();
    let s2 = predict_scores(&loaded, &x, 5, 6).unwrap();
    assert_eq!(s1, s2);
}

#[test]
fn rejects_bad_inputs() {
    let x = CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
    assert!(train_ridge(&x, &[1.0], 1.0).is_err());
    assert!(train_ridge(&x, &[1.0, 2.0], 0.0).unwrap_err().is_param());
    assert!(train_ridge(&x, &[f64::NAN, 2.0], 1.0).is_err());
}
