mod common;

use bidguard::attack::{
    best_response, brute_force_attack_oracle, colluding_blackbox, feasible_bid_vectors, influence_vector, is_feasible,
    simple_blackbox_bids, whitebox_colluding, whitebox_single_delta, Instance, MAX_BID,
};
use bidguard::scoring::train_ridge;
use common::{demo_data, random_design, random_labels, rng};
use proptest::prelude::*;
use rand::Rng;

/// Exhaustive best bid vector over all 4^n vectors, filtered by the cap.
fn exhaustive_best(z: &[f64], current: &[f64], u_cap: usize) -> f64 {
    let n = z.len();
    let mut best = f64::NEG_INFINITY;
    for code in 0..4usize.pow(n as u32) {
        let bids: Vec<u8> = (0..n).map(|q| ((code / 4usize.pow(q as u32)) % 4) as u8).collect();
        if bids.iter().filter(|&&b| b > 0).count() > u_cap {
            continue;
        }
        let gain: f64 = (0..n).map(|q| z[q] * (f64::from(bids[q]) - current[q])).sum();
        best = best.max(gain);
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn best_response_is_exhaustive_optimum(seed in 0u64..100_000, n in 1usize..=6, u_cap in 1usize..=3) {
        let mut r = rng(seed);
        let z: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let current = random_labels(&mut r, n, 0.5);
        let (bids, gain) = best_response(&z, &current, u_cap);
        prop_assert!(is_feasible(&bids, u_cap));
        prop_assert!((gain - exhaustive_best(&z, &current, u_cap)).abs() <= 1e-12);
    }
}

fn toy(seed: u64) -> (bidguard::sparse::CsrMatrix, Vec<f64>, usize, usize, usize) {
    let mut r = rng(seed);
    let m = r.random_range(2..=6);
    let n = r.random_range(1..=4);
    let d = r.random_range(2..=6);
    let x = random_design(&mut r, m * n, d, 0.5);
    let mut y = random_labels(&mut r, m * n, 0.3);
    let u_cap = r.random_range(1..=2);
    // Training labels are always capped, so keeping them is feasible.
    for row in y.chunks_mut(n) {
        let mut seen = 0;
        for v in row.iter_mut().filter(|v| **v > 0.0) {
            seen += 1;
            if seen > u_cap {
                *v = 0.0;
            }
        }
    }
    (x, y, m, n, u_cap)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn colluding_attack_matches_oracle(seed in 0u64..100_000, ma in 1usize..=3) {
        let (x, y, m, n, u_cap) = toy(seed);
        let inst = Instance::new(&x, &y, m, n).unwrap();
        let model = train_ridge(&x, &y, 1.0).unwrap();
        let (r, p) = (seed as usize % m, seed as usize % n);
        let ma = ma.min(m);
        let plan = whitebox_colluding(&model, &inst, r, p, ma, u_cap).unwrap();
        let oracle = brute_force_attack_oracle(&inst, 1.0, r, p, ma, u_cap).unwrap();
        prop_assert!((plan.predicted_gain.unwrap() - oracle).abs() <= 1e-9);
    }

    #[test]
    fn plans_are_feasible_nonnegative_and_exact(seed in 0u64..100_000) {
        let (x, y, m, n, u_cap) = toy(seed);
        let inst = Instance::new(&x, &y, m, n).unwrap();
        let model = train_ridge(&x, &y, 1.0).unwrap();
        let (r, p) = (0, n - 1);
        let mut previous = 0.0;
        for ma in 1..=m {
            let plan = whitebox_colluding(&model, &inst, r, p, ma, u_cap).unwrap();
            let gain = plan.predicted_gain.unwrap();
            prop_assert!(gain >= 0.0);
            prop_assert!(gain >= previous - 1e-12, "gain fell from {previous} to {gain}");
            previous = gain;
            prop_assert_eq!(plan.party_size(), ma);
            prop_assert_eq!(plan.party[0].reviewer, r);
            for member in &plan.party {
                prop_assert!(is_feasible(&member.bids, u_cap));
            }
            // The predicted change is the actual change after retraining.
            let poisoned = plan.apply_labels(&y, n);
            let before = model.predict(&x).unwrap()[r * n + p];
            let after = train_ridge(&x, &poisoned, 1.0).unwrap().predict(&x).unwrap()[r * n + p];
            prop_assert!((after - before - gain).abs() <= 1e-8);
        }
    }
}

#[test]
fn single_paper_closed_form() {
    for seed in 0..30 {
        let mut r = rng(seed);
        let m = 5;
        let x = random_design(&mut r, m, 3, 0.7);
        let y = random_labels(&mut r, m, 0.5);
        let inst = Instance::new(&x, &y, m, 1).unwrap();
        let model = train_ridge(&x, &y, 1.0).unwrap();
        let z = influence_vector(&model, &inst, 0, 0);
        let per_member: Vec<f64> = (0..m).map(|t| (z[t] * (3.0 - y[t])).max(-z[t] * y[t])).collect();
        let mut others: Vec<f64> = per_member[1..].to_vec();
        others.sort_by(|a, b| b.total_cmp(a));
        let expected = per_member[0] + others[..2].iter().sum::<f64>();
        let plan = whitebox_colluding(&model, &inst, 0, 0, 3, 1).unwrap();
        assert!((plan.predicted_gain.unwrap() - expected).abs() <= 1e-12, "seed {seed}");
        let (_, single) = whitebox_single_delta(&model, &inst, 0, 0, 1).unwrap();
        assert!((single - per_member[0]).abs() <= 1e-12);
    }
}

#[test]
fn oracle_rejects_large_instances() {
    let mut r = rng(1);
    let x = random_design(&mut r, 9 * 2, 3, 0.5);
    let y = vec![0.0; 18];
    let inst = Instance::new(&x, &y, 9, 2).unwrap();
    assert!(brute_force_attack_oracle(&inst, 1.0, 0, 0, 1, 1).is_err());
    assert_eq!(feasible_bid_vectors(2, 1).len(), 7);
}

#[test]
fn simple_blackbox_is_single_max_bid() {
    let bids = simple_blackbox_bids(5, 3);
    assert_eq!(bids, vec![0, 0, 0, MAX_BID, 0]);
    assert!(is_feasible(&bids, 1));
}

#[test]
fn blackbox_ignores_non_party_bids() {
    let (conf, x) = demo_data();
    let (r, p) = (3, 7);
    let plan = colluding_blackbox(conf, x, r, p, 4, 6).unwrap();
    assert_eq!(plan.party_size(), 4);
    assert!(plan.predicted_gain.is_none());
    for member in &plan.party {
        assert!(is_feasible(&member.bids, 6));
    }
    let party: Vec<usize> = plan.members().collect();
    let mut edited = conf.bids().clone();
    let mut r2 = rng(77);
    for t in (0..conf.n_reviewers()).filter(|t| !party.contains(t)) {
        let row: Vec<u8> = (0..conf.n_papers()).map(|_| if r2.random::<f64>() < 0.1 { 3 } else { 0 }).collect();
        edited.set_row(t, &row).unwrap();
    }
    let conf2 = conf.with_bids(edited).unwrap();
    assert_eq!(colluding_blackbox(&conf2, x, r, p, 4, 6).unwrap(), plan);
}
