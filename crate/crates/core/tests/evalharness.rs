mod common;

use bidguard::assign::{solve_assignment, Assignment};
use bidguard::attack::AttackPlan;
use bidguard::conference::BidMatrix;
use bidguard::defense::{build_candidate_set, DetectionVerdict};
use bidguard::eval::{
    assignment_quality, bin_rates, bins_beyond, bins_from_top, colluding_study, detection_fpr, detection_tpr,
    quality_table, sample_trials, trim_comparison, AttackKind, ExperimentConfig, Population, ScoringRule, Study,
};
use bidguard::scoring::ScoreMatrix;
use common::{demo_config, demo_data, max_abs_diff};

fn small_cfg() -> ExperimentConfig {
    ExperimentConfig {
        n_target_papers: 20,
        k: 6,
        samples_per_bin: 3,
        party_sizes: vec![1, 2],
        detector_sizes: vec![1, 2, 3],
        fpr_top: vec![3, 6],
        blackbox_party_sizes: vec![],
        trim_sizes: vec![],
        comparison_party_sizes: vec![1, 2],
        comparison_detector_sizes: vec![1, 3],
        ap_max_k: 3,
        ..ExperimentConfig::default()
    }
}

fn study<'a>(cfg: &'a ExperimentConfig) -> Study<'a> {
    let (conf, x) = demo_data();
    let pc = demo_config();
    Study::new(conf, x, cfg, pc.lambda, pc.u_cap, pc.seed).unwrap()
}

#[test]
fn empty_overlay_reproduces_honest_assignment() {
    let cfg = small_cfg();
    let s = study(&cfg);
    let empty = AttackPlan { reviewer: 0, paper: 0, party: vec![], predicted_gain: None };
    let poisoned = s.poisoned_scores(&empty).unwrap();
    assert!(max_abs_diff(poisoned.values(), s.scores.values()) <= 1e-12);
    let (_, honest) = s.honest_assignment(ScoringRule::Regression, true).unwrap();
    let cands = build_candidate_set(&poisoned, cfg.k).unwrap();
    let again = solve_assignment(&poisoned, Some(&cands), cfg.reviewers_per_paper, cfg.papers_per_reviewer).unwrap();
    assert_eq!(again.pairs, honest.pairs);
}

#[test]
fn trials_are_isolated() {
    let cfg = small_cfg();
    let s = study(&cfg);
    let papers: Vec<usize> = (0..s.n()).collect();
    let bins = bins_beyond(cfg.k, s.m());
    let trials = sample_trials(&s.scores, &papers, &bins, 2, 9, "isolation");
    let run = |t: &[_]| {
        s.attack_success_experiment(ScoringRule::Regression, AttackKind::Whitebox, 2, t, true, &[1, 2]).unwrap()
    };
    let all = run(&trials);
    let reversed: Vec<_> = trials.iter().rev().copied().collect();
    let mut back = run(&reversed);
    back.reverse();
    assert_eq!(all, back);
    for (i, t) in trials.iter().enumerate().step_by(3) {
        assert_eq!(run(std::slice::from_ref(t))[0], all[i]);
    }
}

#[test]
fn whole_committee_collusion_always_wins() {
    let (conf, _) = demo_data();
    let small = conf.subset(&(0..8).collect::<Vec<_>>(), &(0..5).collect::<Vec<_>>()).unwrap();
    let schema = bidguard::features::FeatureSchema::for_conference(&small, 0.5).unwrap();
    let xs = bidguard::features::assemble_feature_matrix(&small, &schema).unwrap();
    let cfg = ExperimentConfig {
        k: 3,
        reviewers_per_paper: 2,
        papers_per_reviewer: 3,
        party_sizes: vec![8],
        detector_sizes: vec![],
        comparison_party_sizes: vec![],
        comparison_detector_sizes: vec![],
        ..small_cfg()
    };
    let s = Study::new(&small, &xs, &cfg, 1.0, 2, 4).unwrap();
    let bins = bins_beyond(cfg.k, s.m());
    let trials = sample_trials(&s.scores, &(0..5).collect::<Vec<_>>(), &bins, 4, 1, "everyone");
    let outcomes =
        s.attack_success_experiment(ScoringRule::Regression, AttackKind::Whitebox, 8, &trials, true, &[]).unwrap();
    for rate in bin_rates(&outcomes, &bins, cfg.k) {
        assert_eq!(rate.attack_rate, Some(1.0), "bin {}..{}", rate.lo, rate.hi);
    }
}

fn assignment(pairs: Vec<(usize, usize)>, n: usize, per_paper: usize) -> Assignment {
    let mut paper_load = vec![0; n];
    for &(_, p) in &pairs {
        paper_load[p] += 1;
    }
    Assignment {
        deficit: paper_load.iter().map(|&l| per_paper - l).collect(),
        reviewer_load: vec![],
        paper_load,
        pairs,
        total_score: 0.0,
    }
}

#[test]
fn quality_by_hand() {
    let (conf, _) = demo_data();
    let two = conf.subset(&[0, 1], &[0, 1]).unwrap();
    let bids = BidMatrix::from_entries(2, 2, vec![(0, 0, 3), (1, 0, 1)]).unwrap();
    let two = two.with_bids(bids).unwrap();
    // Paper 0 gets both reviewers, paper 1 only reviewer 1.
    let a = assignment(vec![(0, 0), (1, 0), (1, 1)], 2, 2);
    let q = assignment_quality(&a, &two);
    assert_eq!(q.frac_positive_bids, Some(2.0 / 3.0));
    assert_eq!(q.avg_bid_score, Some(4.0 / 3.0));
    let (t00, t10, t11) = (two.tpms(0, 0), two.tpms(1, 0), two.tpms(1, 1));
    assert!((q.avg_tpms.unwrap() - (t00 + t10 + t11) / 3.0).abs() < 1e-15);
    assert!((q.avg_max_tpms.unwrap() - (t00.max(t10) + t11) / 2.0).abs() < 1e-15);
    assert_eq!(q.n_under_reviewed, 1);

    let eager = two.with_bids(BidMatrix::from_entries(2, 2, vec![(0, 0, 3), (1, 1, 3)]).unwrap()).unwrap();
    let q = assignment_quality(&assignment(vec![(0, 0), (1, 1)], 2, 1), &eager);
    assert_eq!((q.frac_positive_bids, q.avg_bid_score), (Some(1.0), Some(3.0)));

    let q = assignment_quality(&assignment(vec![], 2, 3), &two);
    assert_eq!((q.frac_positive_bids, q.avg_tpms, q.avg_max_tpms), (None, None, None));
    assert_eq!(q.n_under_reviewed, 2);
}

fn verdict(reviewer: usize, paper: usize, removed: bool) -> DetectionVerdict {
    DetectionVerdict { reviewer, paper, score: 0.0, robust_score: 0.0, party: vec![reviewer], removed }
}

#[test]
fn rate_trivia() {
    let scores = ScoreMatrix::new(3, 1, vec![3.0, 2.0, 1.0]).unwrap();
    let v = vec![verdict(0, 0, false), verdict(1, 0, true), verdict(2, 0, true)];
    assert_eq!(detection_fpr(&v, &scores, 1), Some(0.0));
    assert_eq!(detection_fpr(&v, &scores, 2), Some(0.5));
    assert_eq!(detection_fpr(&[], &scores, 2), None);

    let cfg = small_cfg();
    let s = study(&cfg);
    let papers: Vec<usize> = (0..s.n()).collect();
    let (_, _, raw) = colluding_study(&s, &papers, AttackKind::Whitebox, &[2]).unwrap();
    let mut outcomes = raw[0].1.clone();
    assert!(outcomes.iter().any(|o| o.success));
    for o in &mut outcomes {
        o.removed = vec![true; o.removed.len()];
    }
    assert_eq!(detection_tpr(&outcomes, 0, Population::Successful, cfg.k), Some(1.0));
    for o in &mut outcomes {
        o.removed = vec![false; o.removed.len()];
    }
    assert_eq!(detection_tpr(&outcomes, 0, Population::Successful, cfg.k), Some(0.0));
    assert_eq!(detection_tpr(&[], 0, Population::Successful, cfg.k), None);
}

#[test]
fn quality_rows_and_fpr_columns() {
    let cfg = small_cfg();
    let s = study(&cfg);
    let rows = quality_table(&s).unwrap();
    let settings: Vec<&str> = rows.iter().map(|r| r.setting.as_str()).collect();
    assert_eq!(settings, ["neurips2014", "tpms-only", "md=0", "md=1", "md=2", "md=3"]);
    assert_eq!(rows[2].quality.fpr, vec![(3, Some(0.0)), (6, Some(0.0))]);
    for r in &rows[3..] {
        let f: Vec<f64> = r.quality.fpr.iter().map(|e| e.1.unwrap()).collect();
        assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    // Table with TRIM at L = 0 never detects anything.
    let cfg0 = ExperimentConfig { trim_sizes: vec![0], trim_trials: 3, ..small_cfg() };
    let s0 = study(&cfg0);
    let papers: Vec<usize> = (0..s0.n()).collect();
    let (_, _, raw) = colluding_study(&s0, &papers, AttackKind::Whitebox, &[1, 2]).unwrap();
    let t2 = trim_comparison(&s0, &quality_table(&s0).unwrap(), &raw).unwrap();
    let trim = t2.iter().find(|r| r.defense == "trim").unwrap();
    assert!(trim.tpr.iter().all(|&(_, t)| t.is_none_or(|v| v == 0.0)));
}

#[test]
fn bins_cover_ranks() {
    assert_eq!(bins_from_top(10), vec![(1, 1), (2, 3), (4, 7), (8, 10)]);
    assert_eq!(bins_beyond(5, 20), vec![(6, 7), (8, 11), (12, 19), (20, 20)]);
    let cfg = ExperimentConfig { k: 100, ..small_cfg() };
    let (conf, x) = demo_data();
    assert!(Study::new(conf, x, &cfg, 1.0, 6, 1).err().unwrap().is_param());
}
