//! Experimental protocol: attack success by rank bin, detection rates,
//! assignment quality and the trimmed-regression comparison.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::{neurips2014_score, solve_assignment, tpms_only_score, Assignment};
use crate::attack::{
    colluding_blackbox, simple_blackbox_bids, top_party, whitebox_colluding, AttackPlan, Instance, MemberBids,
};
use crate::conference::Conference;
use crate::defense::{
    build_candidate_set, filter_candidates, filter_candidates_approx, rank_against_others, robust_score_exact,
    trim_fit, CandidateSet, DetectionVerdict, Detector, LabelProjection,
};
use crate::error::{Error, Result};
use crate::rng::{self, kahan_sum};
use crate::scoring::{
    average_precision_at_k, cap_positive_bids, holdout_split, train_ridge, ApAxis, ScoreMatrix, ScoreModel,
};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Papers drawn as attack targets (capped at the number of papers).
    pub n_target_papers: usize,
    /// Candidate-set size K.
    pub k: usize,
    /// Reviewers per paper.
    pub reviewers_per_paper: usize,
    /// Papers per reviewer.
    pub papers_per_reviewer: usize,
    pub samples_per_bin: usize,
    /// Colluding party sizes for the white-box study.
    pub party_sizes: Vec<usize>,
    /// Detector budgets for the detection and quality tables.
    pub detector_sizes: Vec<usize>,
    pub detector: Detector,
    /// Ranks that count as "top" for the false-positive columns; values above
    /// K are clamped to K.
    pub fpr_top: Vec<usize>,
    pub run_simple_blackbox: bool,
    /// Party sizes for the colluding black-box study; empty disables it.
    pub blackbox_party_sizes: Vec<usize>,
    /// Trimmed-row counts L for the TRIM comparison; empty disables it.
    pub trim_sizes: Vec<usize>,
    pub trim_max_iters: usize,
    /// Successful attacks per party size re-fitted with TRIM.
    pub trim_trials: usize,
    /// Party sizes scored in the comparison table.
    pub comparison_party_sizes: Vec<usize>,
    /// Detector budgets listed in the comparison table.
    pub comparison_detector_sizes: Vec<usize>,
    /// Largest k for the precision table; 0 disables it.
    pub ap_max_k: usize,
    pub holdout_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_target_papers: 400,
            k: 50,
            reviewers_per_paper: 3,
            papers_per_reviewer: 6,
            samples_per_bin: 10,
            party_sizes: vec![1, 2, 3, 4, 5, 10],
            detector_sizes: vec![1, 2, 3, 4, 5],
            detector: Detector::Approx,
            fpr_top: vec![5, 50],
            run_simple_blackbox: true,
            blackbox_party_sizes: vec![1, 5, 10],
            trim_sizes: vec![10_000, 30_000],
            trim_max_iters: 50,
            trim_trials: 10,
            comparison_party_sizes: vec![1, 2, 3, 4, 5],
            comparison_detector_sizes: vec![1, 5],
            ap_max_k: 10,
            holdout_fraction: 0.2,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let positive = |v: usize, name: &str| {
            if v == 0 {
                Err(Error::param(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive(self.k, "k")?;
        positive(self.reviewers_per_paper, "reviewers_per_paper")?;
        positive(self.papers_per_reviewer, "papers_per_reviewer")?;
        positive(self.samples_per_bin, "samples_per_bin")?;
        positive(self.n_target_papers, "n_target_papers")?;
        if self.k > m {
            return Err(Error::param(format!("K = {} exceeds the {m} reviewers", self.k)));
        }
        let sizes = self
            .party_sizes
            .iter()
            .chain(&self.detector_sizes)
            .chain(&self.blackbox_party_sizes)
            .chain(&self.comparison_party_sizes)
            .chain(&self.comparison_detector_sizes);
        for &s in sizes {
            if s == 0 || s > m {
                return Err(Error::param(format!("party size {s} outside 1..={m}")));
            }
        }
        if self.fpr_top.contains(&0) {
            return Err(Error::param("fpr_top ranks must be positive"));
        }
        if self.trim_sizes.iter().any(|&l| l >= m * n) {
            return Err(Error::param(format!("TRIM size must be below {} pairs", m * n)));
        }
        if self.ap_max_k > m.min(n) {
            return Err(Error::param(format!("ap_max_k = {} exceeds min(m, n)", self.ap_max_k)));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::param("holdout_fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Every detector budget some table needs.
    pub fn all_detector_sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.detector_sizes.iter().chain(&self.comparison_detector_sizes).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Inclusive rank ranges `[lo, hi]` starting at `first_lo` with width
/// `first_width`, doubling, truncated at `m`.
pub fn rank_bins(first_lo: usize, first_width: usize, m: usize) -> Vec<(usize, usize)> {
    let mut bins = Vec::new();
    let (mut lo, mut width) = (first_lo, first_width.max(1));
    while lo <= m {
        let hi = (lo + width - 1).min(m);
        bins.push((lo, hi));
        lo = hi + 1;
        width *= 2;
    }
    bins
}

/// Bins covering every rank from the top: 1, 2-3, 4-7, ...
pub fn bins_from_top(m: usize) -> Vec<(usize, usize)> {
    rank_bins(1, 1, m)
}

/// Bins beyond the candidate threshold: K+1..K+2, K+3..K+6, ...
pub fn bins_beyond(k: usize, m: usize) -> Vec<(usize, usize)> {
    rank_bins(k + 1, 2, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub bin: usize,
    pub reviewer: usize,
    pub paper: usize,
    /// Honest rank of the reviewer for the paper.
    pub rank: usize,
}

/// Draws up to `per_bin` distinct (paper, rank) pairs per bin among `papers`.
pub fn sample_trials(
    scores: &ScoreMatrix,
    papers: &[usize],
    bins: &[(usize, usize)],
    per_bin: usize,
    seed: u64,
    label: &str,
) -> Vec<Trial> {
    let mut out = Vec::new();
    for (b, &(lo, hi)) in bins.iter().enumerate() {
        let width = hi - lo + 1;
        let population = papers.len() * width;
        let mut rng = rng::stream(seed, label, b as u64);
        let mut picks = sample(&mut rng, population, per_bin.min(population)).into_vec();
        picks.sort_unstable();
        for i in picks {
            let p = papers[i / width];
            let rank = lo + i % width;
            out.push(Trial { bin: b, reviewer: scores.ranking(p)[rank - 1] as usize, paper: p, rank });
        }
    }
    out
}

pub fn sample_target_papers(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, "target-papers", 0);
    let mut papers = sample(&mut rng, n, count.min(n)).into_vec();
    papers.sort_unstable();
    papers
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringRule {
    Neurips2014,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    SimpleBlackbox,
    Whitebox,
    ColludingBlackbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Population {
    /// Attacks that won the assignment without a defense.
    Successful,
    /// Attacks that lifted the reviewer from beyond K into the candidate set.
    TopKEntrants,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: Trial,
    pub plan: AttackPlan,
    pub honest_success: bool,
    pub success: bool,
    /// Rank of the target reviewer under poisoned scores.
    pub poisoned_rank: usize,
    /// Removal verdict of the planted pair per detector budget, aligned with
    /// the sizes passed to the experiment.
    pub removed: Vec<bool>,
}

impl TrialOutcome {
    pub fn in_population(&self, population: Population, k: usize) -> bool {
        match population {
            Population::Successful => self.success,
            Population::TopKEntrants => self.trial.rank > k && self.poisoned_rank <= k,
        }
    }
}

/// Trained model and derived state for one conference.
pub struct Study<'a> {
    pub conf: &'a Conference,
    pub x: &'a CsrMatrix,
    pub cfg: &'a ExperimentConfig,
    pub lambda: f64,
    pub u_cap: usize,
    pub seed: u64,
    /// Capped training labels, reviewer-major.
    pub y: Vec<f64>,
    pub model: ScoreModel,
    pub scores: ScoreMatrix,
    /// `X_tᵀ y_t` per reviewer, reviewer-major m x d.
    gradients: Vec<f64>,
}

impl<'a> Study<'a> {
    pub fn new(
        conf: &'a Conference,
        x: &'a CsrMatrix,
        cfg: &'a ExperimentConfig,
        lambda: f64,
        u_cap: usize,
        seed: u64,
    ) -> Result<Self> {
        let (m, n) = (conf.n_reviewers(), conf.n_papers());
        cfg.validate(m, n)?;
        if x.n_rows() != m * n {
            return Err(Error::Dimension(format!("{} feature rows for {m}x{n}", x.n_rows())));
        }
        let y = cap_positive_bids(conf.bids(), u_cap, seed)?.labels();
        let model = train_ridge(x, &y, lambda)?;
        let scores = ScoreMatrix::new(m, n, model.predict(x)?)?;
        let d = x.n_cols();
        let mut gradients = vec![0.0; m * d];
        for t in 0..m {
            for q in 0..n {
                let label = y[t * n + q];
                if label != 0.0 {
                    for (j, v) in x.row(t * n + q).iter() {
                        gradients[t * d + j as usize] += label * v;
                    }
                }
            }
        }
        Ok(Study { conf, x, cfg, lambda, u_cap, seed, y, model, scores, gradients })
    }

    pub fn m(&self) -> usize {
        self.conf.n_reviewers()
    }

    pub fn n(&self) -> usize {
        self.conf.n_papers()
    }

    pub fn instance(&self) -> Instance<'_> {
        Instance { x: self.x, y: &self.y, m: self.m(), n: self.n() }
    }

    /// Weights after replacing the party's labels, via one extra solve.
    pub fn poisoned_model_weights(&self, plan: &AttackPlan) -> Vec<f64> {
        let n = self.n();
        let mut delta = vec![0.0; self.x.n_cols()];
        for member in &plan.party {
            let t = member.reviewer;
            for (q, &b) in member.bids.iter().enumerate() {
                let diff = f64::from(b) - self.y[t * n + q];
                if diff != 0.0 {
                    for (j, v) in self.x.row(t * n + q).iter() {
                        delta[j as usize] += diff * v;
                    }
                }
            }
        }
        let dw = self.model.solve(&delta);
        self.model.weights().iter().zip(dw).map(|(w, d)| w + d).collect()
    }

    pub fn poisoned_scores(&self, plan: &AttackPlan) -> Result<ScoreMatrix> {
        let w = self.poisoned_model_weights(plan);
        ScoreMatrix::new(self.m(), self.n(), self.x.mul_dense(&w))
    }

    /// Contributions of every reviewer's poisoned labels to s(r,p) under
    /// the fixed Hessian.
    fn poisoned_contributions(&self, plan: &AttackPlan, r: usize, p: usize) -> Vec<f64> {
        let (n, d) = (self.n(), self.x.n_cols());
        let v = self.model.inverse_times_sparse(self.x.row(r * n + p));
        let mut c: Vec<f64> = (0..self.m())
            .map(|t| self.gradients[t * d..(t + 1) * d].iter().zip(&v).map(|(g, a)| g * a).sum())
            .collect();
        for member in &plan.party {
            let t = member.reviewer;
            let mut extra = 0.0;
            for (q, &b) in member.bids.iter().enumerate() {
                let diff = f64::from(b) - self.y[t * n + q];
                if diff != 0.0 {
                    extra += diff * self.x.row(t * n + q).dot_dense(&v);
                }
            }
            c[t] += extra;
        }
        c
    }

    /// Whether each detector budget removes the planted pair from the
    /// poisoned candidate set.
    fn detect(&self, plan: &AttackPlan, poisoned: &ScoreMatrix, sizes: &[usize]) -> Result<Vec<bool>> {
        let (r, p) = (plan.reviewer, plan.paper);
        let k = self.cfg.k;
        match self.cfg.detector {
            Detector::Approx => {
                let c = self.poisoned_contributions(plan, r, p);
                Ok(sizes
                    .iter()
                    .map(|&md| {
                        let party = top_party(r, md, &c);
                        let robust = poisoned.get(r, p) - party.iter().map(|&t| c[t]).sum::<f64>();
                        rank_against_others(poisoned, r, p, robust) > k
                    })
                    .collect())
            }
            Detector::Exact(strategy) => {
                let y = plan.apply_labels(&self.y, self.n());
                let inst = Instance { x: self.x, y: &y, m: self.m(), n: self.n() };
                sizes
                    .iter()
                    .map(|&md| {
                        let (robust, _) = robust_score_exact(&inst, self.lambda, r, p, md, strategy)?;
                        Ok(rank_against_others(poisoned, r, p, robust) > k)
                    })
                    .collect()
            }
        }
    }

    fn plan_for(&self, kind: AttackKind, trial: &Trial, party_size: usize) -> Result<AttackPlan> {
        let (r, p) = (trial.reviewer, trial.paper);
        match kind {
            AttackKind::SimpleBlackbox => Ok(AttackPlan {
                reviewer: r,
                paper: p,
                party: vec![MemberBids { reviewer: r, bids: simple_blackbox_bids(self.n(), p) }],
                predicted_gain: None,
            }),
            AttackKind::Whitebox => whitebox_colluding(&self.model, &self.instance(), r, p, party_size, self.u_cap),
            AttackKind::ColludingBlackbox => colluding_blackbox(self.conf, self.x, r, p, party_size, self.u_cap),
        }
    }

    fn assign(&self, scores: &ScoreMatrix, permitted: Option<&CandidateSet>) -> Result<Assignment> {
        solve_assignment(scores, permitted, self.cfg.reviewers_per_paper, self.cfg.papers_per_reviewer)
    }

    /// Honest assignment under a rule; regression assignments are limited
    /// to the top-K candidates when `restrict` is set.
    pub fn honest_assignment(&self, rule: ScoringRule, restrict: bool) -> Result<(ScoreMatrix, Assignment)> {
        let scores = match rule {
            ScoringRule::Neurips2014 => neurips2014_score(self.conf)?,
            ScoringRule::Regression => self.scores.clone(),
        };
        let permitted = if restrict { Some(build_candidate_set(&scores, self.cfg.k)?) } else { None };
        let a = self.assign(&scores, permitted.as_ref())?;
        Ok((scores, a))
    }

    /// Plants each trial's attack on its own, reassigns, and records success
    /// and detector verdicts.
    pub fn attack_success_experiment(
        &self,
        rule: ScoringRule,
        kind: AttackKind,
        party_size: usize,
        trials: &[Trial],
        restrict: bool,
        detector_sizes: &[usize],
    ) -> Result<Vec<TrialOutcome>> {
        if rule == ScoringRule::Neurips2014 && kind != AttackKind::SimpleBlackbox {
            return Err(Error::param("the formula baseline only supports the simple black-box attack"));
        }
        let (_, honest) = self.honest_assignment(rule, restrict)?;
        trials
            .par_iter()
            .map(|trial| {
                let plan = self.plan_for(kind, trial, party_size)?;
                let poisoned = match rule {
                    ScoringRule::Neurips2014 => {
                        let bids = plan.apply(self.conf.bids())?;
                        neurips2014_score(&self.conf.with_bids(bids)?)?
                    }
                    ScoringRule::Regression => self.poisoned_scores(&plan)?,
                };
                let permitted = if restrict { Some(build_candidate_set(&poisoned, self.cfg.k)?) } else { None };
                let a = self.assign(&poisoned, permitted.as_ref())?;
                let success = plan.members().any(|t| a.is_assigned(t, trial.paper));
                let removed = if rule == ScoringRule::Regression && !detector_sizes.is_empty() {
                    self.detect(&plan, &poisoned, detector_sizes)?
                } else {
                    vec![false; detector_sizes.len()]
                };
                Ok(TrialOutcome {
                    trial: *trial,
                    honest_success: honest.is_assigned(trial.reviewer, trial.paper),
                    success,
                    poisoned_rank: poisoned.rank(trial.reviewer, trial.paper),
                    removed,
                    plan,
                })
            })
            .collect()
    }

    /// Assignment under the regression rule with candidate filtering by a
    /// detector of budget `md` (0 disables detection).
    pub fn defended_assignment(&self, md: usize) -> Result<(Assignment, Option<Vec<DetectionVerdict>>)> {
        let cands = build_candidate_set(&self.scores, self.cfg.k)?;
        if md == 0 {
            return Ok((self.assign(&self.scores, Some(&cands))?, None));
        }
        let inst = self.instance();
        let (kept, verdicts) = match self.cfg.detector {
            Detector::Approx => {
                let proj = LabelProjection::new(&self.model, &inst);
                filter_candidates_approx(&cands, &self.scores, &proj, &inst, md)?
            }
            d => filter_candidates(&cands, &self.scores, &self.model, &inst, d, md)?,
        };
        Ok((self.assign(&self.scores, Some(&kept))?, Some(verdicts)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub frac_positive_bids: Option<f64>,
    pub avg_bid_score: Option<f64>,
    pub avg_tpms: Option<f64>,
    pub avg_max_tpms: Option<f64>,
    pub n_under_reviewed: usize,
    /// False-positive rate among honest candidates at each top-j cut.
    pub fpr: Vec<(usize, Option<f64>)>,
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        None
    } else {
        Some(kahan_sum(v.iter().copied()) / v.len() as f64)
    }
}

/// Quality of an assignment measured against the honest bids and TPMS.
pub fn assignment_quality(a: &Assignment, conf: &Conference) -> QualityReport {
    let bids = conf.bids();
    let pairs = &a.pairs;
    let max_tpms = (0..conf.n_papers()).filter_map(|p| {
        a.reviewers_of(p).map(|r| conf.tpms(r, p)).fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |b| b.max(t))))
    });
    QualityReport {
        frac_positive_bids: mean(pairs.iter().map(|&(r, p)| if bids.get(r, p) > 0 { 1.0 } else { 0.0 })),
        avg_bid_score: mean(pairs.iter().map(|&(r, p)| f64::from(bids.get(r, p)))),
        avg_tpms: mean(pairs.iter().map(|&(r, p)| conf.tpms(r, p))),
        avg_max_tpms: mean(max_tpms),
        n_under_reviewed: a.deficit.iter().filter(|&&d| d > 0).count(),
        fpr: Vec::new(),
    }
}

/// Fraction of honest candidates ranked within `top_j` that were removed.
pub fn detection_fpr(verdicts: &[DetectionVerdict], scores: &ScoreMatrix, top_j: usize) -> Option<f64> {
    mean(
        verdicts
            .iter()
            .filter(|v| scores.rank(v.reviewer, v.paper) <= top_j)
            .map(|v| if v.removed { 1.0 } else { 0.0 }),
    )
}

/// Removed planted pairs over planted pairs in the population, for the
/// detector budget at `size_index`.
pub fn detection_tpr(outcomes: &[TrialOutcome], size_index: usize, population: Population, k: usize) -> Option<f64> {
    mean(
        outcomes
            .iter()
            .filter(|o| o.in_population(population, k))
            .map(|o| if o.removed[size_index] { 1.0 } else { 0.0 }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRate {
    pub lo: usize,
    pub hi: usize,
    pub trials: usize,
    pub honest_rate: Option<f64>,
    pub attack_rate: Option<f64>,
    /// Fraction of trials whose reviewer entered the top K after the attack.
    pub entry_rate: Option<f64>,
}

pub fn bin_rates(outcomes: &[TrialOutcome], bins: &[(usize, usize)], k: usize) -> Vec<BinRate> {
    bins.iter()
        .enumerate()
        .map(|(b, &(lo, hi))| {
            let here: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.trial.bin == b).collect();
            let rate = |f: &dyn Fn(&TrialOutcome) -> bool| mean(here.iter().map(|o| if f(o) { 1.0 } else { 0.0 }));
            BinRate {
                lo,
                hi,
                trials: here.len(),
                honest_rate: rate(&|o| o.honest_success),
                attack_rate: rate(&|o| o.success),
                entry_rate: rate(&|o| o.poisoned_rank <= k),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Row {
    pub rule: ScoringRule,
    pub rate: BinRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub attack: AttackKind,
    pub party_size: usize,
    pub rate: BinRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Row {
    pub attack: AttackKind,
    pub population: Population,
    pub party_size: usize,
    pub detector_size: usize,
    pub attacks: usize,
    pub tpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub setting: String,
    pub quality: QualityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub defense: String,
    pub param: usize,
    pub quality: QualityReport,
    /// (party size, TPR)
    pub tpr: Vec<(usize, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApRow {
    pub split: String,
    pub axis: String,
    pub k: usize,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Results {
    pub fig1: Vec<Fig1Row>,
    pub fig2: Vec<Fig2Row>,
    pub fig3: Vec<Fig3Row>,
    pub table1: Vec<Table1Row>,
    pub table2: Vec<Table2Row>,
    pub ap_at_k: Vec<ApRow>,
}

/// Simple black-box attacker against both rules, bins from rank 1, no
/// candidate restriction.
pub fn simple_blackbox_study(study: &Study<'_>, papers: &[usize]) -> Result<Vec<Fig1Row>> {
    let bins = bins_from_top(study.m());
    let mut rows = Vec::new();
    for rule in [ScoringRule::Neurips2014, ScoringRule::Regression] {
        let (scores, _) = study.honest_assignment(rule, false)?;
        let label = match rule {
            ScoringRule::Neurips2014 => "trials-simple-formula",
            ScoringRule::Regression => "trials-simple-regression",
        };
        let trials = sample_trials(&scores, papers, &bins, study.cfg.samples_per_bin, study.seed, label);
        let outcomes = study.attack_success_experiment(rule, AttackKind::SimpleBlackbox, 1, &trials, false, &[])?;
        rows.extend(bin_rates(&outcomes, &bins, study.cfg.k).into_iter().map(|rate| Fig1Row { rule, rate }));
    }
    Ok(rows)
}

/// Trial outcomes keyed by party size.
pub type RawOutcomes = Vec<(usize, Vec<TrialOutcome>)>;

/// Colluding attack sweep: success per bin and detection rates per
/// detector budget. Returns the raw outcomes per party size as well.
pub fn colluding_study(
    study: &Study<'_>,
    papers: &[usize],
    kind: AttackKind,
    party_sizes: &[usize],
) -> Result<(Vec<Fig2Row>, Vec<Fig3Row>, RawOutcomes)> {
    let k = study.cfg.k;
    let bins = bins_beyond(k, study.m());
    let trials = sample_trials(&study.scores, papers, &bins, study.cfg.samples_per_bin, study.seed, "trials-colluding");
    let sizes = study.cfg.all_detector_sizes();
    let (mut fig2, mut fig3, mut raw) = (Vec::new(), Vec::new(), Vec::new());
    for &ma in party_sizes {
        let outcomes = study.attack_success_experiment(ScoringRule::Regression, kind, ma, &trials, true, &sizes)?;
        fig2.extend(bin_rates(&outcomes, &bins, k).into_iter().map(|rate| Fig2Row {
            attack: kind,
            party_size: ma,
            rate,
        }));
        for population in [Population::Successful, Population::TopKEntrants] {
            let attacks = outcomes.iter().filter(|o| o.in_population(population, k)).count();
            for (i, &md) in sizes.iter().enumerate() {
                fig3.push(Fig3Row {
                    attack: kind,
                    population,
                    party_size: ma,
                    detector_size: md,
                    attacks,
                    tpr: detection_tpr(&outcomes, i, population, k),
                });
            }
        }
        raw.push((ma, outcomes));
    }
    Ok((fig2, fig3, raw))
}

pub fn quality_table(study: &Study<'_>) -> Result<Vec<Table1Row>> {
    let mut rows = Vec::new();
    let (_, a) = study.honest_assignment(ScoringRule::Neurips2014, false)?;
    rows.push(Table1Row { setting: "neurips2014".into(), quality: assignment_quality(&a, study.conf) });
    let tpms = tpms_only_score(study.conf)?;
    let a = study.assign(&tpms, None)?;
    rows.push(Table1Row { setting: "tpms-only".into(), quality: assignment_quality(&a, study.conf) });
    let mut sizes = vec![0];
    sizes.extend(study.cfg.all_detector_sizes());
    for md in sizes {
        let (a, verdicts) = study.defended_assignment(md)?;
        let mut q = assignment_quality(&a, study.conf);
        // with the detector off nothing is removed, so the rate is zero
        q.fpr = study
            .cfg
            .fpr_top
            .iter()
            .map(|&j| {
                let j = j.min(study.cfg.k);
                (j, verdicts.as_ref().map_or(Some(0.0), |v| detection_fpr(v, &study.scores, j)))
            })
            .collect();
        rows.push(Table1Row { setting: format!("md={md}"), quality: q });
    }
    Ok(rows)
}

/// TRIM at each L against the robust filter. TRIM detects a planted attack
/// when it trims the planted pair's own row.
pub fn trim_comparison(
    study: &Study<'_>,
    table1: &[Table1Row],
    whitebox: &[(usize, Vec<TrialOutcome>)],
) -> Result<Vec<Table2Row>> {
    let cfg = study.cfg;
    let k = cfg.k;
    let n = study.n();
    let outcomes_for = |ma: usize| whitebox.iter().find(|(s, _)| *s == ma).map(|(_, o)| o.as_slice());
    let mut rows = Vec::new();
    let quality_of = |setting: &str| {
        table1
            .iter()
            .find(|r| r.setting == setting)
            .map(|r| r.quality.clone())
            .ok_or_else(|| Error::param(format!("quality row {setting} missing")))
    };
    rows.push(Table2Row {
        defense: "none".into(),
        param: 0,
        quality: quality_of("md=0")?,
        tpr: cfg.comparison_party_sizes.iter().map(|&ma| (ma, Some(0.0))).collect(),
    });
    for &l in &cfg.trim_sizes {
        let trimmed = trim_fit(study.x, &study.y, l, study.lambda, cfg.trim_max_iters)?;
        let scores = ScoreMatrix::new(study.m(), n, trimmed.model.predict(study.x)?)?;
        let mut cands = build_candidate_set(&scores, k)?;
        for &i in &trimmed.removed {
            cands.remove(i / n, i % n);
        }
        let a = study.assign(&scores, Some(&cands))?;
        let quality = assignment_quality(&a, study.conf);
        let mut tpr = Vec::new();
        for &ma in &cfg.comparison_party_sizes {
            let Some(outcomes) = outcomes_for(ma) else {
                tpr.push((ma, None));
                continue;
            };
            let chosen: Vec<&TrialOutcome> =
                outcomes.iter().filter(|o| o.in_population(Population::Successful, k)).take(cfg.trim_trials).collect();
            let hits = chosen
                .par_iter()
                .map(|o| {
                    let y = o.plan.apply_labels(&study.y, n);
                    let fit = trim_fit(study.x, &y, l, study.lambda, cfg.trim_max_iters)?;
                    let row = o.plan.reviewer * n + o.plan.paper;
                    Ok(if fit.removed.binary_search(&row).is_ok() { 1.0 } else { 0.0 })
                })
                .collect::<Result<Vec<f64>>>()?;
            tpr.push((ma, mean(hits)));
        }
        rows.push(Table2Row { defense: "trim".into(), param: l, quality, tpr });
    }
    let sizes = cfg.all_detector_sizes();
    for &md in &cfg.comparison_detector_sizes {
        let idx = sizes.iter().position(|&s| s == md).expect("comparison sizes are part of all sizes");
        let tpr = cfg
            .comparison_party_sizes
            .iter()
            .map(|&ma| (ma, outcomes_for(ma).and_then(|o| detection_tpr(o, idx, Population::Successful, k))))
            .collect();
        rows.push(Table2Row { defense: "robust".into(), param: md, quality: quality_of(&format!("md={md}"))?, tpr });
    }
    Ok(rows)
}

/// Precision at k on a per-reviewer hold-out split, for both the training
/// positives and the held-out positives.
pub fn precision_table(study: &Study<'_>) -> Result<Vec<ApRow>> {
    let cfg = study.cfg;
    if cfg.ap_max_k == 0 {
        return Ok(Vec::new());
    }
    let (m, n) = (study.m(), study.n());
    let capped = cap_positive_bids(study.conf.bids(), study.u_cap, study.seed)?;
    let (train, test) = holdout_split(&capped, cfg.holdout_fraction, study.seed)?;
    let model = train_ridge(study.x, &train.labels(), study.lambda)?;
    let scores = ScoreMatrix::new(m, n, model.predict(study.x)?)?;
    let mut rows = Vec::new();
    for (split, positives, exclude) in [("train", &train, None), ("test", &test, Some(&train))] {
        for (axis_name, axis) in [("reviewer", ApAxis::PerReviewer), ("paper", ApAxis::PerPaper)] {
            for k in 1..=cfg.ap_max_k {
                let ap = average_precision_at_k(&scores, positives, k, axis, exclude)?;
                rows.push(ApRow { split: split.into(), axis: axis_name.into(), k, ap });
            }
        }
    }
    Ok(rows)
}

/// Every experiment in order.
pub fn run_experiments(study: &Study<'_>) -> Result<Results> {
    let cfg = study.cfg;
    let papers = sample_target_papers(study.n(), cfg.n_target_papers, study.seed);
    let fig1 = if cfg.run_simple_blackbox { simple_blackbox_study(study, &papers)? } else { Vec::new() };
    let mut party_sizes = cfg.party_sizes.clone();
    for &ma in &cfg.comparison_party_sizes {
        if !cfg.trim_sizes.is_empty() && !party_sizes.contains(&ma) {
            party_sizes.push(ma);
        }
    }
    party_sizes.sort_unstable();
    let (mut fig2, mut fig3, raw) = colluding_study(study, &papers, AttackKind::Whitebox, &party_sizes)?;
    if !cfg.blackbox_party_sizes.is_empty() {
        let (f2, f3, _) = colluding_study(study, &papers, AttackKind::ColludingBlackbox, &cfg.blackbox_party_sizes)?;
        fig2.extend(f2);
        fig3.extend(f3);
    }
    let table1 = quality_table(study)?;
    let table2 = if cfg.trim_sizes.is_empty() { Vec::new() } else { trim_comparison(study, &table1, &raw)? };
    let ap_at_k = precision_table(study)?;
    Ok(Results { fig1, fig2, fig3, table1, table2, ap_at_k })
}
