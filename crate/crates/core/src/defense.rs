//! Robust scores, candidate filtering and the trimmed-loss baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{top_party, Instance};
use crate::error::{Error, Result};
use crate::scoring::{
    fit_with_gram, regularized_gram, remove_rows_from_gram, train_ridge, train_ridge_masked, ScoreMatrix, ScoreModel,
};
use crate::sparse::CsrMatrix;

/// Per paper, the reviewers still eligible for assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    k: usize,
    m: usize,
    /// Paper-major, best rank first.
    members: Vec<Vec<u32>>,
}

pub fn build_candidate_set(scores: &ScoreMatrix, k: usize) -> Result<CandidateSet> {
    let m = scores.n_reviewers();
    if k == 0 || k > m {
        return Err(Error::param(format!("candidate size K = {k} with {m} reviewers")));
    }
    let members = (0..scores.n_papers()).map(|p| scores.ranking(p)[..k].to_vec()).collect();
    Ok(CandidateSet { k, m, members })
}

impl CandidateSet {
    /// Every reviewer permitted for every paper.
    pub fn full(m: usize, n: usize) -> Self {
        CandidateSet { k: m, m, members: vec![(0..m as u32).collect(); n] }
    }

    pub fn from_members(m: usize, k: usize, members: Vec<Vec<u32>>) -> Self {
        CandidateSet { k, m, members }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_reviewers(&self) -> usize {
        self.m
    }

    pub fn n_papers(&self) -> usize {
        self.members.len()
    }

    pub fn of_paper(&self, p: usize) -> &[u32] {
        &self.members[p]
    }

    pub fn contains(&self, r: usize, p: usize) -> bool {
        self.members[p].contains(&(r as u32))
    }

    pub fn len(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (reviewer, paper) pairs, paper by paper in rank order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.members.iter().enumerate().flat_map(|(p, rs)| rs.iter().map(move |&r| (r as usize, p)))
    }

    pub fn remove(&mut self, r: usize, p: usize) -> bool {
        let before = self.members[p].len();
        self.members[p].retain(|&t| t as usize != r);
        before != self.members[p].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub reviewer: usize,
    pub paper: usize,
    pub score: f64,
    pub robust_score: f64,
    pub party: Vec<usize>,
    pub removed: bool,
}

/// Rank r would take for paper p with score `value`, against the other
/// reviewers' unchanged scores and the lower-index tie rule.
pub fn rank_against_others(scores: &ScoreMatrix, r: usize, p: usize, value: f64) -> usize {
    1 + (0..scores.n_reviewers())
        .filter(|&t| t != r)
        .filter(|&t| {
            let s = scores.get(t, p);
            s > value || (s == value && t < r)
        })
        .count()
}

/// Per reviewer t, `H⁻¹ X_tᵀ y_t`, stored dimension-major so that the
/// contribution of every reviewer to one score is a sparse pass over it.
#[derive(Debug, Clone)]
pub struct LabelProjection {
    m: usize,
    /// `data[j * m + t]`
    data: Vec<f64>,
}

fn reviewer_gradient(inst: &Instance<'_>, t: usize) -> Vec<f64> {
    let mut g = vec![0.0; inst.x.n_cols()];
    for q in 0..inst.n {
        let y = inst.y[t * inst.n + q];
        if y != 0.0 {
            for (j, v) in inst.x.row(t * inst.n + q).iter() {
                g[j as usize] += y * v;
            }
        }
    }
    g
}

impl LabelProjection {
    pub fn new(model: &ScoreModel, inst: &Instance<'_>) -> Self {
        let d = inst.x.n_cols();
        let mut proj = LabelProjection { m: inst.m, data: vec![0.0; d * inst.m] };
        let all: Vec<usize> = (0..inst.m).collect();
        proj.refresh(model, inst, &all);
        proj
    }

    /// Recomputes the columns of the listed reviewers after their labels changed.
    pub fn refresh(&mut self, model: &ScoreModel, inst: &Instance<'_>, reviewers: &[usize]) {
        let cols: Vec<Vec<f64>> = reviewers.par_iter().map(|&t| model.solve(&reviewer_gradient(inst, t))).collect();
        for (&t, col) in reviewers.iter().zip(cols) {
            for (j, v) in col.into_iter().enumerate() {
                self.data[j * self.m + t] = v;
            }
        }
    }

    /// c_t = X(r,p) H⁻¹ X_tᵀ y_t for every reviewer t.
    pub fn contributions(&self, x: &CsrMatrix, row: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.m];
        for (j, v) in x.row(row).iter() {
            let slice = &self.data[j as usize * self.m..(j as usize + 1) * self.m];
            for (ct, b) in c.iter_mut().zip(slice) {
                *ct += v * b;
            }
        }
        c
    }
}

/// Fixed-Hessian robust score: remove r's own influence and that of the
/// `party_size - 1` reviewers contributing most to s(r,p).
pub fn robust_score_approx(
    proj: &LabelProjection,
    inst: &Instance<'_>,
    score: f64,
    r: usize,
    p: usize,
    party_size: usize,
) -> Result<(f64, Vec<usize>)> {
    if party_size == 0 || party_size > inst.m {
        return Err(Error::param(format!("detector party of {party_size} among {} reviewers", inst.m)));
    }
    let c = proj.contributions(inst.x, inst.row_index(r, p));
    let party = top_party(r, party_size, &c);
    let removed: f64 = party.iter().map(|&t| c[t]).sum();
    Ok((score - removed, party))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactStrategy {
    Enumerate,
    GreedyRefit,
}

pub const ENUMERATE_MAX_REVIEWERS: usize = 15;
pub const DETECTION_ORACLE_MAX_REVIEWERS: usize = 12;

/// s(r,p) after refitting without every row of the listed reviewers.
pub fn refit_score_without(inst: &Instance<'_>, lambda: f64, party: &[usize], r: usize, p: usize) -> Result<f64> {
    let mut keep = vec![true; inst.m * inst.n];
    for &t in party {
        keep[t * inst.n..(t + 1) * inst.n].fill(false);
    }
    let model = train_ridge_masked(inst.x, inst.y, lambda, Some(&keep))?;
    Ok(inst.x.row(inst.row_index(r, p)).dot_dense(model.weights()))
}

fn combinations(pool: &[usize], k: usize, f: &mut impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn rec(
        pool: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if cur.len() == k {
            return f(cur);
        }
        for i in start..pool.len() {
            if pool.len() - i < k - cur.len() {
                break;
            }
            cur.push(pool[i]);
            rec(pool, k, i + 1, cur, f)?;
            cur.pop();
        }
        Ok(())
    }
    rec(pool, k, 0, &mut Vec::with_capacity(k), f)
}

/// Refit-based robust score: the smallest s(r,p) over parties of
/// `party_size` containing r, each evaluated by retraining without them.
pub fn robust_score_exact(
    inst: &Instance<'_>,
    lambda: f64,
    r: usize,
    p: usize,
    party_size: usize,
    strategy: ExactStrategy,
) -> Result<(f64, Vec<usize>)> {
    if party_size == 0 || party_size > inst.m {
        return Err(Error::param(format!("detector party of {party_size} among {} reviewers", inst.m)));
    }
    match strategy {
        ExactStrategy::Enumerate => {
            if inst.m > ENUMERATE_MAX_REVIEWERS {
                return Err(Error::InstanceTooLarge(format!(
                    "subset enumeration limited to {ENUMERATE_MAX_REVIEWERS} reviewers, got {}",
                    inst.m
                )));
            }
            let others: Vec<usize> = (0..inst.m).filter(|&t| t != r).collect();
            let mut best = (f64::INFINITY, Vec::new());
            combinations(&others, party_size - 1, &mut |rest| {
                let mut party = vec![r];
                party.extend_from_slice(rest);
                let value = refit_score_without(inst, lambda, &party, r, p)?;
                if value < best.0 {
                    best = (value, party);
                }
                Ok(())
            })?;
            Ok(best)
        }
        ExactStrategy::GreedyRefit => {
            let full = train_ridge(inst.x, inst.y, lambda)?;
            let proj = LabelProjection::new(&full, inst);
            let score = inst.x.row(inst.row_index(r, p)).dot_dense(full.weights());
            let (_, approx_party) = robust_score_approx(&proj, inst, score, r, p, party_size)?;
            let approx_value = refit_score_without(inst, lambda, &approx_party, r, p)?;

            let target = inst.x.row_vector(inst.row_index(r, p)).to_dense();
            let gradients: Vec<Vec<f64>> = (0..inst.m).map(|t| reviewer_gradient(inst, t)).collect();
            let mut party = vec![r];
            while party.len() < party_size {
                let mut keep = vec![true; inst.m * inst.n];
                for &t in &party {
                    keep[t * inst.n..(t + 1) * inst.n].fill(false);
                }
                let model = train_ridge_masked(inst.x, inst.y, lambda, Some(&keep))?;
                let v = model.solve(&target);
                let mut pick: Option<(usize, f64)> = None;
                for t in (0..inst.m).filter(|t| !party.contains(t)) {
                    let c: f64 = v.iter().zip(&gradients[t]).map(|(a, b)| a * b).sum();
                    if pick.is_none_or(|(_, best)| c > best) {
                        pick = Some((t, c));
                    }
                }
                party.push(pick.expect("party smaller than reviewer count").0);
            }
            let greedy_value = refit_score_without(inst, lambda, &party, r, p)?;
            if approx_value < greedy_value {
                Ok((approx_value, approx_party))
            } else {
                Ok((greedy_value, party))
            }
        }
    }
}

/// Exhaustive refit minimum over bitmask-enumerated parties.
pub fn brute_force_detection_oracle(
    inst: &Instance<'_>,
    lambda: f64,
    r: usize,
    p: usize,
    party_size: usize,
) -> Result<f64> {
    let m = inst.m;
    if m > DETECTION_ORACLE_MAX_REVIEWERS {
        return Err(Error::InstanceTooLarge(format!(
            "detection oracle limited to {DETECTION_ORACLE_MAX_REVIEWERS} reviewers, got {m}"
        )));
    }
    if party_size == 0 || party_size > m {
        return Err(Error::param(format!("detector party of {party_size} among {m} reviewers")));
    }
    let row = inst.row_index(r, p);
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << m) {
        if mask & (1 << r) == 0 || mask.count_ones() as usize != party_size {
            continue;
        }
        let keep: Vec<bool> = (0..m * inst.n).map(|i| mask & (1 << (i / inst.n)) == 0).collect();
        let w = train_ridge_masked(inst.x, inst.y, lambda, Some(&keep))?;
        best = best.min(inst.x.row(row).dot_dense(w.weights()));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "strategy")]
pub enum Detector {
    Approx,
    Exact(ExactStrategy),
}

/// Screens every candidate pair and drops those whose robust score would
/// rank beyond K.
pub fn filter_candidates(
    candidates: &CandidateSet,
    scores: &ScoreMatrix,
    model: &ScoreModel,
    inst: &Instance<'_>,
    detector: Detector,
    party_size: usize,
) -> Result<(CandidateSet, Vec<DetectionVerdict>)> {
    let proj = match detector {
        Detector::Approx => Some(LabelProjection::new(model, inst)),
        Detector::Exact(_) => None,
    };
    filter_with(candidates, scores, inst, party_size, |r, p| match detector {
        Detector::Approx => robust_score_approx(proj.as_ref().unwrap(), inst, scores.get(r, p), r, p, party_size),
        Detector::Exact(strategy) => robust_score_exact(inst, model.lambda(), r, p, party_size, strategy),
    })
}

/// [`filter_candidates`] with the approximate detector on a prepared projection.
pub fn filter_candidates_approx(
    candidates: &CandidateSet,
    scores: &ScoreMatrix,
    proj: &LabelProjection,
    inst: &Instance<'_>,
    party_size: usize,
) -> Result<(CandidateSet, Vec<DetectionVerdict>)> {
    filter_with(candidates, scores, inst, party_size, |r, p| {
        robust_score_approx(proj, inst, scores.get(r, p), r, p, party_size)
    })
}

fn filter_with(
    candidates: &CandidateSet,
    scores: &ScoreMatrix,
    inst: &Instance<'_>,
    party_size: usize,
    robust: impl Fn(usize, usize) -> Result<(f64, Vec<usize>)> + Sync,
) -> Result<(CandidateSet, Vec<DetectionVerdict>)> {
    if party_size == 0 || party_size > inst.m {
        return Err(Error::param(format!("detector party of {party_size} among {} reviewers", inst.m)));
    }
    let k = candidates.k();
    let per_paper: Vec<Vec<DetectionVerdict>> = (0..candidates.n_papers())
        .into_par_iter()
        .map(|p| {
            candidates
                .of_paper(p)
                .iter()
                .map(|&r| {
                    let r = r as usize;
                    let (robust_score, party) = robust(r, p)?;
                    Ok(DetectionVerdict {
                        reviewer: r,
                        paper: p,
                        score: scores.get(r, p),
                        robust_score,
                        party,
                        removed: rank_against_others(scores, r, p, robust_score) > k,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut kept = candidates.clone();
    let verdicts: Vec<DetectionVerdict> = per_paper.into_iter().flatten().collect();
    for v in verdicts.iter().filter(|v| v.removed) {
        kept.remove(v.reviewer, v.paper);
    }
    Ok((kept, verdicts))
}

#[derive(Debug, Clone)]
pub struct TrimResult {
    pub model: ScoreModel,
    /// Row indices left out of the final fit, ascending.
    pub removed: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Trimmed objective after each fit.
    pub objective: Vec<f64>,
}

fn keep_smallest(residuals: &[f64], n_keep: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by(|&a, &b| residuals[a].total_cmp(&residuals[b]).then(a.cmp(&b)));
    let mut keep = vec![false; residuals.len()];
    for &i in &order[..n_keep] {
        keep[i] = true;
    }
    keep
}

fn squared_residuals(model: &ScoreModel, x: &CsrMatrix, y: &[f64]) -> Vec<f64> {
    x.mul_dense(model.weights()).iter().zip(y).map(|(s, t)| (s - t) * (s - t)).collect()
}

/// Trimmed ridge: alternately fit on the kept rows and keep the rows with
/// the smallest squared residuals, dropping `n_trim` rows.
pub fn trim_fit(x: &CsrMatrix, y: &[f64], n_trim: usize, lambda: f64, max_iters: usize) -> Result<TrimResult> {
    let rows = x.n_rows();
    if n_trim >= rows {
        return Err(Error::param(format!("cannot trim {n_trim} of {rows} rows")));
    }
    let gram = regularized_gram(x, lambda, None);
    let full = fit_with_gram(gram.clone(), x, y, lambda, None)?;
    if n_trim == 0 {
        return Ok(TrimResult {
            model: full,
            removed: Vec::new(),
            iterations: 0,
            converged: true,
            objective: Vec::new(),
        });
    }
    let mut keep = keep_smallest(&squared_residuals(&full, x, y), rows - n_trim);
    let mut objective = Vec::new();
    let mut converged = false;
    let mut model = full;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut h = gram.clone();
        remove_rows_from_gram(&mut h, x, (0..rows).filter(|&i| !keep[i]));
        model = fit_with_gram(h, x, y, lambda, Some(&keep))?;
        let res = squared_residuals(&model, x, y);
        let penalty: f64 = model.weights().iter().map(|w| w * w).sum::<f64>() * lambda;
        objective.push(res.iter().zip(&keep).filter(|e| *e.1).map(|e| e.0).sum::<f64>() + penalty);
        let next = keep_smallest(&res, rows - n_trim);
        if next == keep {
            converged = true;
            break;
        }
        keep = next;
    }
    let removed = (0..rows).filter(|&i| !keep[i]).collect();
    Ok(TrimResult { model, removed, iterations, converged, objective })
}
