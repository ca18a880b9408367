//! Bid-manipulation attacks against the ridge scorer.
//!
//! Scores are linear in the labels with a label-independent Hessian, so the
//! effect of reviewer t's bids on s(r,p) is z_t · y_t with
//! z = X H⁻¹ X(r,p)ᵀ. Every white-box attack below is exact because of this.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conference::{BidMatrix, Conference};
use crate::error::{Error, Result};
use crate::scoring::ScoreModel;
use crate::sparse::CsrMatrix;

pub const MAX_BID: u8 = 3;

/// Features, labels and shape of one conference instance. Rows of `x` and
/// entries of `y` are reviewer-major.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub x: &'a CsrMatrix,
    pub y: &'a [f64],
    pub m: usize,
    pub n: usize,
}

impl<'a> Instance<'a> {
    pub fn new(x: &'a CsrMatrix, y: &'a [f64], m: usize, n: usize) -> Result<Self> {
        if x.n_rows() != m * n || y.len() != m * n {
            return Err(Error::Dimension(format!("{} feature rows and {} labels for {m}x{n}", x.n_rows(), y.len())));
        }
        Ok(Instance { x, y, m, n })
    }

    pub fn row_index(&self, r: usize, p: usize) -> usize {
        r * self.n + p
    }

    pub fn labels_of(&self, r: usize) -> &'a [f64] {
        &self.y[r * self.n..(r + 1) * self.n]
    }

    fn check_pair(&self, r: usize, p: usize) -> Result<()> {
        if r >= self.m || p >= self.n {
            return Err(Error::param(format!("pair ({r},{p}) outside {}x{}", self.m, self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberBids {
    pub reviewer: usize,
    pub bids: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub reviewer: usize,
    pub paper: usize,
    /// Party members, target reviewer first.
    pub party: Vec<MemberBids>,
    /// Score increase the attacker expects; absent for black-box plans.
    pub predicted_gain: Option<f64>,
}

impl AttackPlan {
    pub fn party_size(&self) -> usize {
        self.party.len()
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.party.iter().map(|b| b.reviewer)
    }

    /// The bid matrix with every party member's row replaced.
    pub fn apply(&self, bids: &BidMatrix) -> Result<BidMatrix> {
        let mut out = bids.clone();
        for member in &self.party {
            if member.reviewer >= out.n_reviewers() {
                return Err(Error::param(format!("party member {} out of range", member.reviewer)));
            }
            out.set_row(member.reviewer, &member.bids)?;
        }
        Ok(out)
    }

    /// Labels with the overlay applied.
    pub fn apply_labels(&self, y: &[f64], n: usize) -> Vec<f64> {
        let mut out = y.to_vec();
        for member in &self.party {
            for (p, &b) in member.bids.iter().enumerate() {
                out[member.reviewer * n + p] = f64::from(b);
            }
        }
        out
    }
}

pub fn is_feasible(bids: &[u8], u_cap: usize) -> bool {
    bids.iter().all(|&b| b <= MAX_BID) && bids.iter().filter(|&&b| b > 0).count() <= u_cap
}

/// Bid eagerly on `p` and nothing else.
pub fn simple_blackbox_bids(n: usize, p: usize) -> Vec<u8> {
    let mut bids = vec![0; n];
    bids[p] = MAX_BID;
    bids
}

/// z over all mn rows for target pair (r, p).
pub fn influence_vector(model: &ScoreModel, inst: &Instance<'_>, r: usize, p: usize) -> Vec<f64> {
    let v = model.inverse_times_sparse(inst.x.row(inst.row_index(r, p)));
    inst.x.mul_dense(&v)
}

/// Best feasible bid vector for a reviewer whose row influence is `z` and
/// current labels `current`: the maximum bid on the `u_cap` largest strictly
/// positive z entries (lower paper index first on ties).
pub fn best_response(z: &[f64], current: &[f64], u_cap: usize) -> (Vec<u8>, f64) {
    let mut positive: Vec<usize> = (0..z.len()).filter(|&q| z[q] > 0.0).collect();
    positive.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    positive.truncate(u_cap);
    let mut bids = vec![0u8; z.len()];
    for q in positive {
        bids[q] = MAX_BID;
    }
    let gain = z.iter().zip(&bids).zip(current).map(|((zq, &b), y)| zq * (f64::from(b) - y)).sum();
    (bids, gain)
}

/// Single attacker: r rewrites its own bids to push s(r,p) up.
pub fn whitebox_single_delta(
    model: &ScoreModel,
    inst: &Instance<'_>,
    r: usize,
    p: usize,
    u_cap: usize,
) -> Result<(Vec<u8>, f64)> {
    inst.check_pair(r, p)?;
    let z = influence_vector(model, inst, r, p);
    Ok(best_response(&z[r * inst.n..(r + 1) * inst.n], inst.labels_of(r), u_cap))
}

/// Colluding white-box attack with a party of `party_size` including r.
pub fn whitebox_colluding(
    model: &ScoreModel,
    inst: &Instance<'_>,
    r: usize,
    p: usize,
    party_size: usize,
    u_cap: usize,
) -> Result<AttackPlan> {
    inst.check_pair(r, p)?;
    if party_size == 0 || party_size > inst.m {
        return Err(Error::param(format!("party of {party_size} among {} reviewers", inst.m)));
    }
    let z = influence_vector(model, inst, r, p);
    let n = inst.n;
    let responses: Vec<(Vec<u8>, f64)> =
        (0..inst.m).map(|t| best_response(&z[t * n..(t + 1) * n], inst.labels_of(t), u_cap)).collect();
    let gains: Vec<f64> = responses.iter().map(|e| e.1).collect();
    let party = top_party(r, party_size, &gains);
    let gain = party.iter().map(|&t| responses[t].1).sum();
    Ok(AttackPlan {
        reviewer: r,
        paper: p,
        party: party.into_iter().map(|t| MemberBids { reviewer: t, bids: responses[t].0.clone() }).collect(),
        predicted_gain: Some(gain),
    })
}

/// `r` followed by the `size - 1` other reviewers with the largest key
/// (lower index first on ties).
pub fn top_party(r: usize, size: usize, keys: &[f64]) -> Vec<usize> {
    let mut others: Vec<usize> = (0..keys.len()).filter(|&t| t != r).collect();
    others.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    std::iter::once(r).chain(others.into_iter().take(size.saturating_sub(1))).collect()
}

/// Black-box collusion: colluders are the reviewers sharing the most subject
/// areas with r, and every member bids on the papers whose feature rows are
/// most aligned with X(r,p).
pub fn colluding_blackbox(
    conf: &Conference,
    x: &CsrMatrix,
    r: usize,
    p: usize,
    party_size: usize,
    u_cap: usize,
) -> Result<AttackPlan> {
    let (m, n) = (conf.n_reviewers(), conf.n_papers());
    if r >= m || p >= n {
        return Err(Error::param(format!("pair ({r},{p}) outside {m}x{n}")));
    }
    if x.n_rows() != m * n {
        return Err(Error::Dimension(format!("{} feature rows for {m}x{n}", x.n_rows())));
    }
    if party_size == 0 || party_size > m {
        return Err(Error::param(format!("party of {party_size} among {m} reviewers")));
    }
    let mine = conf.reviewer_subjects(r);
    let shared: Vec<f64> =
        (0..m).map(|t| conf.reviewer_subjects(t).iter().filter(|s| mine.contains(s)).count() as f64).collect();
    let party = top_party(r, party_size, &shared);
    let target = x.row(r * n + p);
    let party = party
        .into_iter()
        .map(|t| {
            let sim: Vec<f64> = (0..n).map(|q| x.row(t * n + q).dot(target)).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| sim[b].total_cmp(&sim[a]).then(a.cmp(&b)));
            let mut bids = vec![0u8; n];
            for &q in order.iter().take(u_cap) {
                bids[q] = MAX_BID;
            }
            MemberBids { reviewer: t, bids }
        })
        .collect();
    Ok(AttackPlan { reviewer: r, paper: p, party, predicted_gain: None })
}

pub const ORACLE_MAX_REVIEWERS: usize = 8;
pub const ORACLE_MAX_PAPERS: usize = 5;
pub const ORACLE_MAX_CAP: usize = 2;

/// Every bid vector over `n` papers with at most `u_cap` positive entries.
pub fn feasible_bid_vectors(n: usize, u_cap: usize) -> Vec<Vec<u8>> {
    let total = 4usize.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let b = (code % 4) as u8;
                    code /= 4;
                    b
                })
                .collect::<Vec<u8>>()
        })
        .filter(|v| is_feasible(v, u_cap))
        .collect()
}

/// Exhaustive maximum of the colluding objective: for every party of
/// `party_size` containing r and every joint feasible bid assignment, the
/// change in s(r,p) from a dense LU refit.
pub fn brute_force_attack_oracle(
    inst: &Instance<'_>,
    lambda: f64,
    r: usize,
    p: usize,
    party_size: usize,
    u_cap: usize,
) -> Result<f64> {
    let (x, y, m, n) = (inst.x, inst.y, inst.m, inst.n);
    if m > ORACLE_MAX_REVIEWERS || n > ORACLE_MAX_PAPERS || u_cap > ORACLE_MAX_CAP {
        return Err(Error::InstanceTooLarge(format!(
            "attack oracle limited to m <= {ORACLE_MAX_REVIEWERS}, n <= {ORACLE_MAX_PAPERS}, U <= {ORACLE_MAX_CAP}"
        )));
    }
    if party_size == 0 || party_size > m {
        return Err(Error::param(format!("party of {party_size} among {m} reviewers")));
    }
    let d = x.n_cols();
    let dense =
        DMatrix::from_fn(m * n, d, |i, j| x.row(i).iter().find(|&(c, _)| c as usize == j).map_or(0.0, |(_, v)| v));
    let h = dense.transpose() * &dense + DMatrix::identity(d, d) * lambda;
    let lu = h.lu();
    let target = dense.row(r * n + p).transpose();
    let score = |labels: &[f64]| -> Result<f64> {
        let rhs = dense.transpose() * DVector::from_column_slice(labels);
        let w = lu.solve(&rhs).ok_or_else(|| Error::Numerical("singular oracle Hessian".into()))?;
        Ok(target.dot(&w))
    };
    let base = score(y)?;
    let vectors = feasible_bid_vectors(n, u_cap);
    // gain[t][v]: effect of reviewer t switching to vector v alone
    let mut gain = vec![vec![0.0; vectors.len()]; m];
    for (t, row) in gain.iter_mut().enumerate() {
        for (k, v) in vectors.iter().enumerate() {
            let mut labels = y.to_vec();
            for (q, &b) in v.iter().enumerate() {
                labels[t * n + q] = f64::from(b);
            }
            row[k] = score(&labels)? - base;
        }
    }
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << m) {
        if mask & (1 << r) == 0 || mask.count_ones() as usize != party_size {
            continue;
        }
        let members: Vec<usize> = (0..m).filter(|&t| mask & (1 << t) != 0).collect();
        // walk the joint assignment space with a mixed-radix counter
        let mut choice = vec![0usize; members.len()];
        loop {
            let total: f64 = members.iter().zip(&choice).map(|(&t, &k)| gain[t][k]).sum();
            best = best.max(total);
            let mut pos = 0;
            while pos < choice.len() {
                choice[pos] += 1;
                if choice[pos] < vectors.len() {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
            if pos == choice.len() {
                break;
            }
        }
    }
    Ok(best)
}
