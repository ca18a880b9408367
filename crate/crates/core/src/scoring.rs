//! Ridge bid model, relevance scores and ranking metrics.

use std::fs;
use std::io::Read;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::index::sample;

use crate::conference::BidMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::sparse::{CsrMatrix, SparseRow};

/// Keeps at most `u_cap` positive bids per reviewer, subsampling the excess
/// uniformly without replacement.
pub fn cap_positive_bids(bids: &BidMatrix, u_cap: usize, seed: u64) -> Result<BidMatrix> {
    if u_cap == 0 {
        return Err(Error::param("positive bid cap must be at least 1"));
    }
    let mut entries = Vec::with_capacity(bids.nnz());
    for r in 0..bids.n_reviewers() {
        let row = bids.row(r);
        if row.len() <= u_cap {
            entries.extend(row.iter().map(|&(p, b)| (r, p as usize, b)));
        } else {
            let mut rng = rng::stream(seed, "u-cap", r as u64);
            let mut keep = sample(&mut rng, row.len(), u_cap).into_vec();
            keep.sort_unstable();
            entries.extend(keep.into_iter().map(|k| (r, row[k].0 as usize, row[k].1)));
        }
    }
    BidMatrix::from_entries(bids.n_reviewers(), bids.n_papers(), entries)
}

/// Per-reviewer split of positive bids into train and held-out parts.
pub fn holdout_split(bids: &BidMatrix, test_fraction: f64, seed: u64) -> Result<(BidMatrix, BidMatrix)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::param("test fraction must lie in [0, 1)"));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for r in 0..bids.n_reviewers() {
        let row = bids.row(r);
        let n_test = (row.len() as f64 * test_fraction).round() as usize;
        let mut rng = rng::stream(seed, "holdout", r as u64);
        let held: std::collections::HashSet<usize> = sample(&mut rng, row.len(), n_test).into_iter().collect();
        for (k, &(p, b)) in row.iter().enumerate() {
            let e = (r, p as usize, b);
            if held.contains(&k) {
                test.push(e);
            } else {
                train.push(e);
            }
        }
    }
    let (m, n) = (bids.n_reviewers(), bids.n_papers());
    Ok((BidMatrix::from_entries(m, n, train)?, BidMatrix::from_entries(m, n, test)?))
}

/// `XᵀX + λI` as a dense symmetric matrix; rows with `keep[i] == false` are skipped.
pub fn regularized_gram(x: &CsrMatrix, lambda: f64, keep: Option<&[bool]>) -> DMatrix<f64> {
    let d = x.n_cols();
    let mut h = DMatrix::<f64>::zeros(d, d);
    let data = h.as_mut_slice();
    for i in 0..x.n_rows() {
        if keep.is_some_and(|k| !k[i]) {
            continue;
        }
        let row = x.row(i);
        for (a, (ja, va)) in row.iter().enumerate() {
            let col = ja as usize * d;
            for (jb, vb) in row.iter().take(a + 1) {
                // row index jb <= column index ja: upper triangle
                data[col + jb as usize] += va * vb;
            }
        }
    }
    for j in 0..d {
        data[j * d + j] += lambda;
        for i in 0..j {
            data[i * d + j] = data[j * d + i];
        }
    }
    h
}

/// `Xᵀy` restricted to kept rows.
pub fn masked_xty(x: &CsrMatrix, y: &[f64], keep: Option<&[bool]>) -> Vec<f64> {
    match keep {
        None => x.transpose_mul(y),
        Some(k) => {
            let masked: Vec<f64> = y.iter().zip(k).map(|(&v, &kk)| if kk { v } else { 0.0 }).collect();
            x.transpose_mul(&masked)
        }
    }
}

fn check_inputs(x: &CsrMatrix, y: &[f64], lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("ridge strength must be positive, got {lambda}")));
    }
    if y.len() != x.n_rows() {
        return Err(Error::Dimension(format!("{} labels for {} feature rows", y.len(), x.n_rows())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("labels"));
    }
    if x.triplets().any(|(_, _, v)| !v.is_finite()) {
        return Err(Error::NonFinite("features"));
    }
    Ok(())
}

/// Trained ridge model with its Hessian factorization.
#[derive(Debug, Clone)]
pub struct ScoreModel {
    lambda: f64,
    w: Vec<f64>,
    factor: Cholesky<f64, Dyn>,
    inverse: OnceLock<DMatrix<f64>>,
}

pub const RESIDUAL_TOL: f64 = 1e-8;

/// Minimizes `‖Xw − y‖² + λ‖w‖²` through a Cholesky solve of the normal
/// equations, with one refinement step if the residual check fails.
pub fn train_ridge(x: &CsrMatrix, y: &[f64], lambda: f64) -> Result<ScoreModel> {
    train_ridge_masked(x, y, lambda, None)
}

pub fn train_ridge_masked(x: &CsrMatrix, y: &[f64], lambda: f64, keep: Option<&[bool]>) -> Result<ScoreModel> {
    check_inputs(x, y, lambda)?;
    fit_with_gram(regularized_gram(x, lambda, keep), x, y, lambda, keep)
}

/// Fit from a precomputed `X_keepᵀ X_keep + λI`.
pub fn fit_with_gram(
    h: DMatrix<f64>,
    x: &CsrMatrix,
    y: &[f64],
    lambda: f64,
    keep: Option<&[bool]>,
) -> Result<ScoreModel> {
    if h.nrows() != x.n_cols() || h.ncols() != x.n_cols() {
        return Err(Error::Dimension(format!("Hessian {}x{} for d = {}", h.nrows(), h.ncols(), x.n_cols())));
    }
    let factor = Cholesky::new(h).ok_or_else(|| Error::Numerical("Hessian is not positive definite".into()))?;
    let b = masked_xty(x, y, keep);
    let mut model = ScoreModel { lambda, w: vec![0.0; x.n_cols()], factor, inverse: OnceLock::new() };
    model.w = model.solve(&b);
    let bound = RESIDUAL_TOL * norm(&b).max(1.0);
    let mut res = model.residual(x, &b, keep);
    if norm(&res) > bound {
        let dw = model.solve(&res);
        for (w, d) in model.w.iter_mut().zip(dw) {
            *w -= d;
        }
        res = model.residual(x, &b, keep);
        if norm(&res) > bound {
            return Err(Error::Numerical(format!("normal-equation residual {} exceeds {bound}", norm(&res))));
        }
    }
    Ok(model)
}

/// Subtracts `x_i x_iᵀ` from a full Gram matrix for each listed row.
pub fn remove_rows_from_gram(h: &mut DMatrix<f64>, x: &CsrMatrix, rows: impl IntoIterator<Item = usize>) {
    let d = h.nrows();
    let data = h.as_mut_slice();
    for i in rows {
        let row = x.row(i);
        for (ja, va) in row.iter() {
            let col = ja as usize * d;
            for (jb, vb) in row.iter() {
                data[col + jb as usize] -= va * vb;
            }
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl ScoreModel {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Lower-triangular Cholesky factor of H.
    pub fn factor(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let sol = self.factor.solve(&DVector::from_column_slice(b));
        sol.as_slice().to_vec()
    }

    /// Dense H⁻¹, computed on first use.
    pub fn inverse(&self) -> &DMatrix<f64> {
        self.inverse.get_or_init(|| self.factor.inverse())
    }

    /// `H⁻¹ v` for a sparse `v`, as a combination of columns of H⁻¹.
    pub fn inverse_times_sparse(&self, v: SparseRow<'_>) -> Vec<f64> {
        let inv = self.inverse();
        let d = self.dim();
        let data = inv.as_slice();
        let mut out = vec![0.0; d];
        for (j, x) in v.iter() {
            let col = &data[j as usize * d..(j as usize + 1) * d];
            for (o, c) in out.iter_mut().zip(col) {
                *o += x * c;
            }
        }
        out
    }

    /// `Hw − Xᵀy` with H rebuilt from X (kept rows only).
    pub fn residual(&self, x: &CsrMatrix, xty: &[f64], keep: Option<&[bool]>) -> Vec<f64> {
        let mut xw = x.mul_dense(&self.w);
        if let Some(k) = keep {
            for (v, &kk) in xw.iter_mut().zip(k) {
                if !kk {
                    *v = 0.0;
                }
            }
        }
        let xtxw = x.transpose_mul(&xw);
        xtxw.iter().zip(&self.w).zip(xty).map(|((a, w), b)| a + self.lambda * w - b).collect()
    }

    pub fn predict(&self, x: &CsrMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "model has {} weights, features have {} columns",
                self.dim(),
                x.n_cols()
            )));
        }
        Ok(x.mul_dense(&self.w))
    }

    const MAGIC: &'static [u8; 8] = b"BGRIDGE\0";
    const VERSION: u32 = 1;

    /// Binary layout: magic, version, λ, d, w, then the packed lower factor
    /// row by row. All little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dim();
        let mut out = Vec::with_capacity(24 + 8 * (d + d * (d + 1) / 2));
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&(d as u64).to_le_bytes());
        for w in &self.w {
            out.extend_from_slice(&w.to_le_bytes());
        }
        let l = self.factor.l();
        for i in 0..d {
            for j in 0..=i {
                out.extend_from_slice(&l[(i, j)].to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Parse { line: 0, message: format!("model file: {msg}") };
        let mut cur = bytes;
        let mut take = |k: usize| -> Result<&[u8]> {
            if cur.len() < k {
                return Err(bad("truncated"));
            }
            let (head, tail) = cur.split_at(k);
            cur = tail;
            Ok(head)
        };
        if take(8)? != Self::MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != Self::VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let lambda = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let d = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let mut read_f64 = || -> Result<f64> { Ok(f64::from_le_bytes(take(8)?.try_into().unwrap())) };
        let w = (0..d).map(|_| read_f64()).collect::<Result<Vec<_>>>()?;
        let mut l = DMatrix::<f64>::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                l[(i, j)] = read_f64()?;
            }
        }
        Ok(ScoreModel { lambda, w, factor: Cholesky::pack_dirty(l), inverse: OnceLock::new() })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.display().to_string()));
        }
        let mut bytes = Vec::new();
        fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Dense m x n relevance scores with per-paper rank tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    m: usize,
    n: usize,
    values: Vec<f64>,
    /// Paper-major: reviewers of paper p, best first.
    order: Vec<u32>,
    /// Reviewer-major 1-based ranks.
    rank: Vec<u32>,
}

impl ScoreMatrix {
    /// `values` is reviewer-major (`values[r * n + p]`).
    pub fn new(m: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * n {
            return Err(Error::Dimension(format!("{} scores for {m}x{n}", values.len())));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("scores"));
        }
        let mut order = Vec::with_capacity(m * n);
        let mut rank = vec![0u32; m * n];
        let mut col: Vec<u32> = Vec::with_capacity(m);
        for p in 0..n {
            col.clear();
            col.extend(0..m as u32);
            col.sort_by(|&a, &b| values[b as usize * n + p].total_cmp(&values[a as usize * n + p]).then(a.cmp(&b)));
            for (k, &r) in col.iter().enumerate() {
                rank[r as usize * n + p] = k as u32 + 1;
            }
            order.extend_from_slice(&col);
        }
        Ok(ScoreMatrix { m, n, values, order, rank })
    }

    pub fn n_reviewers(&self) -> usize {
        self.m
    }

    pub fn n_papers(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, p: usize) -> f64 {
        self.values[r * self.n + p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// 1 = highest score; ties go to the lower reviewer index.
    pub fn rank(&self, r: usize, p: usize) -> usize {
        self.rank[r * self.n + p] as usize
    }

    /// Reviewers of paper `p` from best to worst.
    pub fn ranking(&self, p: usize) -> &[u32] {
        &self.order[p * self.m..(p + 1) * self.m]
    }
}

/// `s = Xw`, ranked per paper.
pub fn predict_scores(model: &ScoreModel, x: &CsrMatrix, m: usize, n: usize) -> Result<ScoreMatrix> {
    if x.n_rows() != m * n {
        return Err(Error::Dimension(format!("{} feature rows for {m}x{n}", x.n_rows())));
    }
    ScoreMatrix::new(m, n, model.predict(x)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApAxis {
    PerReviewer,
    PerPaper,
}

/// Mean over entities of (positives among the top `k`) / k. Pairs listed in
/// `exclude` are removed from the ranked lists first; entities without any
/// positive are left out of the mean.
pub fn average_precision_at_k(
    scores: &ScoreMatrix,
    positives: &BidMatrix,
    k: usize,
    axis: ApAxis,
    exclude: Option<&BidMatrix>,
) -> Result<f64> {
    let (m, n) = (scores.n_reviewers(), scores.n_papers());
    let list_len = match axis {
        ApAxis::PerReviewer => n,
        ApAxis::PerPaper => m,
    };
    if k == 0 || k > list_len {
        return Err(Error::param(format!("k = {k} outside 1..={list_len}")));
    }
    let excluded = |r: usize, p: usize| exclude.is_some_and(|e| e.get(r, p) > 0);
    let mut total = 0.0;
    let mut counted = 0usize;
    for e in 0..(if axis == ApAxis::PerReviewer { m } else { n }) {
        let pair = |i: usize| if axis == ApAxis::PerReviewer { (e, i) } else { (i, e) };
        let mut items: Vec<usize> = (0..list_len)
            .filter(|&i| {
                let (r, p) = pair(i);
                !excluded(r, p)
            })
            .collect();
        if !items.iter().any(|&i| {
            let (r, p) = pair(i);
            positives.get(r, p) > 0
        }) {
            continue;
        }
        items.sort_by(|&a, &b| {
            let (ra, pa) = pair(a);
            let (rb, pb) = pair(b);
            scores.get(rb, pb).total_cmp(&scores.get(ra, pa)).then(a.cmp(&b))
        });
        let hits = items
            .iter()
            .take(k)
            .filter(|&&i| {
                let (r, p) = pair(i);
                positives.get(r, p) > 0
            })
            .count();
        total += hits as f64 / k as f64;
        counted += 1;
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_closed_form() {
        let x = CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let model = train_ridge(&x, &[1.0, 3.0], 1.0).unwrap();
        approx::assert_abs_diff_eq!(model.weights(), &[0.5, 1.5][..], epsilon = 1e-12);
        let s = predict_scores(&model, &x, 1, 2).unwrap();
        approx::assert_abs_diff_eq!(s.values(), &[0.5, 1.5][..], epsilon = 1e-12);
        assert_eq!(s.rank(0, 1), 1);
        let zero = train_ridge(&x, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(zero.weights(), &[0.0, 0.0]);
    }

    #[test]
    fn model_bytes_round_trip() {
        let x = CsrMatrix::from_triplets(3, 2, [(0, 0, 1.0), (1, 1, 2.0), (2, 0, 1.0), (2, 1, 1.0)]).unwrap();
        let model = train_ridge(&x, &[1.0, 2.0, 3.0], 0.5).unwrap();
        let back = ScoreModel::from_bytes(&model.to_bytes()).unwrap();
        assert_eq!(back.weights(), model.weights());
        assert_eq!(back.lambda(), 0.5);
        assert_eq!(back.solve(&[1.0, 1.0]), model.solve(&[1.0, 1.0]));
        assert!(ScoreModel::from_bytes(b"garbage").is_err());
    }

    #[test]
    fn rank_ties_by_reviewer() {
        let s = ScoreMatrix::new(3, 1, vec![1.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.ranking(0), &[1, 2, 0]);
        assert_eq!(s.rank(0, 0), 3);
        let zero = ScoreMatrix::new(3, 1, vec![0.0; 3]).unwrap();
        assert_eq!(zero.ranking(0), &[0, 1, 2]);
    }

    #[test]
    fn ap_hand_count() {
        // one reviewer, ranking (pos, neg, pos)
        let s = ScoreMatrix::new(1, 3, vec![3.0, 2.0, 1.0]).unwrap();
        let pos = BidMatrix::from_entries(1, 3, [(0, 0, 3), (0, 2, 1)]).unwrap();
        assert_eq!(average_precision_at_k(&s, &pos, 2, ApAxis::PerReviewer, None).unwrap(), 0.5);
        assert_eq!(average_precision_at_k(&s, &pos, 1, ApAxis::PerReviewer, None).unwrap(), 1.0);
        let none = BidMatrix::new(1, 3);
        assert_eq!(average_precision_at_k(&s, &none, 2, ApAxis::PerReviewer, None).unwrap(), 0.0);
        assert!(average_precision_at_k(&s, &pos, 4, ApAxis::PerReviewer, None).is_err());
        assert!(average_precision_at_k(&s, &pos, 0, ApAxis::PerReviewer, None).is_err());
        // excluding the first positive leaves (neg, pos)
        let ex = BidMatrix::from_entries(1, 3, [(0, 0, 3)]).unwrap();
        assert_eq!(average_precision_at_k(&s, &pos, 1, ApAxis::PerReviewer, Some(&ex)).unwrap(), 0.0);
    }

    #[test]
    fn cap_examples() {
        let full = BidMatrix::from_entries(1, 100, (0..100).map(|p| (0, p, 2))).unwrap();
        let capped = cap_positive_bids(&full, 60, 4).unwrap();
        assert_eq!(capped.positive_count(0), 60);
        assert_eq!(capped, cap_positive_bids(&full, 60, 4).unwrap());
        assert_ne!(capped, cap_positive_bids(&full, 60, 5).unwrap());
        let sixty = BidMatrix::from_entries(1, 100, (0..60).map(|p| (0, p, 1))).unwrap();
        assert_eq!(cap_positive_bids(&sixty, 60, 1).unwrap(), sixty);
    }
}
