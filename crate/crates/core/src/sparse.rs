//! Sparse vectors and compressed-sparse-row matrices.
//!
//! Indices are kept strictly increasing and explicit zeros are never stored;
//! constructors that take caller-provided structure validate both.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn empty(dim: usize) -> Self {
        SparseVector { dim, indices: Vec::new(), values: Vec::new() }
    }

    /// Validating constructor: strictly increasing in-bounds indices, no zeros.
    pub fn try_new(dim: usize, indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::Sparse(format!("{} indices but {} values", indices.len(), values.len())));
        }
        for (k, (&i, &v)) in indices.iter().zip(&values).enumerate() {
            if i as usize >= dim {
                return Err(Error::Sparse(format!("index {i} out of bounds for dimension {dim}")));
            }
            if k > 0 && indices[k - 1] >= i {
                return Err(Error::Sparse(format!(
                    "indices not strictly increasing at position {k} ({} then {i})",
                    indices[k - 1]
                )));
            }
            if v == 0.0 {
                return Err(Error::Sparse(format!("explicit zero at index {i}")));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse vector"));
            }
        }
        Ok(SparseVector { dim, indices, values })
    }

    /// Builds from unordered (index, value) pairs, summing duplicates and
    /// dropping entries that cancel to zero.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            if i as usize >= dim {
                return Err(Error::Sparse(format!("index {i} out of bounds for dimension {dim}")));
            }
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values): (Vec<u32>, Vec<f64>) = acc.into_iter().filter(|&(_, v)| v != 0.0).unzip();
        Ok(SparseVector { dim, indices, values })
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) =
            dense.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i as u32, v)).unzip();
        SparseVector { dim: dense.len(), indices, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.as_view().dot_dense(dense)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        self.as_view().dot(other.as_view())
    }

    pub fn as_view(&self) -> SparseRow<'_> {
        SparseRow { indices: &self.indices, values: &self.values }
    }

    /// Places this vector at `offset` inside a larger space.
    pub fn shifted(&self, offset: u32, new_dim: usize) -> Result<Self> {
        let indices: Vec<u32> = self.indices.iter().map(|&i| i + offset).collect();
        SparseVector::try_new(new_dim, indices, self.values.clone())
    }
}

/// Borrowed view of one sparse row.
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i as usize]).sum()
    }

    pub fn dot(&self, other: SparseRow<'_>) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }
}

/// Row-major compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn try_new(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != n_rows + 1 || indptr[0] != 0 {
            return Err(Error::Sparse("row pointer has wrong shape".into()));
        }
        if *indptr.last().unwrap() != indices.len() || indices.len() != values.len() {
            return Err(Error::Sparse("row pointer does not cover entries".into()));
        }
        for r in 0..n_rows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(Error::Sparse(format!("row {r} has negative length")));
            }
            // Reuse the vector validator on each row slice.
            SparseVector::try_new(n_cols, indices[lo..hi].to_vec(), values[lo..hi].to_vec())
                .map_err(|e| Error::Sparse(format!("row {r}: {e}")))?;
        }
        Ok(CsrMatrix { n_rows, n_cols, indptr, indices, values })
    }

    pub fn from_rows(n_cols: usize, rows: Vec<SparseVector>) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let total: usize = rows.iter().map(SparseVector::nnz).sum();
        let mut indices = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        indptr.push(0);
        for (r, row) in rows.iter().enumerate() {
            if row.dim() != n_cols {
                return Err(Error::Dimension(format!(
                    "row {r} has dimension {} but matrix has {n_cols} columns",
                    row.dim()
                )));
            }
            indices.extend_from_slice(row.indices());
            values.extend_from_slice(row.values());
            indptr.push(indices.len());
        }
        Ok(CsrMatrix { n_rows: rows.len(), n_cols, indptr, indices, values })
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, u32, f64)>,
    ) -> Result<Self> {
        let mut per_row: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_rows];
        for (r, c, v) in triplets {
            if r >= n_rows {
                return Err(Error::Sparse(format!("row {r} out of bounds for {n_rows} rows")));
            }
            per_row[r].push((c, v));
        }
        let rows =
            per_row.into_iter().map(|pairs| SparseVector::from_pairs(n_cols, pairs)).collect::<Result<Vec<_>>>()?;
        Self::from_rows(n_cols, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> SparseRow<'_> {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        SparseRow { indices: &self.indices[lo..hi], values: &self.values[lo..hi] }
    }

    pub fn row_vector(&self, r: usize) -> SparseVector {
        let row = self.row(r);
        SparseVector { dim: self.n_cols, indices: row.indices.to_vec(), values: row.values.to_vec() }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, u32, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).iter().map(move |(c, v)| (r, c, v)))
    }

    /// `X v` for dense `v`.
    pub fn mul_dense(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).dot_dense(v)).collect()
    }

    /// `Xᵀ y` for dense `y`.
    pub fn transpose_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (r, &yr) in y.iter().enumerate().take(self.n_rows) {
            if yr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r).iter() {
                out[c as usize] += yr * v;
            }
        }
        out
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows).map(|r| self.row_vector(r).to_dense()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_structure() {
        assert!(SparseVector::try_new(4, vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseVector::try_new(4, vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseVector::try_new(4, vec![4], vec![1.0]).is_err());
        assert!(SparseVector::try_new(4, vec![0], vec![0.0]).is_err());
        assert!(SparseVector::try_new(4, vec![0, 3], vec![1.0, -2.0]).is_ok());
        assert!(CsrMatrix::try_new(1, 3, vec![0, 2], vec![2, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
    }

    #[test]
    fn from_pairs_accumulates_and_drops_cancellations() {
        let v = SparseVector::from_pairs(5, [(3, 1.0), (1, 2.0), (3, -1.0), (1, 0.5)]).unwrap();
        assert_eq!(v.indices(), &[1]);
        assert_eq!(v.values(), &[2.5]);
    }

    #[test]
    fn products_match_dense() {
        let x = CsrMatrix::from_triplets(3, 4, [(0, 0, 1.0), (0, 3, 2.0), (2, 1, -1.0), (1, 2, 4.0)]).unwrap();
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(x.mul_dense(&v), vec![9.0, 12.0, -2.0]);
        assert_eq!(x.transpose_mul(&[1.0, 1.0, 1.0]), vec![1.0, -1.0, 4.0, 2.0]);
        let a = x.row_vector(0);
        let b = SparseVector::from_dense(&[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(a.dot(&b), 4.0);
    }
}
