//! Simulated TPMS: a Dirichlet-smoothed unigram model of each reviewer's
//! authored abstracts, scored on a paper's abstract.

use std::collections::HashMap;

use crate::text::term_counts;

/// Word counts of the whole abstract collection.
#[derive(Debug, Clone, Default)]
pub struct BackgroundModel {
    counts: HashMap<String, usize>,
    total: usize,
}

impl BackgroundModel {
    pub fn fit<'a>(documents: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut counts = HashMap::new();
        let mut total = 0;
        for doc in documents {
            for t in doc {
                *counts.entry(t.clone()).or_insert(0) += 1;
                total += 1;
            }
        }
        BackgroundModel { counts, total }
    }

    pub fn probability(&self, w: &str) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(w).copied().unwrap_or(0) as f64 / self.total as f64
    }
}

/// A reviewer's pooled abstract tokens.
#[derive(Debug, Clone, Default)]
pub struct Profile {
    counts: HashMap<String, usize>,
    len: usize,
}

impl Profile {
    pub fn from_tokens<'a>(docs: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut counts = HashMap::new();
        let mut len = 0;
        for doc in docs {
            for t in doc {
                *counts.entry(t.clone()).or_insert(0) += 1;
                len += 1;
            }
        }
        Profile { counts, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Smoothed frequency of `w`. With an empty profile the first mixture
    /// weight is zero and only the background term remains.
    pub fn smoothed(&self, w: &str, background: &BackgroundModel, beta: f64) -> f64 {
        let a = self.len as f64;
        let own = self.counts.get(w).copied().unwrap_or(0) as f64;
        (own + beta * background.probability(w)) / (a + beta)
    }
}

/// Sum of log smoothed frequencies over the paper's abstract tokens.
/// Words unseen by both the profile and the background are skipped.
pub fn tpms_raw(profile: &Profile, paper_tokens: &[String], background: &BackgroundModel, beta: f64) -> f64 {
    term_counts(paper_tokens)
        .iter()
        .filter_map(|(w, &c)| {
            let f = profile.smoothed(w, background, beta);
            (f > 0.0).then(|| c as f64 * f.ln())
        })
        .sum()
}

/// Min-max rescales each paper column of a reviewer-major m x n matrix into
/// [0, 1]. A constant column becomes all ones.
pub fn normalize_columns(values: &mut [f64], m: usize, n: usize) {
    for p in 0..n {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in 0..m {
            let v = values[r * n + p];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for r in 0..m {
            let v = &mut values[r * n + p];
            *v = if hi > lo { ((*v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 };
        }
    }
}
