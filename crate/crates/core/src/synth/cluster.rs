//! Co-citation similarity and average-linkage clustering into subject areas.

use rand::Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng;

fn overlap(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Cosine similarity of citation neighborhoods; 0 if either is empty.
pub fn cocitation_similarity(corpus: &Corpus, p: usize, q: usize) -> f64 {
    neighborhood_cosine(corpus.neighborhood(p), corpus.neighborhood(q))
}

pub fn neighborhood_cosine(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let shared = overlap(a, b);
    if shared == 0 {
        return 0.0;
    }
    // sqrt of the exact integer product keeps self-similarity exactly 1
    (shared as f64 / ((a.len() * b.len()) as f64).sqrt()).min(1.0)
}

/// Nonzero similarities of `p` to every corpus paper, found by walking
/// neighbors of neighbors. Ascending by paper index.
pub fn similarity_row(corpus: &Corpus, p: usize, scratch: &mut Vec<u32>) -> Vec<(usize, f64)> {
    scratch.clear();
    scratch.resize(corpus.len(), 0);
    let mut touched = Vec::new();
    for &a in corpus.neighborhood(p) {
        for &q in corpus.neighborhood(a) {
            if scratch[q] == 0 {
                touched.push(q);
            }
            scratch[q] += 1;
        }
    }
    touched.sort_unstable();
    let np = corpus.neighborhood(p).len();
    touched
        .into_iter()
        .map(|q| {
            let nq = corpus.neighborhood(q).len();
            (q, (f64::from(scratch[q]) / ((np * nq) as f64).sqrt()).min(1.0))
        })
        .collect()
}

/// Disjoint subject areas over corpus paper indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    clusters: Vec<Vec<usize>>,
    min_size: usize,
}

impl ClusterSet {
    pub fn new(mut clusters: Vec<Vec<usize>>, min_size: usize) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in &mut clusters {
            c.sort_unstable();
            if c.len() < min_size {
                return Err(Error::param(format!("cluster of size {} below minimum {min_size}", c.len())));
            }
            for &p in c.iter() {
                if !seen.insert(p) {
                    return Err(Error::param(format!("paper {p} appears in two clusters")));
                }
            }
        }
        Ok(ClusterSet { clusters, min_size })
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster(&self, c: usize) -> &[usize] {
        &self.clusters[c]
    }

    pub fn min_size(&self) -> usize {
        self.min_size
    }

    /// Cluster id per corpus paper (None when unclustered or dropped).
    pub fn membership(&self, n_papers: usize) -> Vec<Option<u32>> {
        let mut out = vec![None; n_papers];
        for (c, members) in self.clusters.iter().enumerate() {
            for &p in members {
                out[p] = Some(c as u32);
            }
        }
        out
    }
}

/// Agglomerative clustering of `papers` with average linkage on distance
/// `1 - sigma`, merged down to `target_clusters`; clusters smaller than
/// `min_size` are then dropped. Ties between equally similar pairs are
/// broken with the `cluster-ties` stream of `seed`.
pub fn cluster_subject_areas(
    corpus: &Corpus,
    papers: &[usize],
    target_clusters: usize,
    min_size: usize,
    seed: u64,
) -> Result<ClusterSet> {
    let n = papers.len();
    if n == 0 {
        return Err(Error::param("cannot cluster an empty paper set"));
    }
    if target_clusters == 0 || target_clusters > n {
        return Err(Error::param(format!("target of {target_clusters} clusters for {n} papers")));
    }
    let mut local = vec![usize::MAX; corpus.len()];
    for (i, &p) in papers.iter().enumerate() {
        local[p] = i;
    }
    let mut sim = vec![0.0f64; n * n];
    let mut scratch = Vec::new();
    for (i, &p) in papers.iter().enumerate() {
        for (q, s) in similarity_row(corpus, p, &mut scratch) {
            let j = local[q];
            if j != usize::MAX && j != i {
                sim[i * n + j] = s;
            }
        }
    }
    let groups = average_linkage(&mut sim, n, target_clusters, seed);
    let mut clusters: Vec<Vec<usize>> = groups
        .into_iter()
        .filter(|g| g.len() >= min_size)
        .map(|g| {
            let mut c: Vec<usize> = g.into_iter().map(|i| papers[i]).collect();
            c.sort_unstable();
            c
        })
        .collect();
    clusters.sort_by_key(|c| c[0]);
    ClusterSet::new(clusters, min_size)
}

/// Greedy average-linkage merging on a dense symmetric similarity matrix
/// (overwritten). Returns member lists of the surviving groups.
pub fn average_linkage(sim: &mut [f64], n: usize, target: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng::stream(seed, "cluster-ties", 0);
    let mut active = vec![true; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let row_best = |sim: &[f64], active: &[bool], i: usize| -> f64 {
        (0..n).filter(|&j| j != i && active[j]).map(|j| sim[i * n + j]).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut best: Vec<f64> = (0..n).map(|i| row_best(sim, &active, i)).collect();
    let mut remaining = n;
    while remaining > target {
        let top = (0..n).filter(|&i| active[i]).map(|i| best[i]).fold(f64::NEG_INFINITY, f64::max);
        let mut ties = Vec::new();
        for i in (0..n).filter(|&i| active[i] && best[i] == top) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if sim[i * n + j] == top {
                    ties.push((i, j));
                }
            }
        }
        let (a, b) = ties[if ties.len() == 1 { 0 } else { rng.random_range(0..ties.len()) }];
        let (wa, wb) = (members[a].len() as f64, members[b].len() as f64);
        let stale: Vec<usize> = (0..n)
            .filter(|&k| active[k] && k != a && k != b && (sim[k * n + a] == best[k] || sim[k * n + b] == best[k]))
            .collect();
        for k in (0..n).filter(|&k| active[k] && k != a && k != b) {
            let merged = (wa * sim[a * n + k] + wb * sim[b * n + k]) / (wa + wb);
            sim[a * n + k] = merged;
            sim[k * n + a] = merged;
        }
        active[b] = false;
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        remaining -= 1;
        best[a] = row_best(sim, &active, a);
        for k in stale {
            best[k] = row_best(sim, &active, k);
        }
    }
    (0..n)
        .filter(|&i| active[i])
        .map(|i| {
            let mut g = std::mem::take(&mut members[i]);
            g.sort_unstable();
            g
        })
        .collect()
}
