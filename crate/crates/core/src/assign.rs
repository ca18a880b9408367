//! Reviewer assignment as a min-cost flow, plus baseline scoring rules.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::conference::Conference;
use crate::defense::CandidateSet;
use crate::error::{Error, Result};
use crate::rng::kahan_sum;
use crate::scoring::ScoreMatrix;

/// Stand-in for the 2014 hand-tuned rule. Not the historical formula: it
/// only keeps the property that a positive bid multiplies the score.
pub fn neurips2014_score(conf: &Conference) -> Result<ScoreMatrix> {
    let (m, n) = (conf.n_reviewers(), conf.n_papers());
    let mut values = Vec::with_capacity(m * n);
    for r in 0..m {
        for p in 0..n {
            let bid = f64::from(conf.bids().get(r, p));
            let overlap = conf.subject_overlap(r, p) as f64 / 5.0;
            values.push((1.0 + bid) * (0.5 * conf.tpms(r, p) + 0.5 * overlap + 0.01));
        }
    }
    ScoreMatrix::new(m, n, values)
}

pub fn tpms_only_score(conf: &Conference) -> Result<ScoreMatrix> {
    ScoreMatrix::new(conf.n_reviewers(), conf.n_papers(), conf.tpms_matrix().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// (reviewer, paper), sorted by paper then reviewer.
    pub pairs: Vec<(usize, usize)>,
    pub paper_load: Vec<usize>,
    pub reviewer_load: Vec<usize>,
    /// Missing reviewers per paper.
    pub deficit: Vec<usize>,
    pub total_score: f64,
}

impl Assignment {
    fn from_pairs(mut pairs: Vec<(usize, usize)>, scores: &ScoreMatrix, per_paper: usize) -> Self {
        pairs.sort_by_key(|&(r, p)| (p, r));
        let (m, n) = (scores.n_reviewers(), scores.n_papers());
        let mut paper_load = vec![0; n];
        let mut reviewer_load = vec![0; m];
        for &(r, p) in &pairs {
            paper_load[p] += 1;
            reviewer_load[r] += 1;
        }
        let deficit = paper_load.iter().map(|&l| per_paper - l).collect();
        let total_score = kahan_sum(pairs.iter().map(|&(r, p)| scores.get(r, p)));
        Assignment { pairs, paper_load, reviewer_load, deficit, total_score }
    }

    pub fn total_deficit(&self) -> usize {
        self.deficit.iter().sum()
    }

    pub fn reviewers_of(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.pairs.partition_point(|&(_, q)| q < p);
        self.pairs[start..].iter().take_while(move |&&(_, q)| q == p).map(|&(r, _)| r)
    }

    pub fn is_assigned(&self, r: usize, p: usize) -> bool {
        self.reviewers_of(p).any(|t| t == r)
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    rev: usize,
    cap: i64,
    cost: i64,
}

struct FlowGraph {
    adj: Vec<Vec<Edge>>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        FlowGraph { adj: vec![Vec::new(); nodes] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Edge { to, rev: rev_from, cap, cost });
        self.adj[to].push(Edge { to: from, rev: rev_to, cap: 0, cost: -cost });
    }

    /// Successive shortest paths with Johnson potentials; all initial costs
    /// must be nonnegative.
    fn min_cost_max_flow(&mut self, source: usize, sink: usize) {
        let nodes = self.adj.len();
        let mut potential = vec![0i64; nodes];
        loop {
            let mut dist = vec![i64::MAX; nodes];
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
            dist[source] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0i64, source)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for (i, e) in self.adj[u].iter().enumerate() {
                    if e.cap <= 0 {
                        continue;
                    }
                    let nd = d + e.cost + potential[u] - potential[e.to];
                    if nd < dist[e.to] {
                        dist[e.to] = nd;
                        prev[e.to] = Some((u, i));
                        heap.push(Reverse((nd, e.to)));
                    }
                }
            }
            if dist[sink] == i64::MAX {
                break;
            }
            for v in 0..nodes {
                if dist[v] != i64::MAX {
                    potential[v] += dist[v];
                }
            }
            let mut push = i64::MAX;
            let mut v = sink;
            while let Some((u, i)) = prev[v] {
                push = push.min(self.adj[u][i].cap);
                v = u;
            }
            let mut v = sink;
            while let Some((u, i)) = prev[v] {
                self.adj[u][i].cap -= push;
                let rev = self.adj[u][i].rev;
                self.adj[v][rev].cap += push;
                v = u;
            }
        }
    }
}

/// Integer cost resolution for score differences.
pub const COST_SCALE: f64 = 1e9;

/// Maximizes the total score subject to `per_paper` reviewers per paper and
/// at most `per_reviewer` papers per reviewer, using only permitted pairs.
/// When demand cannot be met the number of assigned pairs is maximized first
/// and the shortfall is reported as deficit.
pub fn solve_assignment(
    scores: &ScoreMatrix,
    permitted: Option<&CandidateSet>,
    per_paper: usize,
    per_reviewer: usize,
) -> Result<Assignment> {
    if per_paper == 0 || per_reviewer == 0 {
        return Err(Error::param("reviewers per paper and papers per reviewer must be positive"));
    }
    let (m, n) = (scores.n_reviewers(), scores.n_papers());
    if let Some(c) = permitted {
        if c.n_papers() != n || c.n_reviewers() != m {
            return Err(Error::Dimension(format!(
                "candidate set {}x{} for scores {m}x{n}",
                c.n_reviewers(),
                c.n_papers()
            )));
        }
    }
    if scores.values().iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("assignment scores"));
    }
    let allowed = |p: usize| -> Vec<usize> {
        match permitted {
            Some(c) => {
                let mut rs: Vec<usize> = c.of_paper(p).iter().map(|&r| r as usize).collect();
                rs.sort_unstable();
                rs
            }
            None => (0..m).collect(),
        }
    };
    let lists: Vec<Vec<usize>> = (0..n).map(allowed).collect();
    let (lo, hi) = lists
        .iter()
        .enumerate()
        .flat_map(|(p, rs)| rs.iter().map(move |&r| scores.get(r, p)))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    // keep the largest path cost well inside i64
    let scale = if hi > lo { COST_SCALE.min(1e15 / (hi - lo)) } else { COST_SCALE };

    let source = 0;
    let paper_node = |p: usize| 1 + p;
    let reviewer_node = |r: usize| 1 + n + r;
    let sink = 1 + n + m;
    let mut g = FlowGraph::new(sink + 1);
    for p in 0..n {
        g.add_edge(source, paper_node(p), per_paper as i64, 0);
    }
    let mut pair_edges = Vec::new();
    for (p, rs) in lists.iter().enumerate() {
        for &r in rs {
            let cost = ((hi - scores.get(r, p)) * scale).round() as i64;
            pair_edges.push((r, p, g.adj[paper_node(p)].len()));
            g.add_edge(paper_node(p), reviewer_node(r), 1, cost);
        }
    }
    for r in 0..m {
        g.add_edge(reviewer_node(r), sink, per_reviewer as i64, 0);
    }
    g.min_cost_max_flow(source, sink);
    let pairs =
        pair_edges.into_iter().filter(|&(_, p, i)| g.adj[paper_node(p)][i].cap == 0).map(|(r, p, _)| (r, p)).collect();
    Ok(Assignment::from_pairs(pairs, scores, per_paper))
}

pub const ASSIGN_ORACLE_MAX_REVIEWERS: usize = 6;
pub const ASSIGN_ORACLE_MAX_PAPERS: usize = 4;
pub const ASSIGN_ORACLE_MAX_PER_PAPER: usize = 2;

/// Exhaustive search over every per-paper reviewer subset; prefers more
/// assigned pairs, then higher total, then the first found.
pub fn brute_force_assignment_oracle(
    scores: &ScoreMatrix,
    permitted: Option<&CandidateSet>,
    per_paper: usize,
    per_reviewer: usize,
) -> Result<Assignment> {
    let (m, n) = (scores.n_reviewers(), scores.n_papers());
    if m > ASSIGN_ORACLE_MAX_REVIEWERS || n > ASSIGN_ORACLE_MAX_PAPERS || per_paper > ASSIGN_ORACLE_MAX_PER_PAPER {
        return Err(Error::InstanceTooLarge(format!(
            "assignment oracle limited to m <= {ASSIGN_ORACLE_MAX_REVIEWERS}, n <= {ASSIGN_ORACLE_MAX_PAPERS}, R <= {ASSIGN_ORACLE_MAX_PER_PAPER}"
        )));
    }
    if per_paper == 0 || per_reviewer == 0 {
        return Err(Error::param("reviewers per paper and papers per reviewer must be positive"));
    }
    // candidate reviewer masks per paper
    let options: Vec<Vec<u32>> = (0..n)
        .map(|p| {
            (0u32..(1 << m))
                .filter(|mask| mask.count_ones() as usize <= per_paper)
                .filter(|mask| (0..m).all(|r| mask & (1 << r) == 0 || permitted.is_none_or(|c| c.contains(r, p))))
                .collect()
        })
        .collect();
    let mut best: Option<(usize, f64, Vec<u32>)> = None;
    let mut choice = vec![0usize; n];
    loop {
        let masks: Vec<u32> = (0..n).map(|p| options[p][choice[p]]).collect();
        let feasible = (0..m).all(|r| masks.iter().filter(|&&mk| mk & (1 << r) != 0).count() <= per_reviewer);
        if feasible {
            let count: usize = masks.iter().map(|mk| mk.count_ones() as usize).sum();
            let mut total = 0.0;
            for (p, &mk) in masks.iter().enumerate() {
                for r in (0..m).filter(|&r| mk & (1 << r) != 0) {
                    total += scores.get(r, p);
                }
            }
            let better = match &best {
                None => true,
                Some((c, t, _)) => count > *c || (count == *c && total > *t),
            };
            if better {
                best = Some((count, total, masks));
            }
        }
        let mut pos = 0;
        while pos < n {
            choice[pos] += 1;
            if choice[pos] < options[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    let masks = best.map(|b| b.2).unwrap_or_else(|| vec![0; n]);
    let pairs = (0..n)
        .flat_map(|p| {
            let mk = masks[p];
            (0..m).filter(move |&r| mk & (1 << r) != 0).map(move |r| (r, p))
        })
        .collect();
    Ok(Assignment::from_pairs(pairs, scores, per_paper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ScoreMatrix {
        // rows are reviewers
        ScoreMatrix::new(3, 2, vec![5.0, 1.0, 4.0, 4.0, 0.0, 3.0]).unwrap()
    }

    #[test]
    fn small_optimum() {
        let a = solve_assignment(&toy(), None, 1, 1).unwrap();
        assert_eq!(a.total_score, 9.0);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        let oracle = brute_force_assignment_oracle(&toy(), None, 1, 1).unwrap();
        assert_eq!(oracle.total_score, a.total_score);
    }

    #[test]
    fn deficit_counts() {
        // 2 papers x R=2 against 3 reviewers x P=1
        let a = solve_assignment(&toy(), None, 2, 1).unwrap();
        assert_eq!(a.total_deficit(), 1);
        let none = CandidateSet::from_members(3, 3, vec![vec![], vec![0, 1, 2]]);
        let b = solve_assignment(&toy(), Some(&none), 2, 2).unwrap();
        assert_eq!(b.deficit, vec![2, 0]);
    }

    #[test]
    fn reviewer_lookup() {
        let a = solve_assignment(&toy(), None, 2, 2).unwrap();
        assert_eq!(a.reviewers_of(0).collect::<Vec<_>>(), vec![0, 1]);
        assert!(a.is_assigned(2, 1));
        assert!(!a.is_assigned(2, 0));
    }
}
