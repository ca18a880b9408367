//! Subsampling toward papers and reviewers with more bids.

use rand::seq::SliceRandom;

use crate::conference::Conference;
use crate::error::{Error, Result};
use crate::rng;

/// Indices of the `keep` entities with the most bids; equal counts are
/// ordered by a seeded shuffle.
fn top_by_count(counts: &[usize], keep: usize, seed: u64, label: &str) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.shuffle(&mut rng::stream(seed, label, 0));
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    order.truncate(keep);
    order.sort_unstable();
    order
}

/// Keeps the `n_papers` papers with the most positive bids, then the
/// `n_reviewers` reviewers with the most positive bids on those papers.
/// Each step keeps a top slice by count, so the kept histogram
/// stochastically dominates the one it was drawn from.
pub fn rebalance_subsample(conf: &Conference, n_papers: usize, n_reviewers: usize, seed: u64) -> Result<Conference> {
    if n_papers > conf.n_papers() || n_reviewers > conf.n_reviewers() {
        return Err(Error::param(format!(
            "subsample target {n_reviewers}x{n_papers} exceeds available {}x{}",
            conf.n_reviewers(),
            conf.n_papers()
        )));
    }
    if n_papers == conf.n_papers() && n_reviewers == conf.n_reviewers() {
        return Ok(conf.clone());
    }
    let bids = conf.bids();
    let papers = top_by_count(&bids.paper_positive_counts(), n_papers, seed, "subsample-papers");
    let mut kept = vec![false; conf.n_papers()];
    for &p in &papers {
        kept[p] = true;
    }
    let reviewer_counts: Vec<usize> =
        (0..conf.n_reviewers()).map(|r| bids.row(r).iter().filter(|e| kept[e.0 as usize]).count()).collect();
    let reviewers = top_by_count(&reviewer_counts, n_reviewers, seed, "subsample-reviewers");
    conf.subset(&reviewers, &papers)
}
