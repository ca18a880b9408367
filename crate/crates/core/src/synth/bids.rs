//! Subject scores, ranking, sigmoid retention and bid quantization.

use rand::Rng;

use crate::conference::BidMatrix;
use crate::corpus::Corpus;
use crate::error::Result;
use crate::rng::{self, StreamRng};
use crate::synth::cluster::ClusterSet;
use crate::synth::BidSimParams;

/// Inverse citation frequency over the target papers: `ln(total / own)`,
/// `None` for papers nobody cites.
pub fn icf_weights(corpus: &Corpus, is_target: &[bool]) -> Vec<Option<f64>> {
    let total: usize = (0..corpus.len()).filter(|&q| is_target[q]).map(|q| corpus.in_citations(q).len()).sum();
    (0..corpus.len())
        .map(|q| {
            let own = corpus.in_citations(q).len();
            (is_target[q] && own > 0).then(|| (total as f64 / own as f64).ln())
        })
        .collect()
}

/// Per-cluster weight accumulated from a reviewer's citations: every cited
/// paper adds `icf(q) / |C*(q)|` to its top cluster `C*(q)`.
pub fn cluster_weights(
    cited: &[usize],
    icf: &[Option<f64>],
    top_cluster: impl Fn(usize) -> Option<u32>,
    clusters: &ClusterSet,
) -> Vec<f64> {
    let mut w = vec![0.0; clusters.len()];
    for &q in cited {
        let (Some(weight), Some(c)) = (icf[q], top_cluster(q)) else {
            continue;
        };
        w[c as usize] += weight / clusters.cluster(c as usize).len() as f64;
    }
    w
}

/// Subject score of paper `p` given the reviewer's cluster weights.
pub fn subject_score(
    weights: &[f64],
    membership: &[Option<u32>],
    p: usize,
    in_citations: usize,
    citation_cap: usize,
) -> f64 {
    if in_citations > citation_cap {
        return 0.0;
    }
    membership[p].map_or(0.0, |c| weights[c as usize])
}

pub fn total_score(title: f64, abstract_score: f64, subject: f64) -> f64 {
    (title + abstract_score) * subject
}

pub fn retention_probability(rank: usize, alpha: f64, mu: f64) -> f64 {
    1.0 / (1.0 + (alpha * (rank as f64 - mu)).exp())
}

/// Papers with a positive score, best first, ties by index.
pub fn rank_positive(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&p| scores[p] > 0.0).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// One Bernoulli draw per rank 1..=n_ranked; returns retained ranks.
pub fn sample_retained_ranks(n_ranked: usize, alpha: f64, mu: f64, rng: &mut StreamRng) -> Vec<usize> {
    (1..=n_ranked).filter(|&rank| rng.random::<f64>() < retention_probability(rank, alpha, mu)).collect()
}

/// Global quantile thresholds splitting `values` in the given ratio.
pub fn quantize_thresholds(values: &[f64], ratio: [u32; 3]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::INFINITY, f64::INFINITY);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let sum = u64::from(ratio[0] + ratio[1] + ratio[2]);
    let i1 = (n as u64 * u64::from(ratio[0]) / sum) as usize;
    let i2 = (n as u64 * u64::from(ratio[0] + ratio[1]) / sum) as usize;
    (sorted[i1.min(n - 1)], sorted[i2.min(n - 1)])
}

pub fn quantize(value: f64, thresholds: (f64, f64)) -> u8 {
    if value < thresholds.0 {
        1
    } else if value < thresholds.1 {
        2
    } else {
        3
    }
}

/// Samples positive bids for every reviewer row of `totals` (reviewer-major,
/// m x n) and quantizes them into {1,2,3}.
pub fn sample_bids(totals: &[f64], m: usize, n: usize, params: &BidSimParams, seed: u64) -> Result<BidMatrix> {
    params.validate()?;
    let mut retained = Vec::new();
    for r in 0..m {
        let row = &totals[r * n..(r + 1) * n];
        let order = rank_positive(row);
        let mut rng = rng::stream(seed, "bid-sampling", r as u64);
        for rank in sample_retained_ranks(order.len(), params.alpha, params.mu, &mut rng) {
            let p = order[rank - 1];
            retained.push((r, p, row[p]));
        }
    }
    let values: Vec<f64> = retained.iter().map(|e| e.2).collect();
    let th = quantize_thresholds(&values, params.quantize_ratio);
    BidMatrix::from_entries(m, n, retained.into_iter().map(|(r, p, v)| (r, p, quantize(v, th))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_values() {
        assert_eq!(retention_probability(80, 0.2, 80.0), 0.5);
        let p1 = retention_probability(1, 0.2, 80.0);
        assert!((p1 - 1.0 / (1.0 + (-15.8f64).exp())).abs() < 1e-15);
        assert!(p1 > 0.9999998);
        assert_eq!(retention_probability(90, 1e6, 80.0), 0.0);
        assert_eq!(retention_probability(70, 1e6, 80.0), 1.0);
    }

    #[test]
    fn quantization_ratio_and_order() {
        let vals: Vec<f64> = (0..100).map(f64::from).collect();
        let th = quantize_thresholds(&vals, [8, 53, 39]);
        assert_eq!(th, (8.0, 61.0));
        let bids: Vec<u8> = vals.iter().map(|&v| quantize(v, th)).collect();
        assert_eq!(bids.iter().filter(|&&b| b == 1).count(), 8);
        assert_eq!(bids.iter().filter(|&&b| b == 2).count(), 53);
        assert_eq!(bids.iter().filter(|&&b| b == 3).count(), 39);
        assert!(bids.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ranking_skips_nonpositive() {
        assert_eq!(rank_positive(&[0.0, 2.0, 1.0, 2.0, -1.0]), vec![1, 3, 2]);
    }
}
