//! Subject areas for papers and reviewers, and reviewer selection.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;

use crate::corpus::Corpus;
use crate::rng::StreamRng;
use crate::synth::cluster::{cocitation_similarity, similarity_row, ClusterSet};

pub const SUBJECTS_PER_ENTITY: usize = 5;

/// Mean co-citation similarity between `p` and the members of `cluster`.
pub fn subject_relatedness(corpus: &Corpus, p: usize, cluster: &[usize]) -> f64 {
    if cluster.is_empty() {
        return 0.0;
    }
    cluster.iter().map(|&q| cocitation_similarity(corpus, p, q)).sum::<f64>() / cluster.len() as f64
}

/// Relatedness of `p` to every cluster, computed from its sparse similarity row.
pub fn relatedness_profile(corpus: &Corpus, clusters: &ClusterSet, membership: &[Option<u32>], p: usize) -> Vec<f64> {
    let mut scratch = Vec::new();
    let mut sums = vec![0.0; clusters.len()];
    for (q, s) in similarity_row(corpus, p, &mut scratch) {
        if let Some(c) = membership[q] {
            sums[c as usize] += s;
        }
    }
    sums.iter().enumerate().map(|(c, s)| s / clusters.cluster(c).len() as f64).collect()
}

/// Indices of the `k` largest values; ties go to the lower index.
pub fn top_k_by_score(scores: &[f64], k: usize) -> Vec<u32> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.into_iter().map(|c| c as u32).collect()
}

/// Top-5 clusters for each listed paper.
pub fn assign_paper_subjects(corpus: &Corpus, clusters: &ClusterSet, papers: &[usize]) -> Vec<Vec<u32>> {
    let membership = clusters.membership(corpus.len());
    papers
        .iter()
        .map(|&p| {
            let profile = relatedness_profile(corpus, clusters, &membership, p);
            top_k_by_score(&profile, SUBJECTS_PER_ENTITY)
        })
        .collect()
}

/// Distinct papers in `targets` cited by any paper the author wrote.
pub fn cited_targets(corpus: &Corpus, author: &str, is_target: &[bool]) -> Vec<usize> {
    let cited: BTreeSet<usize> = corpus
        .authored(author)
        .iter()
        .flat_map(|&a| corpus.out_citations(a).iter().copied())
        .filter(|&q| is_target[q])
        .collect();
    cited.into_iter().collect()
}

/// Authors whose distinct citations into papers published in `window`
/// number between `min_cites` and `max_cites` inclusive. Sorted by author id.
pub fn select_reviewers(
    corpus: &Corpus,
    window: RangeInclusive<u32>,
    min_cites: usize,
    max_cites: usize,
) -> Vec<String> {
    let in_window: Vec<bool> = corpus.papers().iter().map(|p| window.contains(&p.year)).collect();
    corpus
        .authors()
        .keys()
        .filter(|a| {
            let c = cited_targets(corpus, a, &in_window).len();
            c >= min_cites && c <= max_cites
        })
        .cloned()
        .collect()
}

/// How often each cluster appears among the subject lists of `cited`.
pub fn subject_frequencies(
    cited: &[usize],
    subjects_of: impl Fn(usize) -> Option<Vec<u32>>,
    n_clusters: usize,
) -> Vec<usize> {
    let mut freq = vec![0; n_clusters];
    for &q in cited {
        if let Some(subs) = subjects_of(q) {
            for s in subs {
                freq[s as usize] += 1;
            }
        }
    }
    freq
}

/// Up to five most frequent clusters (frequency > 0), ties in random order.
pub fn top_subjects_by_frequency(freq: &[usize], rng: &mut StreamRng) -> Vec<u32> {
    let mut ids: Vec<u32> = (0..freq.len() as u32).filter(|&c| freq[c as usize] > 0).collect();
    ids.shuffle(rng);
    ids.sort_by(|&a, &b| freq[b as usize].cmp(&freq[a as usize]));
    ids.truncate(SUBJECTS_PER_ENTITY);
    ids
}
