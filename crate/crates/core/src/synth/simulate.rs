//! End-to-end conference simulation from a corpus.

use serde::{Deserialize, Serialize};

use crate::conference::{BidMatrix, Conference, ConferenceMeta, Reviewer};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng;
use crate::synth::bids::{cluster_weights, icf_weights, sample_bids, subject_score, total_score};
use crate::synth::cluster::{cluster_subject_areas, ClusterSet};
use crate::synth::rebalance::rebalance_subsample;
use crate::synth::subjects::{
    assign_paper_subjects, cited_targets, select_reviewers, subject_frequencies, top_subjects_by_frequency,
};
use crate::synth::tpms::{normalize_columns, tpms_raw, BackgroundModel, Profile};
use crate::synth::BidSimParams;
use crate::text::{tokenize, Idf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub window_start: u32,
    pub window_end: u32,
    pub target_clusters: usize,
    pub min_cluster: usize,
    pub min_cites: usize,
    pub max_cites: usize,
    pub bids: BidSimParams,
    /// Subsample targets; `None` keeps everything.
    pub n_papers: Option<usize>,
    pub n_reviewers: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            window_start: 2014,
            window_end: 2015,
            target_clusters: 1000,
            min_cluster: 5,
            min_cites: 15,
            max_cites: 50,
            bids: BidSimParams::default(),
            n_papers: None,
            n_reviewers: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub conference: Conference,
    pub clusters: ClusterSet,
    /// Sizes before subsampling.
    pub n_candidate_reviewers: usize,
    pub n_candidate_papers: usize,
}

pub fn simulate_conference(corpus: &Corpus, cfg: &SynthConfig, seed: u64) -> Result<SynthOutput> {
    cfg.bids.validate()?;
    let window = cfg.window_start..=cfg.window_end;
    let is_target: Vec<bool> = corpus.papers().iter().map(|p| window.contains(&p.year)).collect();
    let targets: Vec<usize> = (0..corpus.len()).filter(|&i| is_target[i]).collect();
    if targets.is_empty() {
        return Err(Error::param("no corpus papers fall inside the year window"));
    }
    let target_clusters = cfg.target_clusters.min(targets.len());
    let clusters = cluster_subject_areas(corpus, &targets, target_clusters, cfg.min_cluster, seed)?;
    if clusters.is_empty() {
        return Err(Error::param("clustering left no subject area above the minimum size"));
    }
    let membership = clusters.membership(corpus.len());
    let target_subjects = assign_paper_subjects(corpus, &clusters, &targets);
    let mut subjects_of = vec![None; corpus.len()];
    for (&p, s) in targets.iter().zip(&target_subjects) {
        subjects_of[p] = Some(s.clone());
    }

    let reviewer_ids = select_reviewers(corpus, window.clone(), cfg.min_cites, cfg.max_cites);
    if reviewer_ids.is_empty() {
        return Err(Error::param("no author satisfies the reviewer citation thresholds"));
    }
    let (m, n) = (reviewer_ids.len(), targets.len());
    let cited: Vec<Vec<usize>> = reviewer_ids.iter().map(|a| cited_targets(corpus, a, &is_target)).collect();
    let reviewers: Vec<Reviewer> = reviewer_ids
        .iter()
        .zip(&cited)
        .enumerate()
        .map(|(i, (a, cites))| {
            let freq = subject_frequencies(cites, |q| subjects_of[q].clone(), clusters.len());
            let mut rng = rng::stream(seed, "subject-ties", i as u64);
            Reviewer {
                reviewer_id: a.clone(),
                authored: corpus.authored(a).iter().map(|&q| corpus.paper(q).paper_id.clone()).collect(),
                subjects: top_subjects_by_frequency(&freq, &mut rng),
            }
        })
        .collect();

    // Text statistics over the whole corpus.
    let abstracts: Vec<Vec<String>> = corpus.papers().iter().map(|p| tokenize(&p.abstract_text)).collect();
    let titles: Vec<Vec<String>> = corpus.papers().iter().map(|p| tokenize(&p.title)).collect();
    let background = BackgroundModel::fit(abstracts.iter().map(Vec::as_slice));
    let idf_abstract = Idf::fit(abstracts.iter().map(Vec::as_slice));
    let idf_title = Idf::fit(titles.iter().map(Vec::as_slice));
    let paper_abs_vec: Vec<_> = targets.iter().map(|&p| idf_abstract.vectorize(&abstracts[p])).collect();
    let paper_title_vec: Vec<_> = targets.iter().map(|&p| idf_title.vectorize(&titles[p])).collect();

    let icf = icf_weights(corpus, &is_target);
    let top_cluster = |q: usize| subjects_of[q].as_ref().and_then(|s| s.first().copied());

    let mut tpms = vec![0.0; m * n];
    let mut totals = vec![0.0; m * n];
    for (r, a) in reviewer_ids.iter().enumerate() {
        let authored = corpus.authored(a);
        let profile = Profile::from_tokens(authored.iter().map(|&q| abstracts[q].as_slice()));
        let pooled_abs: Vec<String> = authored.iter().flat_map(|&q| abstracts[q].iter().cloned()).collect();
        let pooled_title: Vec<String> = authored.iter().flat_map(|&q| titles[q].iter().cloned()).collect();
        let r_abs = idf_abstract.vectorize(&pooled_abs);
        let r_title = idf_title.vectorize(&pooled_title);
        let weights = cluster_weights(&cited[r], &icf, top_cluster, &clusters);
        for (j, &p) in targets.iter().enumerate() {
            tpms[r * n + j] = tpms_raw(&profile, &abstracts[p], &background, cfg.bids.beta);
            let subject =
                subject_score(&weights, &membership, p, corpus.in_citations(p).len(), cfg.bids.icf_citation_cap);
            if subject > 0.0 {
                totals[r * n + j] =
                    total_score(r_title.dot(&paper_title_vec[j]), r_abs.dot(&paper_abs_vec[j]), subject);
            }
        }
    }
    normalize_columns(&mut tpms, m, n);
    let bids: BidMatrix = sample_bids(&totals, m, n, &cfg.bids, seed)?;

    let papers = targets.iter().map(|&p| corpus.paper(p).clone()).collect();
    let mut conference = Conference::new(papers, target_subjects, reviewers, clusters.len(), tpms, &bids)?;
    let mut meta = ConferenceMeta { seed, ..ConferenceMeta::default() };
    meta.params.alpha = cfg.bids.alpha;
    meta.params.mu = cfg.bids.mu;
    meta.params.beta = cfg.bids.beta;
    conference = conference.with_meta(meta);
    if cfg.n_papers.is_some() || cfg.n_reviewers.is_some() {
        let np = cfg.n_papers.unwrap_or(n);
        let nr = cfg.n_reviewers.unwrap_or(m);
        conference = rebalance_subsample(&conference, np, nr, seed)?;
    }
    Ok(SynthOutput { conference, clusters, n_candidate_reviewers: m, n_candidate_papers: n })
}
