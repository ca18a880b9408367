//! Seeded synthetic citation corpus with planted topic communities.
//!
//! Three paper populations are produced: older background papers, the
//! window papers that become conference submissions, and later papers by
//! prospective reviewers whose citations into the window define both their
//! interests and the co-citation structure.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Paper};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::text::is_stop_word;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusGenConfig {
    pub communities: usize,
    pub topics_per_community: usize,
    pub window_papers: usize,
    pub background_papers: usize,
    pub authors: usize,
    pub min_papers_per_author: usize,
    pub max_papers_per_author: usize,
    pub min_cites_per_paper: usize,
    pub max_cites_per_paper: usize,
    pub window_start: u32,
    pub window_end: u32,
    pub words_per_topic: usize,
    pub words_per_community: usize,
    pub generic_words: usize,
    /// Probability that an author citation stays in the author's own topics.
    pub topic_focus: f64,
}

impl Default for CorpusGenConfig {
    fn default() -> Self {
        CorpusGenConfig {
            communities: 2,
            topics_per_community: 6,
            window_papers: 360,
            background_papers: 160,
            authors: 340,
            min_papers_per_author: 2,
            max_papers_per_author: 4,
            min_cites_per_paper: 6,
            max_cites_per_paper: 14,
            window_start: 2014,
            window_end: 2015,
            words_per_topic: 40,
            words_per_community: 50,
            generic_words: 80,
            topic_focus: 0.85,
        }
    }
}

impl CorpusGenConfig {
    /// Small corpus for smoke tests (about 50 reviewers and 50 papers).
    pub fn demo() -> Self {
        CorpusGenConfig {
            topics_per_community: 3,
            window_papers: 80,
            background_papers: 40,
            authors: 70,
            ..Self::default()
        }
    }

    pub fn n_topics(&self) -> usize {
        self.communities * self.topics_per_community
    }

    fn validate(&self) -> Result<()> {
        if self.communities == 0 || self.topics_per_community == 0 {
            return Err(Error::param("need at least one community and topic"));
        }
        if self.window_papers == 0 || self.authors == 0 {
            return Err(Error::param("need window papers and authors"));
        }
        if self.min_papers_per_author == 0
            || self.min_papers_per_author > self.max_papers_per_author
            || self.min_cites_per_paper > self.max_cites_per_paper
        {
            return Err(Error::param("per-author ranges must be nonempty"));
        }
        if self.window_start > self.window_end || self.window_start < 10 {
            return Err(Error::param("invalid year window"));
        }
        if !(0.0..=1.0).contains(&self.topic_focus) {
            return Err(Error::param("topic_focus must lie in [0,1]"));
        }
        Ok(())
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Pronounceable pseudo-word for an integer id, never a stop word.
fn pseudo_word(mut id: usize) -> String {
    let mut s = String::new();
    for _ in 0..3 {
        s.push(CONSONANTS[id % CONSONANTS.len()] as char);
        id /= CONSONANTS.len();
        s.push(VOWELS[id % VOWELS.len()] as char);
        id /= VOWELS.len();
    }
    while id > 0 {
        s.push(CONSONANTS[id % CONSONANTS.len()] as char);
        id /= CONSONANTS.len();
    }
    if is_stop_word(&s) {
        s.push('x');
    }
    s
}

struct Vocab {
    topic: Vec<Vec<String>>,
    community: Vec<Vec<String>>,
    generic: Vec<String>,
}

impl Vocab {
    fn new(cfg: &CorpusGenConfig) -> Self {
        let mut next = 0usize;
        let mut take = |k: usize| -> Vec<String> {
            let words = (next..next + k).map(|i| pseudo_word(i * 7919 + 13)).collect();
            next += k;
            words
        };
        let topic = (0..cfg.n_topics()).map(|_| take(cfg.words_per_topic)).collect();
        let community = (0..cfg.communities).map(|_| take(cfg.words_per_community)).collect();
        let generic = take(cfg.generic_words);
        Vocab { topic, community, generic }
    }
}

/// Skewed pick: low indices are favored, giving each vocabulary a few
/// frequent words and a long tail.
fn skewed<'a, T>(items: &'a [T], rng: &mut StreamRng) -> &'a T {
    let u: f64 = rng.random();
    &items[((u * u) * items.len() as f64) as usize]
}

fn text(vocab: &Vocab, topic: usize, community: usize, len: usize, mix: (f64, f64), rng: &mut StreamRng) -> String {
    (0..len)
        .map(|_| {
            let u: f64 = rng.random();
            if u < mix.0 {
                skewed(&vocab.topic[topic], rng).clone()
            } else if u < mix.0 + mix.1 {
                skewed(&vocab.community[community], rng).clone()
            } else {
                skewed(&vocab.generic, rng).clone()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Draws `k` distinct items with probability proportional to `weight`.
fn weighted_distinct(pool: &[usize], weight: &[f64], k: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut chosen = BTreeSet::new();
    let total: f64 = pool.iter().map(|&i| weight[i]).sum();
    let mut attempts = 0;
    while chosen.len() < k.min(pool.len()) && attempts < 50 * k + 50 {
        attempts += 1;
        let mut u = rng.random::<f64>() * total;
        let mut pick = pool[pool.len() - 1];
        for &i in pool {
            u -= weight[i];
            if u <= 0.0 {
                pick = i;
                break;
            }
        }
        chosen.insert(pick);
    }
    chosen.into_iter().collect()
}

pub fn generate_corpus(cfg: &CorpusGenConfig, seed: u64) -> Result<Corpus> {
    cfg.validate()?;
    let vocab = Vocab::new(cfg);
    let n_topics = cfg.n_topics();
    let community_of = |t: usize| t / cfg.topics_per_community;
    let mut papers: Vec<Paper> = Vec::new();

    // Background papers, one topic each.
    let mut rng = rng::stream(seed, "gen-background", 0);
    let mut background_by_topic = vec![Vec::new(); n_topics];
    for i in 0..cfg.background_papers {
        let t = i % n_topics;
        let c = community_of(t);
        let len_t = rng.random_range(4..=8);
        let len_a = rng.random_range(40..=70);
        papers.push(Paper {
            paper_id: format!("b{i:05}"),
            title: text(&vocab, t, c, len_t, (0.6, 0.25), &mut rng),
            abstract_text: text(&vocab, t, c, len_a, (0.45, 0.25), &mut rng),
            venue: "archive".into(),
            year: rng.random_range(cfg.window_start - 8..cfg.window_start),
            author_ids: vec![format!("ba{:04}", rng.random_range(0..cfg.background_papers.max(1)))],
            out_citations: Vec::new(),
        });
        background_by_topic[t].push(format!("b{i:05}"));
    }

    // Window papers with a popularity weight that skews later citations.
    let mut rng = rng::stream(seed, "gen-window", 0);
    let mut window_weight = Vec::with_capacity(cfg.window_papers);
    let mut window_by_topic = vec![Vec::new(); n_topics];
    let venues = ["nips", "icml", "iclr", "cvpr", "acl", "aaai"];
    for i in 0..cfg.window_papers {
        let t = rng.random_range(0..n_topics);
        let c = community_of(t);
        window_weight.push(1.0 / (0.05 + rng.random::<f64>()).powf(0.8));
        window_by_topic[t].push(i);
        let mut cites: Vec<String> = Vec::new();
        if !background_by_topic[t].is_empty() {
            for _ in 0..rng.random_range(2..=5) {
                cites.push(background_by_topic[t].choose(&mut rng).unwrap().clone());
            }
        }
        // a few earlier window papers from the same topic
        let earlier: Vec<usize> = window_by_topic[t].iter().copied().filter(|&j| j < i).collect();
        for _ in 0..rng.random_range(0..=2usize) {
            if let Some(&j) = earlier.choose(&mut rng) {
                cites.push(format!("p{j:05}"));
            }
        }
        cites.sort();
        cites.dedup();
        let n_auth = rng.random_range(1..=3);
        papers.push(Paper {
            paper_id: format!("p{i:05}"),
            title: text(&vocab, t, c, rng.random_range(4..=8), (0.6, 0.25), &mut rng),
            abstract_text: text(&vocab, t, c, rng.random_range(50..=90), (0.45, 0.25), &mut rng),
            venue: venues.choose(&mut rng).unwrap().to_string(),
            year: rng.random_range(cfg.window_start..=cfg.window_end),
            author_ids: (0..n_auth)
                .map(|_| format!("wa{:04}", rng.random_range(0..cfg.window_papers)))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            out_citations: cites,
        });
    }

    // Prospective reviewers: later papers citing into the window.
    let all_window: Vec<usize> = (0..cfg.window_papers).collect();
    let mut serial = 0usize;
    for a in 0..cfg.authors {
        let mut rng = rng::stream(seed, "gen-author", a as u64);
        let primary = rng.random_range(0..n_topics);
        let c = community_of(primary);
        let secondary = if rng.random::<f64>() < 0.6 {
            c * cfg.topics_per_community + rng.random_range(0..cfg.topics_per_community)
        } else {
            rng.random_range(0..n_topics)
        };
        let own_pool: Vec<usize> = window_by_topic[primary]
            .iter()
            .chain(&window_by_topic[secondary])
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n_papers = rng.random_range(cfg.min_papers_per_author..=cfg.max_papers_per_author);
        for _ in 0..n_papers {
            let topic = if rng.random::<f64>() < 0.7 { primary } else { secondary };
            let k = rng.random_range(cfg.min_cites_per_paper..=cfg.max_cites_per_paper);
            let focused = (0..k).filter(|_| rng.random::<f64>() < cfg.topic_focus).count();
            let mut cited = weighted_distinct(&own_pool, &window_weight, focused, &mut rng);
            cited.extend(weighted_distinct(&all_window, &window_weight, k - focused, &mut rng));
            let mut cites: Vec<String> = cited.into_iter().map(|j| format!("p{j:05}")).collect();
            if let Some(b) = background_by_topic[topic].choose(&mut rng) {
                cites.push(b.clone());
            }
            cites.sort();
            cites.dedup();
            papers.push(Paper {
                paper_id: format!("a{serial:05}"),
                title: text(&vocab, topic, community_of(topic), rng.random_range(4..=8), (0.6, 0.25), &mut rng),
                abstract_text: text(
                    &vocab,
                    topic,
                    community_of(topic),
                    rng.random_range(50..=90),
                    (0.45, 0.25),
                    &mut rng,
                ),
                venue: venues.choose(&mut rng).unwrap().to_string(),
                year: rng.random_range(cfg.window_end + 1..=cfg.window_end + 3),
                author_ids: vec![format!("au{a:04}")],
                out_citations: cites,
            });
            serial += 1;
        }
    }
    Corpus::new(papers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_words_unique() {
        let words: BTreeSet<String> = (0..2000).map(|i| pseudo_word(i * 7919 + 13)).collect();
        assert_eq!(words.len(), 2000);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = CorpusGenConfig::demo();
        let a = generate_corpus(&cfg, 5).unwrap();
        let b = generate_corpus(&cfg, 5).unwrap();
        assert_eq!(a.papers(), b.papers());
        let c = generate_corpus(&cfg, 6).unwrap();
        assert_ne!(a.papers(), c.papers());
        assert_eq!(a.dangling_citations(), 0);
    }
}
