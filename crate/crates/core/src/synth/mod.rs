//! Synthetic conference construction from a citation corpus.

pub mod bids;
pub mod cluster;
pub mod generator;
pub mod rebalance;
pub mod simulate;
pub mod subjects;
pub mod tpms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cluster::{cluster_subject_areas, cocitation_similarity, ClusterSet};
pub use generator::{generate_corpus, CorpusGenConfig};
pub use rebalance::rebalance_subsample;
pub use simulate::{simulate_conference, SynthConfig, SynthOutput};

/// Bid simulation knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidSimParams {
    /// Steepness of the retention sigmoid.
    pub alpha: f64,
    /// Rank at which retention probability is one half.
    pub mu: f64,
    /// Dirichlet smoothing mass for the TPMS language model.
    pub beta: f64,
    /// Papers with more in-citations than this get subject score 0.
    pub icf_citation_cap: usize,
    /// Relative shares of bids 1, 2 and 3 among retained pairs.
    pub quantize_ratio: [u32; 3],
}

impl Default for BidSimParams {
    fn default() -> Self {
        BidSimParams { alpha: 0.2, mu: 80.0, beta: 1000.0, icf_citation_cap: 1000, quantize_ratio: [8, 53, 39] }
    }
}

impl BidSimParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.alpha, "alpha")?;
        positive(self.mu, "mu")?;
        positive(self.beta, "beta")?;
        if self.quantize_ratio.contains(&0) {
            return Err(Error::param("quantize ratio components must be positive"));
        }
        Ok(())
    }
}
