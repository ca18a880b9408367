//! Bid-manipulation-robust reviewer assignment.
//!
//! A ridge model predicts reviewer-paper relevance from bids and features;
//! attacks poison the bids, the defense strips disproportionately influential
//! bids from the candidate set, and a min-cost-flow solver assigns papers.

pub mod assign;
pub mod attack;
pub mod conference;
pub mod corpus;
pub mod defense;
pub mod error;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod rng;
pub mod scoring;
pub mod sparse;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
