//! Deterministic posterior providers standing in for the encoder and the
//! neural decoders.
//!
//! Every distribution is over the regular tokens plus one reserved symbol:
//! blank for the CTC grid and the transducer, eos for the attention model.
//! The reserved symbol is always the last entry. Frame indices are 0-based
//! in the API and 1-based in model files.

mod attention;
mod bundle;
mod grid;
pub mod hash;
mod transducer;

pub use attention::{AttentionModel, AttentionTable, HashAttention, DEFAULT_EOS_FLOOR};
pub use bundle::Models;
pub use grid::CtcGrid;
pub use transducer::{HashTransducer, TransducerModel, TransducerTable};

use crate::error::{Error, Result};
use crate::logprob::{ln, LogProb};
use crate::vocab::TokenId;

/// Tolerance on `|Σ p − 1|` for every stored distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A log distribution over `V ∪ {reserved}`, reserved last.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDist(Vec<LogProb>);

impl LogDist {
    pub fn from_log(values: Vec<LogProb>) -> Self {
        LogDist(values)
    }

    pub fn from_linear(probs: &[f64]) -> Self {
        LogDist(probs.iter().map(|&p| ln(p)).collect())
    }

    /// Number of regular tokens covered.
    pub fn vocab_size(&self) -> usize {
        self.0.len() - 1
    }

    #[inline]
    pub fn token(&self, t: TokenId) -> LogProb {
        self.0[t]
    }

    /// Blank or eos, depending on the model.
    #[inline]
    pub fn reserved(&self) -> LogProb {
        self.0[self.0.len() - 1]
    }

    pub fn tokens(&self) -> &[LogProb] {
        &self.0[..self.0.len() - 1]
    }

    pub fn as_slice(&self) -> &[LogProb] {
        &self.0
    }

    pub fn linear_sum(&self) -> f64 {
        self.0.iter().map(|v| v.exp()).sum()
    }

    /// Indices of the `k` most probable regular tokens, best first; ties go
    /// to the lower index.
    pub fn top_tokens(&self, k: usize) -> Vec<TokenId> {
        top_k(self.tokens(), k)
    }
}

/// Indices of the `k` largest values, descending, ties to the lower index.
pub(crate) fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Checks one linear-probability row read from a model file.
pub(crate) fn check_row(location: &str, probs: &[f64], expected_len: usize) -> Result<()> {
    if probs.len() != expected_len {
        return Err(Error::model(
            location,
            format!("row has {} entries, expected {expected_len}", probs.len()),
        ));
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(Error::model(
            location,
            format!("entry {i} = {p} is not a probability"),
        ));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::model(location, format!("row sums to {sum}, not 1")));
    }
    Ok(())
}
