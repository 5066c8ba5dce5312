//! Label-synchronous incremental scorers.
//!
//! Each scorer maps `(prefix, next, cache)` to the cumulative log score of
//! the extended prefix plus the successor cache. Caches are immutable; one
//! parent cache can serve any number of children. Scoring `Next::Eos`
//! returns the complete-sequence score of the prefix itself and no cache.

mod attention;
mod ctc;
mod rnnt;

pub use attention::attention_score;
pub use ctc::{ctc_prefix_batch, ctc_prefix_init, ctc_prefix_score, CtcPrefixCache};
pub use rnnt::{rnnt_prefix_batch, rnnt_prefix_init, rnnt_prefix_score, RnntPrefixCache};

use crate::error::{Error, Result};
use crate::logprob::LogProb;
use crate::vocab::{TokenId, TokenSeq};

/// The label appended to a prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Next {
    Token(TokenId),
    Eos,
}

#[derive(Debug, Clone)]
pub struct ScoreResult<C> {
    /// Cumulative log score of the extended hypothesis.
    pub alpha: LogProb,
    /// Cache for the extended prefix; `None` after eos.
    pub cache: Option<C>,
}

pub(crate) fn check_prefix(cache_prefix: &TokenSeq, prefix: &TokenSeq) -> Result<()> {
    if cache_prefix == prefix {
        Ok(())
    } else {
        Err(Error::usage(format!(
            "cache belongs to prefix {:?}, not {:?}",
            cache_prefix.as_slice(),
            prefix.as_slice()
        )))
    }
}
