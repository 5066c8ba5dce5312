use crate::error::Result;
use crate::logprob::LogProb;
use crate::models::AttentionModel;
use crate::vocab::TokenSeq;

use super::Next;

/// Single-step `log P(next | prefix)`; callers accumulate the sum.
pub fn attention_score(model: &AttentionModel, prefix: &TokenSeq, next: Next) -> Result<LogProb> {
    let dist = model.posterior(prefix)?;
    Ok(match next {
        Next::Token(y) => {
            if y >= dist.vocab_size() {
                return Err(crate::error::Error::usage(format!(
                    "token {y} outside vocabulary"
                )));
            }
            dist.token(y)
        }
        Next::Eos => dist.reserved(),
    })
}
