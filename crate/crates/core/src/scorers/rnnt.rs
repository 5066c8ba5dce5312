//! Transducer prefix scoring.
//!
//! For a prefix `l`, `psi[t]` is the probability of reaching lattice node
//! `(t, |l|)` with the last move being the emission of `last(l)` at frame
//! `t`. The node mass `gamma[t]` adds the paths arriving at that node by a
//! blank from frame `t - 1`:
//!
//! ```text
//! gamma[t] = psi[t] + gamma[t-1] · P(blank | t-1, l)
//! psi'[t]  = gamma[t] · P(y | t, l)          for l' = l·y
//! alpha(l') = Σ_t psi'[t]
//! P(Y = l)  = gamma[T-1] · P(blank | T-1, l)
//! ```
//!
//! The empty prefix starts with probability one at the lattice origin.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::logprob::{log_add, log_sum_exp, LogProb, LOG_ONE, LOG_ZERO};
use crate::models::{LogDist, TransducerModel};
use crate::vocab::TokenSeq;

use super::{check_prefix, Next, ScoreResult};

#[derive(Debug, Clone)]
pub struct RnntPrefixCache {
    prefix: TokenSeq,
    psi: Vec<LogProb>,
    /// `gamma` and the per-frame posteriors for this prefix, filled on first use.
    derived: OnceLock<Arc<Derived>>,
}

#[derive(Debug)]
struct Derived {
    gamma: Vec<LogProb>,
    rows: Vec<LogDist>,
}

impl PartialEq for RnntPrefixCache {
    fn eq(&self, other: &Self) -> bool {
        self.prefix == other.prefix && self.psi == other.psi
    }
}

impl RnntPrefixCache {
    fn new(prefix: TokenSeq, psi: Vec<LogProb>) -> Self {
        RnntPrefixCache {
            prefix,
            psi,
            derived: OnceLock::new(),
        }
    }

    pub fn prefix(&self) -> &TokenSeq {
        &self.prefix
    }

    pub fn psi(&self) -> &[LogProb] {
        &self.psi
    }

    fn derived(&self, model: &TransducerModel) -> Result<&Derived> {
        if let Some(d) = self.derived.get() {
            return Ok(d);
        }
        let frames = self.psi.len();
        let rows = (0..frames)
            .map(|t| model.posterior(t, &self.prefix).map(|d| d.into_owned()))
            .collect::<Result<Vec<_>>>()?;
        let mut gamma = Vec::with_capacity(frames);
        let mut prev = LOG_ZERO;
        for t in 0..frames {
            let from_blank = if t == 0 {
                LOG_ZERO
            } else {
                prev + rows[t - 1].reserved()
            };
            prev = log_add(self.psi[t], from_blank);
            gamma.push(prev);
        }
        Ok(self
            .derived
            .get_or_init(|| Arc::new(Derived { gamma, rows })))
    }

    /// Node mass `gamma[t]` for every frame.
    pub fn gamma(&self, model: &TransducerModel) -> Result<Vec<LogProb>> {
        Ok(self.derived(model)?.gamma.clone())
    }
}

/// Cache for the empty prefix.
pub fn rnnt_prefix_init(model: &TransducerModel, frames: usize) -> Result<RnntPrefixCache> {
    if frames == 0 || frames != model.frames() {
        return Err(Error::usage(format!(
            "transducer has {} frames, asked for {frames}",
            model.frames()
        )));
    }
    let mut psi = vec![LOG_ZERO; frames];
    psi[0] = LOG_ONE;
    Ok(RnntPrefixCache::new(TokenSeq::empty(), psi))
}

pub fn rnnt_prefix_score(
    model: &TransducerModel,
    prefix: &TokenSeq,
    next: Next,
    cache: &RnntPrefixCache,
) -> Result<ScoreResult<RnntPrefixCache>> {
    check_prefix(&cache.prefix, prefix)?;
    if cache.psi.len() != model.frames() {
        return Err(Error::usage("cache was built for a different transducer"));
    }
    let d = cache.derived(model)?;
    let last = d.gamma.len() - 1;
    match next {
        Next::Eos => Ok(ScoreResult {
            alpha: d.gamma[last] + d.rows[last].reserved(),
            cache: None,
        }),
        Next::Token(y) if y < model.vocab_size() => {
            let psi: Vec<LogProb> = d
                .gamma
                .iter()
                .zip(&d.rows)
                .map(|(g, row)| g + row.token(y))
                .collect();
            Ok(ScoreResult {
                alpha: log_sum_exp(&psi)?,
                cache: Some(RnntPrefixCache::new(prefix.extended(y), psi)),
            })
        }
        Next::Token(y) => Err(Error::usage(format!("token {y} outside vocabulary"))),
    }
}

/// Prefix score and cache of `prefix` from the full `(frame, length)`
/// forward lattice, without any cached state.
pub fn rnnt_prefix_batch(
    model: &TransducerModel,
    prefix: &TokenSeq,
) -> Result<(LogProb, RnntPrefixCache)> {
    let frames = model.frames();
    let s_len = prefix.len();
    if s_len == 0 {
        let c = rnnt_prefix_init(model, frames)?;
        return Ok((LOG_ONE, c));
    }
    // fwd[t][s]: mass at node (t, s) before consuming frame t's blank
    let mut fwd = vec![vec![LOG_ZERO; s_len]; frames];
    let mut psi = vec![LOG_ZERO; frames];
    for t in 0..frames {
        for s in 0..s_len {
            let ctx = &prefix[..s];
            let mut acc = if t == 0 && s == 0 { LOG_ONE } else { LOG_ZERO };
            if t > 0 {
                acc = log_add(acc, fwd[t - 1][s] + model.posterior(t - 1, ctx)?.reserved());
            }
            if s > 0 {
                acc = log_add(
                    acc,
                    fwd[t][s - 1] + model.posterior(t, &prefix[..s - 1])?.token(prefix[s - 1]),
                );
            }
            fwd[t][s] = acc;
        }
        psi[t] = fwd[t][s_len - 1]
            + model
                .posterior(t, &prefix[..s_len - 1])?
                .token(prefix[s_len - 1]);
    }
    Ok((
        log_sum_exp(&psi)?,
        RnntPrefixCache::new(prefix.clone(), psi),
    ))
}
