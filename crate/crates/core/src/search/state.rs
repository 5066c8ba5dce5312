//! Scoring context shared by the drivers: model lookup, output-length cap,
//! joint scoring and secondary-decoder state per prefix.

use std::sync::Arc;

use super::{Algorithm, ScorerCalls, SearchConfig};
use crate::error::{Error, Result};
use crate::logprob::LogProb;
use crate::models::{AttentionModel, CtcGrid, Models, TransducerModel};
use crate::scorers::{
    attention_score, ctc_prefix_init, ctc_prefix_score, rnnt_prefix_init, rnnt_prefix_score,
    CtcPrefixCache, Next, RnntPrefixCache,
};
use crate::vocab::{TokenId, TokenSeq};
use crate::weights::{joint_score, Decoder, DecoderWeights, Scores};

/// Prefix scores and caches of the secondary decoders for one prefix.
/// Cheap to clone; caches are shared.
#[derive(Debug, Clone, Default)]
pub(crate) struct Secondary {
    ctc: Option<(LogProb, Arc<CtcPrefixCache>)>,
    rnnt: Option<(LogProb, Arc<RnntPrefixCache>)>,
    att: Option<LogProb>,
}

impl Secondary {
    pub fn scores(&self) -> Scores {
        Scores {
            ctc: self.ctc.as_ref().map(|c| c.0),
            rnnt: self.rnnt.as_ref().map(|c| c.0),
            att: self.att,
        }
    }
}

pub(crate) struct Context<'a> {
    pub weights: DecoderWeights,
    pub k_beam: usize,
    pub k_pre: usize,
    pub max_len: usize,
    pub calls: ScorerCalls,
    grid: Option<&'a CtcGrid>,
    transducer: Option<&'a TransducerModel>,
    attention: Option<&'a AttentionModel>,
}

impl<'a> Context<'a> {
    pub fn new(models: &'a Models, cfg: &SearchConfig, algorithm: Algorithm) -> Result<Self> {
        cfg.validate()?;
        models.validate()?;
        let primary = algorithm.primary();
        let w = cfg.weights;
        let needed = |d: Decoder| d == primary || w.uses(d);
        let require = |d: Decoder, present: bool| -> Result<()> {
            if needed(d) && !present {
                let role = if d == primary { "primary" } else { "weighted" };
                return Err(Error::usage(format!(
                    "{algorithm}-driven search needs the {} model ({role} decoder)",
                    decoder_name(d)
                )));
            }
            Ok(())
        };
        require(Decoder::Ctc, models.ctc.is_some())?;
        require(Decoder::Rnnt, models.transducer.is_some())?;
        require(Decoder::Att, models.attention.is_some())?;

        let grid = models.ctc.as_ref().filter(|_| needed(Decoder::Ctc));
        let transducer = models.transducer.as_ref().filter(|_| needed(Decoder::Rnnt));
        let attention = models.attention.as_ref().filter(|_| needed(Decoder::Att));

        let frames = grid.map(|g| g.frames()).or(transducer.map(|m| m.frames()));
        let bound = [
            transducer.and_then(|m| m.context_bound()),
            attention.and_then(|m| m.context_bound()),
        ]
        .into_iter()
        .flatten()
        .min();
        let max_len = match cfg.max_output_len {
            Some(n) => {
                if let Some(b) = bound.filter(|&b| n > b) {
                    return Err(Error::usage(format!(
                        "max_output_len = {n} exceeds the model context bound {b}"
                    )));
                }
                n
            }
            None => {
                let default = frames.map(|t| {
                    if algorithm.is_label_synchronous() {
                        2 * t
                    } else {
                        t
                    }
                });
                match (default, bound) {
                    (Some(d), Some(b)) => d.min(b),
                    (Some(d), None) => d,
                    (None, Some(b)) => b,
                    (None, None) => {
                        return Err(Error::usage(
                            "max_output_len must be given when no model fixes the frame count",
                        ))
                    }
                }
            }
        };

        Ok(Context {
            weights: w,
            k_beam: cfg.k_beam,
            k_pre: cfg.k_pre,
            max_len,
            calls: ScorerCalls::default(),
            grid,
            transducer,
            attention,
        })
    }

    pub fn grid(&self) -> &'a CtcGrid {
        self.grid.expect("checked in Context::new")
    }

    pub fn transducer(&self) -> &'a TransducerModel {
        self.transducer.expect("checked in Context::new")
    }

    pub fn attention(&self) -> &'a AttentionModel {
        self.attention.expect("checked in Context::new")
    }

    pub fn uses(&self, d: Decoder) -> bool {
        self.weights.uses(d)
    }

    pub fn joint(&self, scores: &Scores, len: usize) -> Result<LogProb> {
        joint_score(scores, &self.weights, len)
    }

    /// Upper bound on the joint score of any complete hypothesis extending a
    /// prefix of length `len` with joint prefix score `joint`. Holds because
    /// every decoder's prefix score is nonincreasing in the prefix and at
    /// least its complete score.
    pub fn completion_bound(&self, joint: LogProb, len: usize) -> LogProb {
        joint + self.weights.beta.max(0.0) * self.max_len.saturating_sub(len) as f64
    }

    /// `Some(value)` when the decoder carries weight, else `None`.
    pub fn weighted(&self, d: Decoder, value: LogProb) -> Option<LogProb> {
        self.uses(d).then_some(value)
    }

    /// State of the empty prefix for every weighted decoder except `primary`.
    pub fn root(&mut self, primary: Decoder) -> Result<Secondary> {
        let mut s = Secondary::default();
        if primary != Decoder::Ctc && self.uses(Decoder::Ctc) {
            s.ctc = Some((0.0, Arc::new(ctc_prefix_init(self.grid()))));
        }
        if primary != Decoder::Rnnt && self.uses(Decoder::Rnnt) {
            let m = self.transducer();
            s.rnnt = Some((0.0, Arc::new(rnnt_prefix_init(m, m.frames())?)));
        }
        if primary != Decoder::Att && self.uses(Decoder::Att) {
            s.att = Some(0.0);
        }
        Ok(s)
    }

    /// State of `prefix·y` from the state of `prefix`.
    pub fn extend(
        &mut self,
        parent: &Secondary,
        prefix: &TokenSeq,
        y: TokenId,
    ) -> Result<Secondary> {
        let mut s = Secondary::default();
        if let Some((_, cache)) = &parent.ctc {
            self.calls.bump(Decoder::Ctc);
            let r = ctc_prefix_score(self.grid(), prefix, Next::Token(y), cache)?;
            s.ctc = Some((
                r.alpha,
                Arc::new(r.cache.expect("token extension yields a cache")),
            ));
        }
        if let Some((_, cache)) = &parent.rnnt {
            self.calls.bump(Decoder::Rnnt);
            let r = rnnt_prefix_score(self.transducer(), prefix, Next::Token(y), cache)?;
            s.rnnt = Some((
                r.alpha,
                Arc::new(r.cache.expect("token extension yields a cache")),
            ));
        }
        if let Some(alpha) = parent.att {
            self.calls.bump(Decoder::Att);
            s.att = Some(alpha + attention_score(self.attention(), prefix, Next::Token(y))?);
        }
        Ok(s)
    }

    /// Complete-sequence scores of `prefix` for the secondary decoders.
    pub fn complete(&mut self, state: &Secondary, prefix: &TokenSeq) -> Result<Scores> {
        let mut scores = Scores::default();
        if let Some((_, cache)) = &state.ctc {
            self.calls.bump(Decoder::Ctc);
            scores.ctc = Some(ctc_prefix_score(self.grid(), prefix, Next::Eos, cache)?.alpha);
        }
        if let Some((_, cache)) = &state.rnnt {
            self.calls.bump(Decoder::Rnnt);
            scores.rnnt =
                Some(rnnt_prefix_score(self.transducer(), prefix, Next::Eos, cache)?.alpha);
        }
        if let Some(alpha) = state.att {
            self.calls.bump(Decoder::Att);
            scores.att = Some(alpha + attention_score(self.attention(), prefix, Next::Eos)?);
        }
        Ok(scores)
    }
}

fn decoder_name(d: Decoder) -> &'static str {
    match d {
        Decoder::Ctc => "ctc",
        Decoder::Rnnt => "rnnt",
        Decoder::Att => "att",
    }
}
