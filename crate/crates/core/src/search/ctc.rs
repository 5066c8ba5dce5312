use std::collections::BTreeMap;

use super::state::{Context, Secondary};
use super::{rank, Algorithm, Hypothesis, NBestList, SearchConfig, SearchOutput};
use crate::error::Result;
use crate::logprob::{log_add, LogProb, LOG_ZERO};
use crate::models::Models;
use crate::vocab::TokenSeq;
use crate::weights::Decoder;

/// Blank-ending and token-ending CTC prefix mass of one beam entry.
struct Entry {
    blank: LogProb,
    nonblank: LogProb,
    state: Secondary,
}

impl Entry {
    fn total(&self) -> LogProb {
        log_add(self.blank, self.nonblank)
    }
}

/// Time-synchronous joint search led by CTC prefix beam search.
///
/// Each frame extends every prefix in the beam by blank, by a repeat of its
/// last token, and by the top `k_pre` tokens of the frame posterior.
/// Alignments reaching the same prefix are merged by log-sum. A prefix is
/// rescored by the secondary decoders only when it first appears; frames
/// that do not change it leave those scores untouched. After the last frame
/// every surviving prefix is completed with each decoder's eos score.
pub fn ctc_driven_search(models: &Models, cfg: &SearchConfig) -> Result<SearchOutput> {
    let mut ctx = Context::new(models, cfg, Algorithm::CtcDriven)?;
    let grid = ctx.grid();

    let mut beam = BTreeMap::new();
    beam.insert(
        TokenSeq::empty(),
        Entry {
            blank: 0.0,
            nonblank: LOG_ZERO,
            state: ctx.root(Decoder::Ctc)?,
        },
    );

    for t in 0..grid.frames() {
        ctx.calls.bump(Decoder::Ctc);
        let row = grid.frame_posterior(t)?;
        let candidates = row.top_tokens(ctx.k_pre);

        let mut next: BTreeMap<TokenSeq, (LogProb, LogProb)> = BTreeMap::new();
        for (l, h) in &beam {
            let total = h.total();
            let e = next.entry(l.clone()).or_insert((LOG_ZERO, LOG_ZERO));
            e.0 = log_add(e.0, total + row.reserved());
            if let Some(last) = l.last() {
                e.1 = log_add(e.1, h.nonblank + row.token(last));
            }
            if l.len() >= ctx.max_len {
                continue;
            }
            for &c in &candidates {
                let enter = if l.last() == Some(c) { h.blank } else { total };
                let e = next.entry(l.extended(c)).or_insert((LOG_ZERO, LOG_ZERO));
                e.1 = log_add(e.1, enter + row.token(c));
            }
        }

        let mut scored = Vec::with_capacity(next.len());
        for (l, (blank, nonblank)) in next {
            let state = match beam.get(&l) {
                Some(h) => h.state.clone(),
                None => {
                    let parent = l.parent().expect("new prefixes are extensions");
                    let y = l.last().expect("new prefixes are non-empty");
                    ctx.extend(&beam[&parent].state, &parent, y)?
                }
            };
            let mut scores = state.scores();
            scores.ctc = ctx.weighted(Decoder::Ctc, log_add(blank, nonblank));
            let joint = ctx.joint(&scores, l.len())?;
            if joint > LogProb::NEG_INFINITY {
                scored.push((
                    joint,
                    l,
                    Entry {
                        blank,
                        nonblank,
                        state,
                    },
                ));
            }
        }
        scored.sort_by(|a, b| rank(a.0, &a.1, b.0, &b.1));
        scored.truncate(ctx.k_beam);
        beam = scored.into_iter().map(|(_, l, e)| (l, e)).collect();
    }

    let mut ended = Vec::with_capacity(beam.len());
    for (l, h) in &beam {
        let mut scores = ctx.complete(&h.state, l)?;
        scores.ctc = ctx.weighted(Decoder::Ctc, h.total());
        let joint = ctx.joint(&scores, l.len())?;
        ended.push(Hypothesis {
            tokens: l.clone(),
            joint,
            scores,
        });
    }
    Ok(SearchOutput {
        nbest: NBestList::from_complete(ended, cfg.n_best),
        calls: ctx.calls,
    })
}
