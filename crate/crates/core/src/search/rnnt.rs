use std::collections::BTreeMap;

use super::state::{Context, Secondary};
use super::{rank, Algorithm, Hypothesis, NBestList, SearchConfig, SearchOutput};
use crate::error::Result;
use crate::logprob::{log_add, LogProb};
use crate::models::Models;
use crate::vocab::TokenSeq;
use crate::weights::Decoder;

struct Entry {
    /// Log mass of all lattice paths reaching this prefix at the current
    /// frame before its blank.
    mass: LogProb,
    state: Secondary,
}

/// Time-synchronous joint search led by the transducer.
///
/// Within a frame, hypotheses are processed in order of prefix length. Each
/// layer is pruned to `k_beam` by joint score, then every survivor both
/// emits its top `k_pre` tokens into the next layer (staying on the frame)
/// and emits blank into the next frame's arrivals. Paths reaching the same
/// prefix are merged by log-sum. A frame stops expanding once `k_beam`
/// arrivals beat every hypothesis still waiting, and arrivals are pruned to
/// `k_beam` between frames. Hypotheses that consume the blank of the last
/// frame are complete.
pub fn rnnt_driven_search(models: &Models, cfg: &SearchConfig) -> Result<SearchOutput> {
    let mut ctx = Context::new(models, cfg, Algorithm::RnntDriven)?;
    let model = ctx.transducer();
    let frames = model.frames();

    let mut arrivals = BTreeMap::new();
    arrivals.insert(
        TokenSeq::empty(),
        Entry {
            mass: 0.0,
            state: ctx.root(Decoder::Rnnt)?,
        },
    );

    for t in 0..frames {
        let mut layers: BTreeMap<usize, BTreeMap<TokenSeq, Entry>> = BTreeMap::new();
        for (l, e) in arrivals {
            layers.entry(l.len()).or_default().insert(l, e);
        }
        let mut advanced = BTreeMap::new();
        let mut advanced_joints = Vec::new();
        while let Some((len, layer)) = layers.pop_first() {
            for (l, h) in prune(&ctx, layer)? {
                ctx.calls.bump(Decoder::Rnnt);
                let dist = model.posterior(t, &l)?;
                if len < ctx.max_len {
                    for y in dist.top_tokens(ctx.k_pre) {
                        let mass = h.mass + dist.token(y);
                        let child = l.extended(y);
                        let next = layers.entry(len + 1).or_default();
                        if let Some(e) = next.get_mut(&child) {
                            e.mass = log_add(e.mass, mass);
                        } else {
                            let state = ctx.extend(&h.state, &l, y)?;
                            next.insert(child, Entry { mass, state });
                        }
                    }
                }
                let arrived = Entry {
                    mass: h.mass + dist.reserved(),
                    state: h.state,
                };
                advanced_joints.push(joint(&ctx, &l, &arrived)?);
                advanced.insert(l, arrived);
            }
            if advanced_joints.len() >= ctx.k_beam && !layers.is_empty() {
                advanced_joints.sort_by(|a, b| b.total_cmp(a));
                let kth = advanced_joints[ctx.k_beam - 1];
                let mut waiting = LogProb::NEG_INFINITY;
                for (l, e) in layers.values().flatten() {
                    waiting = waiting.max(ctx.completion_bound(joint(&ctx, l, e)?, l.len()));
                }
                if kth > waiting {
                    break;
                }
            }
        }
        arrivals = prune(&ctx, advanced)?.into_iter().collect();
    }

    let mut ended = Vec::with_capacity(arrivals.len());
    for (l, h) in &arrivals {
        let mut scores = ctx.complete(&h.state, l)?;
        scores.rnnt = ctx.weighted(Decoder::Rnnt, h.mass);
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

fn joint(ctx: &Context<'_>, l: &TokenSeq, e: &Entry) -> Result<LogProb> {
    let mut scores = e.state.scores();
    scores.rnnt = ctx.weighted(Decoder::Rnnt, e.mass);
    ctx.joint(&scores, l.len())
}

/// The best `k_beam` entries by joint prefix score, zero-score entries
/// dropped.
fn prune(ctx: &Context<'_>, entries: BTreeMap<TokenSeq, Entry>) -> Result<Vec<(TokenSeq, Entry)>> {
    let mut scored = Vec::with_capacity(entries.len());
    for (l, e) in entries {
        let j = joint(ctx, &l, &e)?;
        if j > LogProb::NEG_INFINITY {
            scored.push((j, l, e));
        }
    }
    scored.sort_by(|a, b| rank(a.0, &a.1, b.0, &b.1));
    scored.truncate(ctx.k_beam);
    Ok(scored.into_iter().map(|(_, l, e)| (l, e)).collect())
}
