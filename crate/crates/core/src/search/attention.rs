use super::state::{Context, Secondary};
use super::{rank, Algorithm, Hypothesis, NBestList, SearchConfig, SearchOutput};
use crate::error::Result;
use crate::logprob::LogProb;
use crate::models::{top_k, Models};
use crate::vocab::TokenSeq;
use crate::weights::Decoder;

struct Live {
    prefix: TokenSeq,
    att: LogProb,
    joint: LogProb,
    state: Secondary,
}

/// Label-synchronous joint search led by the attention decoder.
///
/// Every step proposes the top `k_pre` continuations (eos included) of each
/// live hypothesis, scores them jointly and keeps the best `k_beam`. An eos
/// continuation completes its hypothesis, which then no longer competes for
/// beam slots. The loop ends when no live hypothesis remains, or earlier
/// once no live hypothesis can reach the final n-best; at the length cap eos
/// is the only continuation.
pub fn attention_driven_search(models: &Models, cfg: &SearchConfig) -> Result<SearchOutput> {
    let mut ctx = Context::new(models, cfg, Algorithm::AttentionDriven)?;
    let model = ctx.attention();
    let eos = model.vocab_size();

    let root = ctx.root(Decoder::Att)?;
    let mut live = vec![Live {
        prefix: TokenSeq::empty(),
        att: 0.0,
        joint: 0.0,
        state: root,
    }];
    let mut ended = Vec::new();

    while !live.is_empty() {
        let mut ext = Vec::new();
        for h in &live {
            ctx.calls.bump(Decoder::Att);
            let dist = model.posterior(&h.prefix)?;
            let candidates = if h.prefix.len() >= ctx.max_len {
                vec![eos]
            } else {
                top_k(dist.as_slice(), ctx.k_pre)
            };
            for c in candidates {
                let att = h.att + dist.as_slice()[c];
                if c == eos {
                    let mut scores = ctx.complete(&h.state, &h.prefix)?;
                    scores.att = ctx.weighted(Decoder::Att, att);
                    let joint = ctx.joint(&scores, h.prefix.len())?;
                    ended.push(Hypothesis {
                        tokens: h.prefix.clone(),
                        joint,
                        scores,
                    });
                } else {
                    let state = ctx.extend(&h.state, &h.prefix, c)?;
                    let mut scores = state.scores();
                    scores.att = ctx.weighted(Decoder::Att, att);
                    let joint = ctx.joint(&scores, h.prefix.len() + 1)?;
                    if joint > LogProb::NEG_INFINITY {
                        ext.push(Live {
                            prefix: h.prefix.extended(c),
                            att,
                            joint,
                            state,
                        });
                    }
                }
            }
        }
        ext.sort_by(|a, b| rank(a.joint, &a.prefix, b.joint, &b.prefix));
        ext.truncate(ctx.k_beam);
        live = ext;

        // Prefix scores never increase along an extension, so a live
        // hypothesis bounds all of its completions. Once the n-best ended
        // hypotheses beat every bound the result is settled.
        if ended.len() >= cfg.n_best {
            let mut joints: Vec<LogProb> = ended.iter().map(|h| h.joint).collect();
            joints.sort_by(|a, b| b.total_cmp(a));
            let nth = joints[cfg.n_best - 1];
            let bound = live
                .iter()
                .map(|h| ctx.completion_bound(h.joint, h.prefix.len()))
                .fold(LogProb::NEG_INFINITY, LogProb::max);
            if nth > bound {
                break;
            }
        }
    }

    Ok(SearchOutput {
        nbest: NBestList::from_complete(ended, cfg.n_best),
        calls: ctx.calls,
    })
}
