//! CTC prefix scoring over (ends-in-token, ends-in-blank) forward states.

use crate::error::{Error, Result};
use crate::logprob::{log_add, log_sum_exp, LogProb, LOG_ONE, LOG_ZERO};
use crate::models::CtcGrid;
use crate::vocab::TokenSeq;

use super::{check_prefix, Next, ScoreResult};

/// Forward probabilities of the cached prefix `l` after each frame:
/// `nonblank[t]` for alignments of frames `0..=t` collapsing to `l` and
/// ending in `last(l)`, `blank[t]` for those ending in blank.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcPrefixCache {
    prefix: TokenSeq,
    nonblank: Vec<LogProb>,
    blank: Vec<LogProb>,
}

impl CtcPrefixCache {
    pub fn prefix(&self) -> &TokenSeq {
        &self.prefix
    }

    pub fn nonblank(&self) -> &[LogProb] {
        &self.nonblank
    }

    pub fn blank(&self) -> &[LogProb] {
        &self.blank
    }

    /// `log P(Y = prefix)` over all frames.
    pub fn complete(&self) -> LogProb {
        let last = self.blank.len() - 1;
        log_add(self.nonblank[last], self.blank[last])
    }
}

/// Cache for the empty prefix: cumulative blank mass, no token mass.
pub fn ctc_prefix_init(grid: &CtcGrid) -> CtcPrefixCache {
    let mut blank = Vec::with_capacity(grid.frames());
    let mut acc = LOG_ONE;
    for t in 0..grid.frames() {
        acc += grid.row(t).reserved();
        blank.push(acc);
    }
    CtcPrefixCache {
        prefix: TokenSeq::empty(),
        nonblank: vec![LOG_ZERO; grid.frames()],
        blank,
    }
}

/// Prefix score of `prefix·next`.
///
/// For a token, the score is the log probability that the collapsed output
/// starts with `prefix·next`. Extending by the prefix's own last token only
/// draws on blank-ending mass. For eos, the score is `log P(Y = prefix)`.
pub fn ctc_prefix_score(
    grid: &CtcGrid,
    prefix: &TokenSeq,
    next: Next,
    cache: &CtcPrefixCache,
) -> Result<ScoreResult<CtcPrefixCache>> {
    check_prefix(&cache.prefix, prefix)?;
    if cache.blank.len() != grid.frames() {
        return Err(Error::usage("cache was built for a different grid"));
    }
    let c = match next {
        Next::Eos => {
            return Ok(ScoreResult {
                alpha: cache.complete(),
                cache: None,
            })
        }
        Next::Token(c) if c < grid.vocab_size() => c,
        Next::Token(c) => return Err(Error::usage(format!("token {c} outside vocabulary"))),
    };
    let frames = grid.frames();
    let repeat = prefix.last() == Some(c);
    let mut nonblank = vec![LOG_ZERO; frames];
    let mut blank = vec![LOG_ZERO; frames];

    let first = grid.row(0);
    nonblank[0] = if prefix.is_empty() {
        first.token(c)
    } else {
        LOG_ZERO
    };
    let mut psi = nonblank[0];

    for t in 1..frames {
        let row = grid.row(t);
        let enter = if repeat {
            cache.blank[t - 1]
        } else {
            log_add(cache.nonblank[t - 1], cache.blank[t - 1])
        };
        nonblank[t] = log_add(nonblank[t - 1], enter) + row.token(c);
        blank[t] = log_add(nonblank[t - 1], blank[t - 1]) + row.reserved();
        psi = log_add(psi, enter + row.token(c));
    }

    Ok(ScoreResult {
        alpha: psi,
        cache: Some(CtcPrefixCache {
            prefix: prefix.extended(c),
            nonblank,
            blank,
        }),
    })
}

/// Rebuilds the cache and prefix score of `prefix` from scratch with the
/// standard blank-interleaved label lattice.
pub fn ctc_prefix_batch(grid: &CtcGrid, prefix: &TokenSeq) -> Result<(LogProb, CtcPrefixCache)> {
    if let Some(&bad) = prefix.iter().find(|&&t| t >= grid.vocab_size()) {
        return Err(Error::usage(format!("token {bad} outside vocabulary")));
    }
    let s = prefix.len();
    let n_states = 2 * s + 1;
    // state 2k is a blank, state 2k+1 is prefix[k]
    let emit = |t: usize, state: usize| -> LogProb {
        let row = grid.row(t);
        if state.is_multiple_of(2) {
            row.reserved()
        } else {
            row.token(prefix[state / 2])
        }
    };
    let can_skip =
        |state: usize| state % 2 == 1 && state >= 3 && prefix[state / 2] != prefix[state / 2 - 1];

    let frames = grid.frames();
    let mut alpha = vec![vec![LOG_ZERO; n_states]; frames];
    alpha[0][0] = emit(0, 0);
    if n_states > 1 {
        alpha[0][1] = emit(0, 1);
    }
    // mass entering the final token state for the first time at each frame
    let mut psi_terms = Vec::with_capacity(frames);
    if s == 1 {
        psi_terms.push(alpha[0][1]);
    }
    for t in 1..frames {
        for st in 0..n_states {
            let mut acc = alpha[t - 1][st];
            if st >= 1 {
                acc = log_add(acc, alpha[t - 1][st - 1]);
            }
            if can_skip(st) {
                acc = log_add(acc, alpha[t - 1][st - 2]);
            }
            alpha[t][st] = acc + emit(t, st);
        }
        if s >= 1 {
            let last = 2 * s - 1;
            let mut enter = alpha[t - 1][last - 1];
            if can_skip(last) {
                enter = log_add(enter, alpha[t - 1][last - 2]);
            }
            psi_terms.push(enter + emit(t, last));
        }
    }

    let blank: Vec<LogProb> = alpha.iter().map(|a| a[2 * s]).collect();
    let nonblank: Vec<LogProb> = if s == 0 {
        vec![LOG_ZERO; frames]
    } else {
        alpha.iter().map(|a| a[2 * s - 1]).collect()
    };
    let psi = if s == 0 {
        LOG_ONE
    } else if psi_terms.is_empty() {
        LOG_ZERO
    } else {
        log_sum_exp(&psi_terms)?
    };
    Ok((
        psi,
        CtcPrefixCache {
            prefix: prefix.clone(),
            nonblank,
            blank,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score_seq(grid: &CtcGrid, seq: &[usize]) -> (LogProb, CtcPrefixCache) {
        let mut cache = ctc_prefix_init(grid);
        let mut prefix = TokenSeq::empty();
        let mut alpha = LOG_ONE;
        for &c in seq {
            let r = ctc_prefix_score(grid, &prefix, Next::Token(c), &cache).unwrap();
            alpha = r.alpha;
            cache = r.cache.unwrap();
            prefix = prefix.extended(c);
        }
        (alpha, cache)
    }

    #[test]
    fn init_on_uniform_grid() {
        let g = CtcGrid::uniform(2, 1).unwrap();
        let c = ctc_prefix_init(&g);
        assert_eq!(c.blank(), &[0.5f64.ln(), 0.5f64.ln() + 0.5f64.ln()]);
        assert!((c.blank()[1] - 0.25f64.ln()).abs() < 1e-15);
        assert_eq!(c.nonblank(), &[LOG_ZERO, LOG_ZERO]);
    }

    #[test]
    fn init_all_blank_and_single_frame() {
        let g = CtcGrid::from_linear(vec![vec![0.0, 1.0]; 3], 1).unwrap();
        assert_eq!(ctc_prefix_init(&g).blank(), &[0.0, 0.0, 0.0]);
        let g1 = CtcGrid::uniform(1, 2).unwrap();
        let c = ctc_prefix_init(&g1);
        assert_eq!((c.blank().len(), c.nonblank().len()), (1, 1));
    }

    #[test]
    fn uniform_t2_single_token() {
        let g = CtcGrid::uniform(2, 1).unwrap();
        let (_, cache) = score_seq(&g, &[0]);
        let p = ctc_prefix_score(&g, cache.prefix(), Next::Eos, &cache)
            .unwrap()
            .alpha;
        assert!((p - 0.75f64.ln()).abs() < 1e-12);

        let (alpha_aa, cache_aa) = score_seq(&g, &[0, 0]);
        assert_eq!(alpha_aa, LOG_ZERO);
        let p = ctc_prefix_score(&g, cache_aa.prefix(), Next::Eos, &cache_aa)
            .unwrap()
            .alpha;
        assert_eq!(p, LOG_ZERO);
    }

    #[test]
    fn deterministic_grid() {
        // frame 0 emits a, frame 1 emits blank
        let g = CtcGrid::from_linear(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1).unwrap();
        let (_, c) = score_seq(&g, &[0]);
        assert_eq!(c.complete(), 0.0);
        assert_eq!(ctc_prefix_init(&g).complete(), LOG_ZERO);
        let (_, c) = score_seq(&g, &[0, 0]);
        assert_eq!(c.complete(), LOG_ZERO);
    }

    #[test]
    fn cache_mismatch_is_usage_error() {
        let g = CtcGrid::uniform(3, 2).unwrap();
        let cache = ctc_prefix_init(&g);
        let wrong = TokenSeq::from(vec![1]);
        assert!(matches!(
            ctc_prefix_score(&g, &wrong, Next::Token(0), &cache),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn batch_matches_incremental_on_hash_grid() {
        let g = CtcGrid::from_hash(9, 6, 3, 3.0).unwrap();
        for seq in [vec![], vec![2], vec![0, 0], vec![1, 2, 1], vec![2, 2, 2]] {
            let (a, c) = score_seq(&g, &seq);
            let (b, d) = ctc_prefix_batch(&g, &TokenSeq::from(seq.clone())).unwrap();
            assert!((a - b).abs() < 1e-12 || a == b, "{seq:?}: {a} vs {b}");
            for (x, y) in c.blank().iter().zip(d.blank()) {
                assert!((x - y).abs() < 1e-12 || x == y);
            }
        }
    }
}
