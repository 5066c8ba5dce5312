//! Brute-force references for small instances.
//!
//! Everything here enumerates alignments or output sequences explicitly and
//! multiplies probabilities in the linear domain, so it shares no numerics
//! with the log-domain scorers. Instance-size guards are hard errors.

use std::collections::BTreeMap;

use crate::alignment::{ctc_collapse, rnnt_collapse, Symbol};
use crate::error::{Error, Result};
use crate::logprob::{ln, LogProb};
use crate::models::{AttentionModel, CtcGrid, Models, TransducerModel};
use crate::vocab::{all_sequences, TokenSeq};
use crate::weights::{joint_score, Decoder, DecoderWeights, Scores};

/// Limit on `(|V| + 1)^T` CTC alignments.
pub const CTC_GUARD: u128 = 10_000_000;
/// Limit on `C(T + S, S)` transducer lattice paths per sequence.
pub const RNNT_GUARD: u128 = 1_000_000;
/// Limit on the number of candidate output sequences.
pub const SEQUENCE_GUARD: u128 = 100_000;

fn ctc_alignment_count(grid: &CtcGrid) -> Result<u128> {
    let base = (grid.vocab_size() + 1) as u128;
    let mut n: u128 = 1;
    for _ in 0..grid.frames() {
        n = n.saturating_mul(base);
        if n > CTC_GUARD {
            return Err(Error::Guard {
                what: "ctc alignment enumeration",
                size: n,
                limit: CTC_GUARD,
            });
        }
    }
    Ok(n)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of output sequences of length `0..=max_len`.
pub fn sequence_count(vocab_size: usize, max_len: usize) -> u128 {
    let mut total: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..=max_len {
        total = total.saturating_add(layer);
        layer = layer.saturating_mul(vocab_size as u128);
    }
    total
}

fn check_sequence_guard(vocab_size: usize, max_len: usize) -> Result<()> {
    let n = sequence_count(vocab_size, max_len);
    if n > SEQUENCE_GUARD {
        return Err(Error::Guard {
            what: "output sequence enumeration",
            size: n,
            limit: SEQUENCE_GUARD,
        });
    }
    Ok(())
}

/// Calls `visit` with every alignment in `(V ∪ {blank})^T` and its linear
/// probability.
fn for_each_ctc_alignment(grid: &CtcGrid, mut visit: impl FnMut(&[Symbol], f64)) -> Result<()> {
    ctc_alignment_count(grid)?;
    let frames = grid.frames();
    let v = grid.vocab_size();
    let rows = grid.linear_rows();
    let symbol = |i: usize| {
        if i == v {
            Symbol::Blank
        } else {
            Symbol::Token(i)
        }
    };
    let mut digits = vec![0usize; frames];
    let mut labels: Vec<Symbol> = vec![symbol(0); frames];
    loop {
        let mut p = 1.0;
        for (t, &d) in digits.iter().enumerate() {
            p *= rows[t][d];
            labels[t] = symbol(d);
        }
        visit(&labels, p);
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == frames {
                return Ok(());
            }
            digits[pos] += 1;
            if digits[pos] <= v {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// `P_ctc(Y)`: sum over every frame alignment collapsing to `y`.
pub fn brute_force_ctc(grid: &CtcGrid, y: &TokenSeq) -> Result<f64> {
    let mut total = 0.0;
    for_each_ctc_alignment(grid, |z, p| {
        if ctc_collapse(z) == *y {
            total += p;
        }
    })?;
    Ok(total)
}

/// `P_ctc(Y)` for every `Y` with nonzero mass, from one enumeration pass.
pub fn brute_force_ctc_distribution(grid: &CtcGrid) -> Result<BTreeMap<TokenSeq, f64>> {
    let mut dist = BTreeMap::new();
    for_each_ctc_alignment(grid, |z, p| {
        *dist.entry(ctc_collapse(z)).or_insert(0.0) += p;
    })?;
    Ok(dist)
}

/// `P_rnnt(Y)`: sum over every lattice path from `(0, 0)` emitting `y` and
/// ending with the blank of the last frame.
pub fn brute_force_rnnt(model: &TransducerModel, y: &TokenSeq, frames: usize) -> Result<f64> {
    if frames == 0 || frames != model.frames() {
        return Err(Error::usage(format!(
            "transducer has {} frames, asked for {frames}",
            model.frames()
        )));
    }
    let paths = binomial((frames + y.len()) as u128, y.len() as u128);
    if paths > RNNT_GUARD {
        return Err(Error::Guard {
            what: "transducer path enumeration",
            size: paths,
            limit: RNNT_GUARD,
        });
    }
    let mut path = Vec::with_capacity(frames + y.len());
    let mut total = 0.0;
    enumerate_rnnt(model, y, frames, 0, 0, 1.0, &mut path, &mut total)?;
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rnnt(
    model: &TransducerModel,
    y: &TokenSeq,
    frames: usize,
    t: usize,
    s: usize,
    p: f64,
    path: &mut Vec<Symbol>,
    total: &mut f64,
) -> Result<()> {
    if t == frames {
        if s == y.len() {
            debug_assert_eq!(rnnt_collapse(path), *y);
            *total += p;
        }
        return Ok(());
    }
    let dist = model.posterior(t, &y[..s])?;
    if s < y.len() {
        path.push(Symbol::Token(y[s]));
        enumerate_rnnt(
            model,
            y,
            frames,
            t,
            s + 1,
            p * dist.token(y[s]).exp(),
            path,
            total,
        )?;
        path.pop();
    }
    path.push(Symbol::Blank);
    enumerate_rnnt(
        model,
        y,
        frames,
        t + 1,
        s,
        p * dist.reserved().exp(),
        path,
        total,
    )?;
    path.pop();
    Ok(())
}

/// Cumulative `Σ_{|Y| ≤ S} P_rnnt(Y)` for `S = 0..=max_len`.
pub fn rnnt_partial_sums(
    model: &TransducerModel,
    frames: usize,
    max_len: usize,
) -> Result<Vec<f64>> {
    check_sequence_guard(model.vocab_size(), max_len)?;
    let mut by_len = vec![0.0; max_len + 1];
    for y in all_sequences(model.vocab_size(), max_len) {
        by_len[y.len()] += brute_force_rnnt(model, &y, frames)?;
    }
    let mut acc = 0.0;
    Ok(by_len
        .into_iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect())
}

/// `P_att(Y)` including the final eos step.
pub fn brute_force_attention(model: &AttentionModel, y: &TokenSeq) -> Result<f64> {
    let mut p = 1.0;
    for s in 0..y.len() {
        p *= model.posterior(&y[..s])?.token(y[s]).exp();
    }
    p *= model.posterior(y)?.reserved().exp();
    Ok(p)
}

/// Complete-sequence scores of one candidate output.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEntry {
    pub tokens: TokenSeq,
    pub scores: Scores,
}

/// Oracle scores of every sequence up to `max_len` for the requested
/// decoders.
pub fn oracle_table(
    models: &Models,
    decoders: &[Decoder],
    max_len: usize,
) -> Result<Vec<OracleEntry>> {
    let v = models.vocab.len();
    check_sequence_guard(v, max_len)?;
    let missing = |d: Decoder| Error::usage(format!("oracle needs the {d:?} model"));

    let ctc_dist = if decoders.contains(&Decoder::Ctc) {
        let grid = models.ctc.as_ref().ok_or_else(|| missing(Decoder::Ctc))?;
        Some(brute_force_ctc_distribution(grid)?)
    } else {
        None
    };
    let transducer = if decoders.contains(&Decoder::Rnnt) {
        Some(
            models
                .transducer
                .as_ref()
                .ok_or_else(|| missing(Decoder::Rnnt))?,
        )
    } else {
        None
    };
    let attention = if decoders.contains(&Decoder::Att) {
        Some(
            models
                .attention
                .as_ref()
                .ok_or_else(|| missing(Decoder::Att))?,
        )
    } else {
        None
    };

    all_sequences(v, max_len)
        .into_iter()
        .map(|y| {
            let mut scores = Scores::default();
            if let Some(dist) = &ctc_dist {
                scores.ctc = Some(ln(dist.get(&y).copied().unwrap_or(0.0)));
            }
            if let Some(m) = transducer {
                scores.rnnt = Some(ln(brute_force_rnnt(m, &y, m.frames())?));
            }
            if let Some(m) = attention {
                scores.att = Some(ln(brute_force_attention(m, &y)?));
            }
            Ok(OracleEntry { tokens: y, scores })
        })
        .collect()
}

/// Argmax of the joint score over a precomputed table; ties go to the
/// lexicographically smaller sequence.
pub fn best_in_table(
    table: &[OracleEntry],
    weights: &DecoderWeights,
) -> Result<(TokenSeq, LogProb)> {
    let mut best: Option<(&TokenSeq, LogProb)> = None;
    for e in table {
        let j = joint_score(&e.scores, weights, e.tokens.len())?;
        let better = match best {
            None => true,
            Some((bt, bj)) => j > bj || (j == bj && e.tokens < *bt),
        };
        if better {
            best = Some((&e.tokens, j));
        }
    }
    best.map(|(t, j)| (t.clone(), j))
        .ok_or_else(|| Error::usage("empty oracle table"))
}

/// The sequence of length at most `max_len` maximizing the joint score,
/// found by exhaustive enumeration.
pub fn brute_force_best_joint(
    models: &Models,
    weights: &DecoderWeights,
    max_len: usize,
) -> Result<(TokenSeq, LogProb)> {
    // All-zero decoder weights are allowed here: the joint reduces to the
    // length penalty alone.
    let all_zero = Decoder::ALL.iter().all(|d| weights.of(*d) == 0.0);
    if !all_zero || !weights.beta.is_finite() {
        weights.validate()?;
    }
    let decoders: Vec<Decoder> = Decoder::ALL
        .into_iter()
        .filter(|d| weights.uses(*d))
        .collect();
    let table = oracle_table(models, &decoders, max_len)?;
    best_in_table(&table, weights)
}
