//! Random table models for tests and benchmarks.
//!
//! Rows are drawn from a seeded ChaCha generator, so a seed pins the whole
//! bundle. Probabilities are bounded away from zero, which keeps every
//! hypothesis reachable and every search comparison meaningful.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::models::{
    AttentionModel, AttentionTable, CtcGrid, Models, TransducerModel, TransducerTable,
};
use crate::vocab::{TokenSeq, Vocabulary};

/// A probability row of length `len` with entries in roughly `[0.05, 1]`
/// before normalization. `peak` sharpens the row by raising weights to that
/// power.
pub fn random_row<R: Rng + ?Sized>(rng: &mut R, len: usize, peak: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..len)
        .map(|_| rng.gen_range(0.05..1.0f64).powf(peak))
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn random_grid<R: Rng + ?Sized>(
    rng: &mut R,
    frames: usize,
    vocab_size: usize,
) -> Result<CtcGrid> {
    let rows = (0..frames)
        .map(|_| random_row(rng, vocab_size + 1, 1.0))
        .collect();
    CtcGrid::from_linear(rows, vocab_size)
}

pub fn random_transducer<R: Rng + ?Sized>(
    rng: &mut R,
    frames: usize,
    vocab_size: usize,
    max_len: usize,
) -> Result<TransducerTable> {
    let mut rows = BTreeMap::new();
    for t in 0..frames {
        for s in 0..=max_len {
            let lasts: Vec<Option<usize>> = if s == 0 {
                vec![None]
            } else {
                (0..vocab_size).map(Some).collect()
            };
            for last in lasts {
                rows.insert((t, s, last), random_row(rng, vocab_size + 1, 1.0));
            }
        }
    }
    TransducerTable::new(vocab_size, frames, max_len, rows)
}

/// Attention table with eos mass of at least `eos_floor` in every row.
pub fn random_attention<R: Rng + ?Sized>(
    rng: &mut R,
    vocab_size: usize,
    max_len: usize,
    eos_floor: f64,
) -> Result<AttentionTable> {
    let mut rows = BTreeMap::new();
    for s in 0..=max_len {
        let lasts: Vec<Option<usize>> = if s == 0 {
            vec![None]
        } else {
            (0..vocab_size).map(Some).collect()
        };
        for last in lasts {
            let mut row: Vec<f64> = random_row(rng, vocab_size + 1, 1.0)
                .into_iter()
                .map(|p| p * (1.0 - eos_floor))
                .collect();
            row[vocab_size] += eos_floor;
            rows.insert((s, last), row);
        }
    }
    AttentionTable::new(vocab_size, max_len, eos_floor, rows)
}

/// Bundle of three random tables sharing a vocabulary and frame count.
/// Transducer and attention contexts cover prefixes up to `max_len`.
pub fn random_models(
    seed: u64,
    frames: usize,
    vocab_size: usize,
    max_len: usize,
) -> Result<Models> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = random_grid(&mut rng, frames, vocab_size)?;
    let transducer = random_transducer(&mut rng, frames, vocab_size, max_len)?;
    let attention = random_attention(&mut rng, vocab_size, max_len, 0.01)?;
    let models = Models::new(Vocabulary::alphabetic(vocab_size))
        .with_ctc(grid)
        .with_transducer(TransducerModel::Table(transducer))
        .with_attention(AttentionModel::Table(attention));
    models.validate()?;
    Ok(models)
}

/// Row favouring `target` with probability in `[0.5, 0.9)`, the rest spread
/// at random.
fn peaked_row<R: Rng + ?Sized>(rng: &mut R, len: usize, target: usize) -> Vec<f64> {
    let p = rng.gen_range(0.5..0.9);
    let mut row: Vec<f64> = random_row(rng, len, 1.0)
        .into_iter()
        .map(|x| x * (1.0 - p))
        .collect();
    row[target] += p;
    row
}

/// Three table models that agree on a hidden reference transcript, the way
/// trained decoders on one utterance would.
///
/// The reference has `len` tokens spread evenly over `frames`; token `k` is
/// due at frame `(k + 1/2)·frames/len`. The CTC grid peaks on that token at
/// its frame and on blank elsewhere, the transducer peaks on the next due
/// token once its frame is reached and on blank otherwise, and the attention
/// decoder peaks on the next reference token and then on eos. Contexts cover
/// prefixes up to `frames` tokens.
pub fn aligned_models(
    seed: u64,
    frames: usize,
    vocab_size: usize,
    len: usize,
) -> Result<(Models, TokenSeq)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = len.min(frames);
    let reference: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab_size)).collect();
    let due: Vec<usize> = (0..len).map(|k| (2 * k + 1) * frames / (2 * len)).collect();
    let blank = vocab_size;
    let max_len = frames;

    let grid_rows = (0..frames)
        .map(|t| {
            let target = due
                .iter()
                .position(|&f| f == t)
                .map_or(blank, |k| reference[k]);
            peaked_row(&mut rng, vocab_size + 1, target)
        })
        .collect();
    let grid = CtcGrid::from_linear(grid_rows, vocab_size)?;

    let contexts = |s: usize| -> Vec<Option<usize>> {
        if s == 0 {
            vec![None]
        } else {
            (0..vocab_size).map(Some).collect()
        }
    };
    let mut rnnt_rows = BTreeMap::new();
    for t in 0..frames {
        for s in 0..=max_len {
            for last in contexts(s) {
                let target = if s < len && t >= due[s] {
                    reference[s]
                } else {
                    blank
                };
                rnnt_rows.insert((t, s, last), peaked_row(&mut rng, vocab_size + 1, target));
            }
        }
    }
    let transducer = TransducerTable::new(vocab_size, frames, max_len, rnnt_rows)?;

    let floor = 0.01;
    let mut att_rows = BTreeMap::new();
    for s in 0..=max_len {
        for last in contexts(s) {
            let target = reference.get(s).copied().unwrap_or(vocab_size);
            let mut row: Vec<f64> = peaked_row(&mut rng, vocab_size + 1, target)
                .into_iter()
                .map(|p| p * (1.0 - floor))
                .collect();
            row[vocab_size] += floor;
            att_rows.insert((s, last), row);
        }
    }
    let attention = AttentionTable::new(vocab_size, max_len, floor, att_rows)?;

    let models = Models::new(Vocabulary::alphabetic(vocab_size))
        .with_ctc(grid)
        .with_transducer(TransducerModel::Table(transducer))
        .with_attention(AttentionModel::Table(attention));
    models.validate()?;
    Ok((models, TokenSeq::from(reference)))
}
