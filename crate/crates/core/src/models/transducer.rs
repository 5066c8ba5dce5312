use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::vocab::TokenId;

use super::{check_row, hash, LogDist};

/// Transducer output distribution `P(z | h_t, y_{1:s-1})` over `V ∪ {blank}`.
#[derive(Debug, Clone, PartialEq)]
pub enum TransducerModel {
    Table(TransducerTable),
    Hash(HashTransducer),
}

type RowKey = (usize, usize, Option<TokenId>);

/// First-order table keyed by `(frame, prefix length, last token)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransducerTable {
    vocab_size: usize,
    frames: usize,
    max_len: usize,
    rows: BTreeMap<RowKey, (Vec<f64>, LogDist)>,
}

/// Seeded model conditioned on the frame and the full prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct HashTransducer {
    pub vocab_size: usize,
    pub frames: usize,
    pub seed: u64,
    pub concentration: f64,
}

impl TransducerTable {
    /// `rows` maps `(0-based frame, prefix length, last token)` to a linear
    /// row. Every context reachable with prefixes up to `max_len` must be
    /// present.
    pub fn new(
        vocab_size: usize,
        frames: usize,
        max_len: usize,
        rows: BTreeMap<(usize, usize, Option<TokenId>), Vec<f64>>,
    ) -> Result<Self> {
        if frames == 0 {
            return Err(Error::model("transducer.frames", "must be at least 1"));
        }
        for t in 0..frames {
            for s in 0..=max_len {
                let lasts: Vec<Option<TokenId>> = if s == 0 {
                    vec![None]
                } else {
                    (0..vocab_size).map(Some).collect()
                };
                for last in lasts {
                    if !rows.contains_key(&(t, s, last)) {
                        return Err(Error::model(
                            "transducer.rows",
                            format!("missing row t={} s={s} last={last:?}", t + 1),
                        ));
                    }
                }
            }
        }
        for (&(t, s, last), row) in &rows {
            check_row(
                &format!("transducer row t={} s={s} last={last:?}", t + 1),
                row,
                vocab_size + 1,
            )?;
            let ok = t < frames
                && s <= max_len
                && (s == 0) == last.is_none()
                && last.is_none_or(|l| l < vocab_size);
            if !ok {
                return Err(Error::model(
                    "transducer.rows",
                    format!("row t={} s={s} last={last:?} is outside the table", t + 1),
                ));
            }
        }
        let rows = rows
            .into_iter()
            .map(|(k, lin)| {
                let log = LogDist::from_linear(&lin);
                (k, (lin, log))
            })
            .collect();
        Ok(TransducerTable {
            vocab_size,
            frames,
            max_len,
            rows,
        })
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn rows(&self) -> impl Iterator<Item = ((usize, usize, Option<TokenId>), &[f64])> {
        self.rows.iter().map(|(k, (lin, _))| (*k, lin.as_slice()))
    }

    pub fn log_rows(&self) -> impl Iterator<Item = &LogDist> {
        self.rows.values().map(|(_, log)| log)
    }
}

impl TransducerModel {
    pub fn frames(&self) -> usize {
        match self {
            TransducerModel::Table(m) => m.frames,
            TransducerModel::Hash(m) => m.frames,
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            TransducerModel::Table(m) => m.vocab_size,
            TransducerModel::Hash(m) => m.vocab_size,
        }
    }

    /// Longest prefix the model can condition on, if bounded.
    pub fn context_bound(&self) -> Option<usize> {
        match self {
            TransducerModel::Table(m) => Some(m.max_len),
            TransducerModel::Hash(_) => None,
        }
    }

    /// Distribution at 0-based `frame` after emitting `prefix`.
    pub fn posterior(&self, frame: usize, prefix: &[TokenId]) -> Result<Cow<'_, LogDist>> {
        if frame >= self.frames() {
            return Err(Error::usage(format!(
                "frame {frame} out of range for {} frames",
                self.frames()
            )));
        }
        match self {
            TransducerModel::Table(m) => {
                if prefix.len() > m.max_len {
                    return Err(Error::usage(format!(
                        "prefix length {} exceeds transducer table bound {}",
                        prefix.len(),
                        m.max_len
                    )));
                }
                let key = (frame, prefix.len(), prefix.last().copied());
                m.rows
                    .get(&key)
                    .map(|(_, log)| Cow::Borrowed(log))
                    .ok_or_else(|| Error::usage(format!("no transducer row for {key:?}")))
            }
            TransducerModel::Hash(m) => Ok(Cow::Owned(hash::transducer_row(
                m.seed,
                frame,
                prefix,
                m.vocab_size,
                m.concentration,
            ))),
        }
    }
}
