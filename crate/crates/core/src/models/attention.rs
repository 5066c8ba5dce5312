use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::vocab::TokenId;

use super::{check_row, hash, LogDist};

/// Minimum eos probability required of every attention table row.
pub const DEFAULT_EOS_FLOOR: f64 = 0.01;

/// Autoregressive label distribution `P(y_s | y_{1:s-1})` over `V ∪ {eos}`.
///
/// The acoustic context is folded into the model: one model describes one
/// utterance.
#[derive(Debug, Clone, PartialEq)]
pub enum AttentionModel {
    Table(AttentionTable),
    Hash(HashAttention),
}

/// First-order table keyed by `(prefix length, last token)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTable {
    vocab_size: usize,
    max_len: usize,
    eos_floor: f64,
    rows: BTreeMap<(usize, Option<TokenId>), (Vec<f64>, LogDist)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashAttention {
    pub vocab_size: usize,
    pub seed: u64,
    pub concentration: f64,
}

impl AttentionTable {
    pub fn new(
        vocab_size: usize,
        max_len: usize,
        eos_floor: f64,
        rows: BTreeMap<(usize, Option<TokenId>), Vec<f64>>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&eos_floor) {
            return Err(Error::model(
                "attention.eos_floor",
                format!("{eos_floor} not in [0, 1)"),
            ));
        }
        for s in 0..=max_len {
            let lasts: Vec<Option<TokenId>> = if s == 0 {
                vec![None]
            } else {
                (0..vocab_size).map(Some).collect()
            };
            for last in lasts {
                if !rows.contains_key(&(s, last)) {
                    return Err(Error::model(
                        "attention.rows",
                        format!("missing row s={s} last={last:?}"),
                    ));
                }
            }
        }
        for (&(s, last), row) in &rows {
            let loc = format!("attention row s={s} last={last:?}");
            check_row(&loc, row, vocab_size + 1)?;
            let ok =
                s <= max_len && (s == 0) == last.is_none() && last.is_none_or(|l| l < vocab_size);
            if !ok {
                return Err(Error::model(loc, "row is outside the table"));
            }
            let eos = row[vocab_size];
            if eos <= 0.0 || eos < eos_floor {
                return Err(Error::model(
                    loc,
                    format!("eos probability {eos} is below the floor {eos_floor}"),
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
        Ok(AttentionTable {
            vocab_size,
            max_len,
            eos_floor,
            rows,
        })
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn eos_floor(&self) -> f64 {
        self.eos_floor
    }

    pub fn rows(&self) -> impl Iterator<Item = ((usize, Option<TokenId>), &[f64])> {
        self.rows.iter().map(|(k, (lin, _))| (*k, lin.as_slice()))
    }

    pub fn log_rows(&self) -> impl Iterator<Item = &LogDist> {
        self.rows.values().map(|(_, log)| log)
    }
}

impl AttentionModel {
    pub fn vocab_size(&self) -> usize {
        match self {
            AttentionModel::Table(m) => m.vocab_size,
            AttentionModel::Hash(m) => m.vocab_size,
        }
    }

    pub fn context_bound(&self) -> Option<usize> {
        match self {
            AttentionModel::Table(m) => Some(m.max_len),
            AttentionModel::Hash(_) => None,
        }
    }

    /// Next-label distribution after `prefix`; eos is the last entry.
    pub fn posterior(&self, prefix: &[TokenId]) -> Result<Cow<'_, LogDist>> {
        match self {
            AttentionModel::Table(m) => {
                if prefix.len() > m.max_len {
                    return Err(Error::usage(format!(
                        "prefix length {} exceeds attention table bound {}",
                        prefix.len(),
                        m.max_len
                    )));
                }
                let key = (prefix.len(), prefix.last().copied());
                m.rows
                    .get(&key)
                    .map(|(_, log)| Cow::Borrowed(log))
                    .ok_or_else(|| Error::usage(format!("no attention row for {key:?}")))
            }
            AttentionModel::Hash(m) => Ok(Cow::Owned(hash::attention_row(
                m.seed,
                prefix,
                m.vocab_size,
                m.concentration,
            ))),
        }
    }
}
