//! Model bundle: one JSON document holding a vocabulary and any subset of
//! the three posterior providers.
//!
//! ```json
//! {
//!   "vocab": {"tokens": ["a"], "blank": "<blk>", "eos": "<eos>"},
//!   "ctc_grid": [[0.5, 0.5], [0.5, 0.5]],
//!   "transducer": {"kind": "table", "frames": 1, "max_len": 1,
//!                  "rows": [{"t": 1, "s": 0, "last": null, "probs": [0.6, 0.4]}, ...]},
//!   "attention": {"kind": "hash", "seed": 7, "concentration": 4.0}
//! }
//! ```
//!
//! Probabilities are linear. Grid rows are time-first; each row lists the
//! regular tokens in vocabulary order followed by the reserved symbol
//! (blank, or eos for attention rows). `t` is 1-based.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary};

use super::{
    check_row, AttentionModel, AttentionTable, CtcGrid, HashAttention, HashTransducer,
    TransducerModel, TransducerTable, DEFAULT_EOS_FLOOR,
};

/// A vocabulary plus whichever posterior providers are available.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub vocab: Vocabulary,
    pub ctc: Option<CtcGrid>,
    pub transducer: Option<TransducerModel>,
    pub attention: Option<AttentionModel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    vocab: Vocabulary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ctc_grid: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transducer: Option<TransducerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attention: Option<AttentionFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TransducerFile {
    Table {
        frames: usize,
        max_len: usize,
        rows: Vec<TransducerRowFile>,
    },
    Hash {
        frames: usize,
        seed: u64,
        concentration: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransducerRowFile {
    t: usize,
    s: usize,
    last: Option<String>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum AttentionFile {
    Table {
        max_len: usize,
        #[serde(default = "default_eos_floor")]
        eos_floor: f64,
        rows: Vec<AttentionRowFile>,
    },
    Hash {
        seed: u64,
        concentration: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttentionRowFile {
    s: usize,
    last: Option<String>,
    probs: Vec<f64>,
}

fn default_eos_floor() -> f64 {
    DEFAULT_EOS_FLOOR
}

fn resolve_last(vocab: &Vocabulary, loc: &str, last: Option<&str>) -> Result<Option<TokenId>> {
    match last {
        None => Ok(None),
        Some(label) => vocab
            .id_of(label)
            .map(Some)
            .ok_or_else(|| Error::model(loc, format!("unknown token {label:?}"))),
    }
}

fn check_concentration(loc: &str, c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::model(
            loc,
            format!("concentration {c} must be positive"),
        ))
    }
}

impl Models {
    pub fn new(vocab: Vocabulary) -> Self {
        Models {
            vocab,
            ctc: None,
            transducer: None,
            attention: None,
        }
    }

    pub fn with_ctc(mut self, grid: CtcGrid) -> Self {
        self.ctc = Some(grid);
        self
    }

    pub fn with_transducer(mut self, m: TransducerModel) -> Self {
        self.transducer = Some(m);
        self
    }

    pub fn with_attention(mut self, m: AttentionModel) -> Self {
        self.attention = Some(m);
        self
    }

    /// All-hash bundle: grid, transducer and attention from one seed.
    pub fn from_seed(
        seed: u64,
        frames: usize,
        vocab_size: usize,
        concentration: f64,
    ) -> Result<Self> {
        if vocab_size == 0 || frames == 0 {
            return Err(Error::usage(
                "seeded models need at least one token and one frame",
            ));
        }
        let models = Models::new(Vocabulary::alphabetic(vocab_size))
            .with_ctc(CtcGrid::from_hash(seed, frames, vocab_size, concentration)?)
            .with_transducer(TransducerModel::Hash(HashTransducer {
                vocab_size,
                frames,
                seed: seed ^ 0x5151_5151,
                concentration,
            }))
            .with_attention(AttentionModel::Hash(HashAttention {
                vocab_size,
                seed: seed ^ 0xa7a7_a7a7,
                concentration,
            }));
        models.validate()?;
        Ok(models)
    }

    /// Frame count shared by the time-aligned models, if any is present.
    pub fn frames(&self) -> Option<usize> {
        self.ctc
            .as_ref()
            .map(CtcGrid::frames)
            .or_else(|| self.transducer.as_ref().map(TransducerModel::frames))
    }

    /// Checks cross-model consistency.
    pub fn validate(&self) -> Result<()> {
        let v = self.vocab.len();
        if let Some(g) = &self.ctc {
            if g.vocab_size() != v {
                return Err(Error::model(
                    "ctc_grid",
                    "row width does not match vocabulary",
                ));
            }
        }
        if let Some(m) = &self.transducer {
            if m.vocab_size() != v {
                return Err(Error::model("transducer", "vocabulary size mismatch"));
            }
            if let Some(g) = &self.ctc {
                if g.frames() != m.frames() {
                    return Err(Error::model(
                        "transducer.frames",
                        format!("{} frames but ctc_grid has {}", m.frames(), g.frames()),
                    ));
                }
            }
        }
        if let Some(m) = &self.attention {
            if m.vocab_size() != v {
                return Err(Error::model("attention", "vocabulary size mismatch"));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: BundleFile = serde_json::from_str(s)?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_file())?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()?).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }

    fn from_file(file: BundleFile) -> Result<Self> {
        let vocab = file.vocab;
        let v = vocab.len();

        let ctc = file
            .ctc_grid
            .map(|rows| CtcGrid::from_linear(rows, v))
            .transpose()?;

        let transducer = match file.transducer {
            None => None,
            Some(TransducerFile::Hash {
                frames,
                seed,
                concentration,
            }) => {
                check_concentration("transducer.concentration", concentration)?;
                if frames == 0 {
                    return Err(Error::model("transducer.frames", "must be at least 1"));
                }
                Some(TransducerModel::Hash(HashTransducer {
                    vocab_size: v,
                    frames,
                    seed,
                    concentration,
                }))
            }
            Some(TransducerFile::Table {
                frames,
                max_len,
                rows,
            }) => {
                let mut table = BTreeMap::new();
                for (i, row) in rows.into_iter().enumerate() {
                    let loc = format!("transducer.rows[{i}]");
                    check_row(&loc, &row.probs, v + 1)?;
                    if row.t == 0 || row.t > frames {
                        return Err(Error::model(
                            loc,
                            format!("t = {} not in 1..={frames}", row.t),
                        ));
                    }
                    let last = resolve_last(&vocab, &loc, row.last.as_deref())?;
                    if table.insert((row.t - 1, row.s, last), row.probs).is_some() {
                        return Err(Error::model(loc, "duplicate row"));
                    }
                }
                Some(TransducerModel::Table(TransducerTable::new(
                    v, frames, max_len, table,
                )?))
            }
        };

        let attention = match file.attention {
            None => None,
            Some(AttentionFile::Hash {
                seed,
                concentration,
            }) => {
                check_concentration("attention.concentration", concentration)?;
                Some(AttentionModel::Hash(HashAttention {
                    vocab_size: v,
                    seed,
                    concentration,
                }))
            }
            Some(AttentionFile::Table {
                max_len,
                eos_floor,
                rows,
            }) => {
                let mut table = BTreeMap::new();
                for (i, row) in rows.into_iter().enumerate() {
                    let loc = format!("attention.rows[{i}]");
                    check_row(&loc, &row.probs, v + 1)?;
                    let last = resolve_last(&vocab, &loc, row.last.as_deref())?;
                    if table.insert((row.s, last), row.probs).is_some() {
                        return Err(Error::model(loc, "duplicate row"));
                    }
                }
                Some(AttentionModel::Table(AttentionTable::new(
                    v, max_len, eos_floor, table,
                )?))
            }
        };

        let models = Models {
            vocab,
            ctc,
            transducer,
            attention,
        };
        models.validate()?;
        Ok(models)
    }

    fn to_file(&self) -> BundleFile {
        let label = |t: Option<TokenId>| t.map(|t| self.vocab.tokens()[t].clone());
        let transducer = self.transducer.as_ref().map(|m| match m {
            TransducerModel::Hash(h) => TransducerFile::Hash {
                frames: h.frames,
                seed: h.seed,
                concentration: h.concentration,
            },
            TransducerModel::Table(t) => TransducerFile::Table {
                frames: m.frames(),
                max_len: t.max_len(),
                rows: t
                    .rows()
                    .map(|((frame, s, last), probs)| TransducerRowFile {
                        t: frame + 1,
                        s,
                        last: label(last),
                        probs: probs.to_vec(),
                    })
                    .collect(),
            },
        });
        let attention = self.attention.as_ref().map(|m| match m {
            AttentionModel::Hash(h) => AttentionFile::Hash {
                seed: h.seed,
                concentration: h.concentration,
            },
            AttentionModel::Table(t) => AttentionFile::Table {
                max_len: t.max_len(),
                eos_floor: t.eos_floor(),
                rows: t
                    .rows()
                    .map(|((s, last), probs)| AttentionRowFile {
                        s,
                        last: label(last),
                        probs: probs.to_vec(),
                    })
                    .collect(),
            },
        });
        BundleFile {
            vocab: self.vocab.clone(),
            ctc_grid: self.ctc.as_ref().map(|g| g.linear_rows().to_vec()),
            transducer,
            attention,
        }
    }
}
