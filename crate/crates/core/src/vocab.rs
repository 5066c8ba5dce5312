//! Token inventory and output sequences.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 0-based index of a regular token.
pub type TokenId = usize;

/// Token inventory with two reserved identities appended after the regular
/// tokens: blank at `len()` and end-of-sentence at `len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    blank_label: String,
    eos_label: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyFile {
    tokens: Vec<String>,
    blank: String,
    eos: String,
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = Error;

    fn try_from(f: VocabularyFile) -> Result<Self> {
        Vocabulary::new(f.tokens, f.blank, f.eos)
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile {
            tokens: v.tokens,
            blank: v.blank_label,
            eos: v.eos_label,
        }
    }
}

impl Vocabulary {
    pub fn new(
        tokens: Vec<String>,
        blank: impl Into<String>,
        eos: impl Into<String>,
    ) -> Result<Self> {
        let blank_label = blank.into();
        let eos_label = eos.into();
        if tokens.is_empty() {
            return Err(Error::model(
                "vocab.tokens",
                "vocabulary has no regular tokens",
            ));
        }
        if blank_label == eos_label {
            return Err(Error::model("vocab", "blank and eos labels must differ"));
        }
        let mut seen = HashSet::new();
        for (i, t) in tokens.iter().enumerate() {
            if *t == blank_label || *t == eos_label {
                return Err(Error::model(
                    format!("vocab.tokens[{i}]"),
                    format!("token {t:?} collides with a reserved symbol"),
                ));
            }
            if !seen.insert(t.as_str()) {
                return Err(Error::model(
                    format!("vocab.tokens[{i}]"),
                    format!("duplicate token {t:?}"),
                ));
            }
        }
        Ok(Vocabulary {
            tokens,
            blank_label,
            eos_label,
        })
    }

    /// Single-character labels `a`, `b`, ... (then `t26`, `t27`, ...).
    pub fn alphabetic(size: usize) -> Self {
        let tokens = (0..size)
            .map(|i| {
                if i < 26 {
                    char::from(b'a' + i as u8).to_string()
                } else {
                    format!("t{i}")
                }
            })
            .collect();
        Vocabulary::new(tokens, "<blk>", "<eos>").expect("generated labels are distinct")
    }

    /// Number of regular tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn blank_id(&self) -> usize {
        self.tokens.len()
    }

    pub fn eos_id(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn label(&self, id: usize) -> Option<&str> {
        match id {
            i if i < self.tokens.len() => Some(&self.tokens[i]),
            i if i == self.blank_id() => Some(&self.blank_label),
            i if i == self.eos_id() => Some(&self.eos_label),
            _ => None,
        }
    }

    pub fn id_of(&self, label: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t == label)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// A sequence of regular tokens: no blank, no eos.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<TokenId>);

impl TokenSeq {
    pub fn empty() -> Self {
        TokenSeq(Vec::new())
    }

    /// Builds a sequence after checking every id is a regular token of `vocab`.
    pub fn checked(tokens: Vec<TokenId>, vocab: &Vocabulary) -> Result<Self> {
        if let Some(bad) = tokens.iter().find(|&&t| t >= vocab.len()) {
            return Err(Error::usage(format!(
                "token id {bad} is not a regular token (vocabulary has {})",
                vocab.len()
            )));
        }
        Ok(TokenSeq(tokens))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<TokenId> {
        self.0.last().copied()
    }

    pub fn as_slice(&self) -> &[TokenId] {
        &self.0
    }

    /// New sequence with `token` appended.
    pub fn extended(&self, token: TokenId) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(token);
        TokenSeq(v)
    }

    /// Sequence without its last token.
    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(TokenSeq(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn into_vec(self) -> Vec<TokenId> {
        self.0
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        DisplaySeq { seq: self, vocab }
    }
}

impl From<Vec<TokenId>> for TokenSeq {
    fn from(v: Vec<TokenId>) -> Self {
        TokenSeq(v)
    }
}

impl std::ops::Deref for TokenSeq {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

struct DisplaySeq<'a> {
    seq: &'a TokenSeq,
    vocab: &'a Vocabulary,
}

impl fmt::Display for DisplaySeq<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, &t) in self.seq.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", self.vocab.label(t).unwrap_or("?"))?;
        }
        write!(f, "]")
    }
}

/// Every token sequence of length `0..=max_len`, shortest first, then
/// lexicographic.
pub fn all_sequences(vocab_size: usize, max_len: usize) -> Vec<TokenSeq> {
    let mut out = vec![TokenSeq::empty()];
    let mut layer = vec![TokenSeq::empty()];
    for _ in 0..max_len {
        let next: Vec<TokenSeq> = layer
            .iter()
            .flat_map(|s| (0..vocab_size).map(move |t| s.extended(t)))
            .collect();
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
