//! Joint beam search drivers.
//!
//! All three drivers share one scoring model: a hypothesis `l` carries a
//! cumulative log score per decoder and is ranked by [`joint_score`]. They
//! differ in which decoder proposes extensions (the primary decoder) and in
//! how the loop advances:
//!
//! * [`attention_driven_search`] is label-synchronous. Each step extends
//!   every live hypothesis with the top `k_pre` attention continuations.
//! * [`ctc_driven_search`] is time-synchronous CTC prefix beam search.
//! * [`rnnt_driven_search`] is time-synchronous transducer beam search with
//!   emission loops inside a frame.
//!
//! Secondary decoders with positive weight rescore a hypothesis whenever its
//! prefix changes. Secondary decoders with zero weight are never consulted,
//! and [`ScorerCalls`] records how often each decoder was.
//!
//! Ties in the joint score are broken by the lexicographic order of the
//! token sequences, and every map iterates in key order, so output is
//! bitwise reproducible.

mod attention;
mod ctc;
mod rnnt;
mod state;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use attention::attention_driven_search;
pub use ctc::ctc_driven_search;
pub use rnnt::rnnt_driven_search;

use crate::error::{Error, Result};
use crate::logprob::LogProb;
use crate::models::Models;
use crate::vocab::{TokenSeq, Vocabulary};
use crate::weights::{Decoder, DecoderWeights, Scores, WeightPreset};

/// Which decoder proposes hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "att")]
    AttentionDriven,
    #[serde(rename = "ctc")]
    CtcDriven,
    #[serde(rename = "rnnt")]
    RnntDriven,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::AttentionDriven,
        Algorithm::CtcDriven,
        Algorithm::RnntDriven,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AttentionDriven => "att",
            Algorithm::CtcDriven => "ctc",
            Algorithm::RnntDriven => "rnnt",
        }
    }

    pub fn primary(self) -> Decoder {
        match self {
            Algorithm::AttentionDriven => Decoder::Att,
            Algorithm::CtcDriven => Decoder::Ctc,
            Algorithm::RnntDriven => Decoder::Rnnt,
        }
    }

    pub fn default_preset(self) -> WeightPreset {
        match self {
            Algorithm::AttentionDriven => WeightPreset::AttDrivenDefault,
            Algorithm::CtcDriven => WeightPreset::CtcDrivenDefault,
            Algorithm::RnntDriven => WeightPreset::RnntDrivenDefault,
        }
    }

    fn is_label_synchronous(self) -> bool {
        self == Algorithm::AttentionDriven
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "att" | "attention_driven" => Ok(Algorithm::AttentionDriven),
            "ctc" | "ctc_driven" => Ok(Algorithm::CtcDriven),
            "rnnt" | "rnnt_driven" => Ok(Algorithm::RnntDriven),
            _ => Err(Error::usage(format!(
                "unknown algorithm {s:?}; expected one of att, ctc, rnnt"
            ))),
        }
    }
}

pub const DEFAULT_K_BEAM: usize = 20;
pub const DEFAULT_K_PRE: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub weights: DecoderWeights,
    /// Live hypotheses kept after joint scoring.
    pub k_beam: usize,
    /// Continuations proposed per hypothesis by the primary decoder.
    pub k_pre: usize,
    /// Cap on output length. `None` means `2T` for the label-synchronous
    /// driver and `T` for the time-synchronous ones, lowered to the context
    /// bound of any table model in use.
    pub max_output_len: Option<usize>,
    pub n_best: usize,
}

impl SearchConfig {
    pub fn new(algorithm: Algorithm, weights: DecoderWeights) -> Self {
        SearchConfig {
            algorithm,
            weights,
            k_beam: DEFAULT_K_BEAM,
            k_pre: DEFAULT_K_PRE,
            max_output_len: None,
            n_best: 1,
        }
    }

    /// Config with the algorithm's default weight preset.
    pub fn with_defaults(algorithm: Algorithm) -> Self {
        Self::new(algorithm, algorithm.default_preset().weights())
    }

    pub fn beams(mut self, k_beam: usize, k_pre: usize) -> Self {
        self.k_beam = k_beam;
        self.k_pre = k_pre;
        self
    }

    pub fn max_output_len(mut self, len: usize) -> Self {
        self.max_output_len = Some(len);
        self
    }

    pub fn n_best(mut self, n: usize) -> Self {
        self.n_best = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.k_beam == 0 {
            return Err(Error::usage("k_beam must be at least 1"));
        }
        if self.k_pre < self.k_beam {
            return Err(Error::usage(format!(
                "k_pre = {} must be at least k_beam = {}",
                self.k_pre, self.k_beam
            )));
        }
        if self.n_best == 0 {
            return Err(Error::usage("n_best must be at least 1"));
        }
        Ok(())
    }
}

/// Number of times each decoder's model or scorer was consulted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerCalls {
    pub ctc: u64,
    pub rnnt: u64,
    pub att: u64,
}

impl ScorerCalls {
    pub fn get(&self, decoder: Decoder) -> u64 {
        match decoder {
            Decoder::Ctc => self.ctc,
            Decoder::Rnnt => self.rnnt,
            Decoder::Att => self.att,
        }
    }

    pub(crate) fn bump(&mut self, decoder: Decoder) {
        match decoder {
            Decoder::Ctc => self.ctc += 1,
            Decoder::Rnnt => self.rnnt += 1,
            Decoder::Att => self.att += 1,
        }
    }
}

/// A complete hypothesis. Per-decoder scores are present exactly for the
/// decoders with positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: TokenSeq,
    pub joint: LogProb,
    pub scores: Scores,
}

/// Complete hypotheses, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NBestList(Vec<Hypothesis>);

#[derive(Serialize)]
struct EntryJson<'a> {
    tokens: Vec<&'a str>,
    joint: f64,
    ctc: Option<f64>,
    rnnt: Option<f64>,
    att: Option<f64>,
}

impl NBestList {
    /// Sorts, drops zero-probability and duplicate entries, keeps `n`.
    pub(crate) fn from_complete(mut hyps: Vec<Hypothesis>, n: usize) -> Self {
        hyps.retain(|h| h.joint > LogProb::NEG_INFINITY);
        hyps.sort_by(|a, b| rank(a.joint, &a.tokens, b.joint, &b.tokens));
        hyps.dedup_by(|a, b| a.tokens == b.tokens);
        hyps.truncate(n);
        NBestList(hyps)
    }

    pub fn entries(&self) -> &[Hypothesis] {
        &self.0
    }

    pub fn best(&self) -> Option<&Hypothesis> {
        self.0.first()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Compact JSON with tokens written as vocabulary labels.
    pub fn to_json(&self, vocab: &Vocabulary) -> Result<String> {
        let entries = self
            .0
            .iter()
            .map(|h| {
                let tokens = h
                    .tokens
                    .iter()
                    .map(|&t| {
                        vocab
                            .label(t)
                            .ok_or_else(|| Error::usage(format!("token {t} outside vocabulary")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(EntryJson {
                    tokens,
                    joint: h.joint,
                    ctc: h.scores.ctc,
                    rnnt: h.scores.rnnt,
                    att: h.scores.att,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(serde_json::to_string(&entries)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutput {
    pub nbest: NBestList,
    pub calls: ScorerCalls,
}

/// Runs the driver selected by `cfg.algorithm`.
pub fn search(models: &Models, cfg: &SearchConfig) -> Result<SearchOutput> {
    match cfg.algorithm {
        Algorithm::AttentionDriven => attention_driven_search(models, cfg),
        Algorithm::CtcDriven => ctc_driven_search(models, cfg),
        Algorithm::RnntDriven => rnnt_driven_search(models, cfg),
    }
}

/// Best-first order: higher joint score, then smaller token sequence.
pub(crate) fn rank(a_joint: LogProb, a: &TokenSeq, b_joint: LogProb, b: &TokenSeq) -> Ordering {
    b_joint.total_cmp(&a_joint).then_with(|| a.cmp(b))
}
