//! Joint beam search over CTC, transducer and attention decoders.
//!
//! The engine works on posterior providers rather than neural networks: a
//! CTC frame grid, a transducer conditional distribution and an
//! autoregressive attention distribution (see [`models`]). On top of those
//! it provides label-synchronous prefix scorers ([`scorers`]), three joint
//! search drivers that differ in which decoder proposes hypotheses
//! ([`search`]), brute-force reference implementations for small instances
//! ([`oracle`]) and a real-time-factor harness ([`bench`]).

pub mod alignment;
pub mod bench;
pub mod error;
pub mod logprob;
pub mod models;
pub mod oracle;
pub mod scorers;
pub mod search;
pub mod synth;
pub mod verify;
pub mod vocab;
pub mod weights;

pub use alignment::{ctc_collapse, rnnt_collapse, Alignment, AlignmentKind, Symbol};
pub use error::{Error, Result};
pub use logprob::{log_add, log_sum_exp, LogProb, LOG_ONE, LOG_ZERO};
pub use models::{AttentionModel, CtcGrid, LogDist, Models, TransducerModel};
pub use search::{
    search, Algorithm, Hypothesis, NBestList, ScorerCalls, SearchConfig, SearchOutput,
};
pub use vocab::{TokenId, TokenSeq, Vocabulary};
pub use weights::{
    compute_stage2_weights, joint_score, Decoder, DecoderWeights, Scores, WeightPreset,
};
