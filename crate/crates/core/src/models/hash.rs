//! Stable hash expansion used by the seeded model variants.
//!
//! A context is encoded as little-endian bytes and fed to 64-bit FNV-1a.
//! For each candidate symbol the candidate id (`u32` LE) is appended to the
//! context state; the top 53 bits of the digest scaled to `[0, 1)` and
//! multiplied by the concentration give that candidate's logit. Logits go
//! through a max-shifted softmax. Candidate ids are vocabulary ids, so
//! blank is `|V|` and eos is `|V| + 1`.
//!
//! Context encodings:
//! - grid:       seed u64, `b"ctc\0"`, frame u32
//! - transducer: seed u64, `b"rnnt"`, frame u32, prefix length u32, tokens u32...
//! - attention:  seed u64, `b"att\0"`, prefix length u32, tokens u32...

use crate::logprob::log_softmax;
use crate::vocab::TokenId;

use super::LogDist;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(FNV_OFFSET)
    }
}

impl Fnv1a {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn write_u32(&mut self, v: u32) {
        self.write(&v.to_le_bytes());
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// `[0, 1)` from the top 53 bits of a digest.
pub fn unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn context(seed: u64, tag: &[u8; 4]) -> Fnv1a {
    let mut h = Fnv1a::new();
    h.write_u64(seed);
    h.write(tag);
    h
}

fn write_prefix(h: &mut Fnv1a, prefix: &[TokenId]) {
    h.write_u32(prefix.len() as u32);
    for &t in prefix {
        h.write_u32(t as u32);
    }
}

/// Expands a hashed context into a distribution over `vocab_size` tokens
/// plus one reserved candidate with id `reserved_id`.
fn expand(ctx: Fnv1a, vocab_size: usize, reserved_id: usize, concentration: f64) -> LogDist {
    let logits: Vec<f64> = (0..vocab_size)
        .chain(std::iter::once(reserved_id))
        .map(|id| {
            let mut h = ctx;
            h.write_u32(id as u32);
            concentration * unit(h.finish())
        })
        .collect();
    LogDist::from_log(log_softmax(&logits))
}

pub fn grid_row(seed: u64, frame: usize, vocab_size: usize, concentration: f64) -> LogDist {
    let mut h = context(seed, b"ctc\0");
    h.write_u32(frame as u32);
    expand(h, vocab_size, vocab_size, concentration)
}

pub fn transducer_row(
    seed: u64,
    frame: usize,
    prefix: &[TokenId],
    vocab_size: usize,
    concentration: f64,
) -> LogDist {
    let mut h = context(seed, b"rnnt");
    h.write_u32(frame as u32);
    write_prefix(&mut h, prefix);
    expand(h, vocab_size, vocab_size, concentration)
}

pub fn attention_row(
    seed: u64,
    prefix: &[TokenId],
    vocab_size: usize,
    concentration: f64,
) -> LogDist {
    let mut h = context(seed, b"att\0");
    write_prefix(&mut h, prefix);
    expand(h, vocab_size, vocab_size + 1, concentration)
}
