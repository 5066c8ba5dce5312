use crate::error::{Error, Result};

use super::{check_row, hash, LogDist};

/// Frame posteriors `P(z_t | h_t)` over `V ∪ {blank}`, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcGrid {
    vocab_size: usize,
    /// Linear rows as read from file, kept so that saving is lossless.
    linear: Vec<Vec<f64>>,
    rows: Vec<LogDist>,
}

impl CtcGrid {
    /// Grid from linear-probability rows, each `vocab_size + 1` long.
    pub fn from_linear(rows: Vec<Vec<f64>>, vocab_size: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::model("ctc_grid", "grid needs at least one frame"));
        }
        for (t, row) in rows.iter().enumerate() {
            check_row(&format!("ctc_grid[{t}]"), row, vocab_size + 1)?;
        }
        let log = rows.iter().map(|r| LogDist::from_linear(r)).collect();
        Ok(CtcGrid {
            vocab_size,
            linear: rows,
            rows: log,
        })
    }

    /// Every frame uniform over `V ∪ {blank}`.
    pub fn uniform(frames: usize, vocab_size: usize) -> Result<Self> {
        let p = 1.0 / (vocab_size + 1) as f64;
        Self::from_linear(vec![vec![p; vocab_size + 1]; frames], vocab_size)
    }

    /// Rows from the stable hash expansion.
    pub fn from_hash(
        seed: u64,
        frames: usize,
        vocab_size: usize,
        concentration: f64,
    ) -> Result<Self> {
        if frames == 0 {
            return Err(Error::usage("grid needs at least one frame"));
        }
        let rows: Vec<LogDist> = (0..frames)
            .map(|t| hash::grid_row(seed, t, vocab_size, concentration))
            .collect();
        let linear = rows
            .iter()
            .map(|r| r.as_slice().iter().map(|v| v.exp()).collect())
            .collect();
        Ok(CtcGrid {
            vocab_size,
            linear,
            rows,
        })
    }

    pub fn frames(&self) -> usize {
        self.rows.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Row for 0-based `frame`.
    pub fn frame_posterior(&self, frame: usize) -> Result<&LogDist> {
        self.rows.get(frame).ok_or_else(|| {
            Error::usage(format!(
                "frame {frame} out of range for {} frames",
                self.frames()
            ))
        })
    }

    pub(crate) fn row(&self, frame: usize) -> &LogDist {
        &self.rows[frame]
    }

    pub fn linear_rows(&self) -> &[Vec<f64>] {
        &self.linear
    }
}
