//! Natural-log probability arithmetic.
//!
//! Probabilities are carried as plain `f64` natural logarithms. Probability
//! zero is `f64::NEG_INFINITY`; none of the helpers here produce NaN from it.

use crate::error::{Error, Result};

/// Natural-log probability.
pub type LogProb = f64;

/// Log of probability zero.
pub const LOG_ZERO: LogProb = f64::NEG_INFINITY;

/// Log of probability one.
pub const LOG_ONE: LogProb = 0.0;

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add(a: LogProb, b: LogProb) -> LogProb {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == LOG_ZERO {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ exp(vᵢ)` with max-shift. Errors on an empty slice.
pub fn log_sum_exp(values: &[LogProb]) -> Result<LogProb> {
    if values.is_empty() {
        return Err(Error::usage("log_sum_exp of an empty list"));
    }
    let max = values.iter().copied().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO {
        return Ok(LOG_ZERO);
    }
    if max == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Log-softmax of raw logits, max-shifted.
pub fn log_softmax(logits: &[f64]) -> Vec<LogProb> {
    let norm = log_sum_exp(logits).unwrap_or(LOG_ZERO);
    logits.iter().map(|l| l - norm).collect()
}

/// `ln p` with `ln 0 = -inf` made explicit.
#[inline]
pub fn ln(p: f64) -> LogProb {
    if p == 0.0 {
        LOG_ZERO
    } else {
        p.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn halves_sum_to_one() {
        let v = log_sum_exp(&[0.5f64.ln(), 0.5f64.ln()]).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn zero_absorbs() {
        assert_eq!(log_sum_exp(&[LOG_ZERO, LOG_ZERO]).unwrap(), LOG_ZERO);
        assert_eq!(log_add(LOG_ZERO, LOG_ZERO), LOG_ZERO);
    }

    #[test]
    fn three_quarters_matches_linear_sum() {
        let q = 0.25f64.ln();
        let v = log_sum_exp(&[q, q, q]).unwrap();
        let direct = (0.25f64 + 0.25 + 0.25).ln();
        assert!((v - direct).abs() < 1e-15);
        assert!((v - 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_is_usage_error() {
        assert!(matches!(log_sum_exp(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn large_values_do_not_overflow() {
        let v = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut xs in prop::collection::vec(-50.0f64..0.0, 1..8), rot in 0usize..8) {
            let a = log_sum_exp(&xs).unwrap();
            let k = rot % xs.len();
            xs.rotate_left(k);
            let b = log_sum_exp(&xs).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn neg_infinity_is_neutral(xs in prop::collection::vec(-50.0f64..0.0, 1..8)) {
            let a = log_sum_exp(&xs).unwrap();
            let mut ys = xs.clone();
            ys.push(LOG_ZERO);
            prop_assert_eq!(a, log_sum_exp(&ys).unwrap());
        }

        #[test]
        fn pairwise_matches_list(a in -80.0f64..0.0, b in -80.0f64..0.0) {
            let list = log_sum_exp(&[a, b]).unwrap();
            prop_assert!((log_add(a, b) - list).abs() < 1e-12);
            prop_assert_eq!(log_add(a, b), log_add(b, a));
        }
    }
}
