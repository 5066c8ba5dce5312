//! Oracle agreement report for one model bundle.
//!
//! Every check compares an engine computation against an independent
//! reference on all sequences up to a length cap and reports the largest
//! deviation. Checks whose models are absent are reported as skipped.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::logprob::LogProb;
use crate::models::Models;
use crate::oracle::{
    best_in_table, brute_force_ctc_distribution, brute_force_rnnt, oracle_table, rnnt_partial_sums,
    sequence_count, SEQUENCE_GUARD,
};
use crate::scorers::{
    ctc_prefix_batch, ctc_prefix_init, ctc_prefix_score, rnnt_prefix_batch, rnnt_prefix_init,
    rnnt_prefix_score, CtcPrefixCache, Next, RnntPrefixCache,
};
use crate::search::{search, Algorithm, SearchConfig};
use crate::vocab::{all_sequences, TokenSeq};
use crate::weights::Decoder;

/// Linear-domain tolerance against enumeration.
pub const ORACLE_TOLERANCE: f64 = 1e-9;
/// Log-domain tolerance between two exact recursions.
pub const RECURSION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_abs_err: Option<f64>,
    pub pass: Option<bool>,
    pub skipped: bool,
}

impl Check {
    fn measured(name: &str, err: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            max_abs_err: Some(err),
            pass: Some(err <= tolerance),
            skipped: false,
        }
    }

    fn skipped(name: &str) -> Self {
        Check {
            name: name.to_string(),
            max_abs_err: None,
            pass: None,
            skipped: true,
        }
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        !self.checks.iter().any(Check::failed)
    }
}

/// Difference of two log values where equal infinities count as zero.
fn log_err(a: LogProb, b: LogProb) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Runs every applicable check on sequences of length up to `max_len`
/// (default: the frame count, lowered to any table context bound).
pub fn verify(models: &Models, max_len: Option<usize>) -> Result<Report> {
    models.validate()?;
    let v = models.vocab.len();
    let bound = [
        models.transducer.as_ref().and_then(|m| m.context_bound()),
        models.attention.as_ref().and_then(|m| m.context_bound()),
    ]
    .into_iter()
    .flatten()
    .min();
    let max_len = match (max_len, models.frames(), bound) {
        (Some(n), _, Some(b)) if n > b => {
            return Err(Error::usage(format!(
                "max_len = {n} exceeds the model context bound {b}"
            )))
        }
        (Some(n), _, _) => n,
        (None, Some(t), b) => b.map_or(t, |b| t.min(b)),
        (None, None, Some(b)) => b,
        (None, None, None) => return Err(Error::usage("max_len must be given for this bundle")),
    };
    let n = sequence_count(v, max_len);
    if n > SEQUENCE_GUARD {
        return Err(Error::Guard {
            what: "output sequence enumeration",
            size: n,
            limit: SEQUENCE_GUARD,
        });
    }
    let sequences = all_sequences(v, max_len);
    let mut checks = Vec::new();

    match &models.ctc {
        Some(g) => {
            let dist = brute_force_ctc_distribution(g)?;
            let total: f64 = dist.values().sum();
            checks.push(Check::measured(
                "ctc_normalization",
                (total - 1.0).abs(),
                ORACLE_TOLERANCE,
            ));

            let mut oracle_err: f64 = 0.0;
            let mut batch_err: f64 = 0.0;
            walk(
                &sequences,
                ctc_prefix_init(g),
                |prefix, next, cache: &CtcPrefixCache| {
                    let r = ctc_prefix_score(g, prefix, next, cache)?;
                    if let Next::Token(c) = next {
                        let extended = prefix.extended(c);
                        batch_err =
                            batch_err.max(log_err(r.alpha, ctc_prefix_batch(g, &extended)?.0));
                    } else {
                        let brute = dist.get(prefix).copied().unwrap_or(0.0);
                        oracle_err = oracle_err.max((r.alpha.exp() - brute).abs());
                    }
                    Ok(r.cache)
                },
            )?;
            checks.push(Check::measured(
                "ctc_prefix_vs_enumeration",
                oracle_err,
                ORACLE_TOLERANCE,
            ));
            checks.push(Check::measured(
                "ctc_incremental_vs_batch",
                batch_err,
                RECURSION_TOLERANCE,
            ));
        }
        None => {
            for name in [
                "ctc_normalization",
                "ctc_prefix_vs_enumeration",
                "ctc_incremental_vs_batch",
            ] {
                checks.push(Check::skipped(name));
            }
        }
    }

    match &models.transducer {
        Some(m) => {
            let frames = m.frames();
            let mut oracle_err: f64 = 0.0;
            let mut batch_err: f64 = 0.0;
            walk(
                &sequences,
                rnnt_prefix_init(m, frames)?,
                |prefix, next, cache: &RnntPrefixCache| {
                    let r = rnnt_prefix_score(m, prefix, next, cache)?;
                    if let Next::Token(c) = next {
                        let extended = prefix.extended(c);
                        batch_err =
                            batch_err.max(log_err(r.alpha, rnnt_prefix_batch(m, &extended)?.0));
                    } else {
                        let brute = brute_force_rnnt(m, prefix, frames)?;
                        oracle_err = oracle_err.max((r.alpha.exp() - brute).abs());
                    }
                    Ok(r.cache)
                },
            )?;
            checks.push(Check::measured(
                "rnnt_prefix_vs_enumeration",
                oracle_err,
                ORACLE_TOLERANCE,
            ));
            checks.push(Check::measured(
                "rnnt_incremental_vs_batch",
                batch_err,
                RECURSION_TOLERANCE,
            ));

            let sums = rnnt_partial_sums(m, frames, max_len)?;
            let mut violation = (sums.last().copied().unwrap_or(0.0) - 1.0).max(0.0);
            for pair in sums.windows(2) {
                violation = violation.max(pair[0] - pair[1]);
            }
            checks.push(Check::measured(
                "rnnt_partial_sums",
                violation,
                ORACLE_TOLERANCE,
            ));
        }
        None => {
            for name in [
                "rnnt_prefix_vs_enumeration",
                "rnnt_incremental_vs_batch",
                "rnnt_partial_sums",
            ] {
                checks.push(Check::skipped(name));
            }
        }
    }

    match &models.attention {
        Some(m) => {
            let mut err: f64 = 0.0;
            for y in sequences.iter().filter(|y| y.len() <= max_len) {
                err = err.max((m.posterior(y)?.linear_sum() - 1.0).abs());
            }
            checks.push(Check::measured(
                "attention_normalization",
                err,
                ORACLE_TOLERANCE,
            ));
        }
        None => checks.push(Check::skipped("attention_normalization")),
    }

    let complete =
        models.ctc.is_some() && models.transducer.is_some() && models.attention.is_some();
    let table = if complete {
        Some(oracle_table(models, &Decoder::ALL, max_len)?)
    } else {
        None
    };
    for algorithm in Algorithm::ALL {
        let name = format!("search_{algorithm}_exhaustive_vs_oracle");
        let Some(table) = &table else {
            checks.push(Check::skipped(&name));
            continue;
        };
        let weights = algorithm.default_preset().weights();
        let (y, joint) = best_in_table(table, &weights)?;
        let k = table.len();
        let cfg = SearchConfig::new(algorithm, weights)
            .beams(k, k)
            .max_output_len(max_len);
        let out = search(models, &cfg)?;
        let check = match out.nbest.best() {
            Some(best) if best.tokens == y => {
                Check::measured(&name, log_err(best.joint, joint), ORACLE_TOLERANCE)
            }
            _ => Check {
                name,
                max_abs_err: None,
                pass: Some(false),
                skipped: false,
            },
        };
        checks.push(check);
    }

    Ok(Report { checks })
}

/// Depth-first walk over the prefix tree of `sequences` (which must be
/// closed under prefixes), calling `step` for every token extension and once
/// with `Next::Eos` per sequence. `step` returns the child cache.
fn walk<C>(
    sequences: &[TokenSeq],
    root: C,
    mut step: impl FnMut(&TokenSeq, Next, &C) -> Result<Option<C>>,
) -> Result<()> {
    let max_len = sequences.iter().map(TokenSeq::len).max().unwrap_or(0);
    let vocab_size = sequences
        .iter()
        .flat_map(|y| y.iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    let mut stack = vec![(TokenSeq::empty(), root)];
    while let Some((prefix, cache)) = stack.pop() {
        step(&prefix, Next::Eos, &cache)?;
        if prefix.len() == max_len {
            continue;
        }
        for c in (0..vocab_size).rev() {
            if let Some(child) = step(&prefix, Next::Token(c), &cache)? {
                stack.push((prefix.extended(c), child));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::CtcGrid;
    use crate::synth::random_models;
    use crate::vocab::Vocabulary;

    #[test]
    fn random_bundle_passes_everything() {
        let report = verify(&random_models(2, 3, 2, 3).unwrap(), None).unwrap();
        assert!(report.all_pass(), "{report:?}");
        assert!(report.checks.iter().all(|c| !c.skipped));
        assert_eq!(report.checks.len(), 10);
    }

    #[test]
    fn absent_decoders_are_skipped() {
        let m = Models::new(Vocabulary::alphabetic(1)).with_ctc(CtcGrid::uniform(2, 1).unwrap());
        let report = verify(&m, None).unwrap();
        assert!(report.all_pass());
        let skipped: Vec<_> = report
            .checks
            .iter()
            .filter(|c| c.skipped)
            .map(|c| c.name.as_str())
            .collect();
        assert!(skipped.contains(&"rnnt_partial_sums"));
        assert!(skipped.contains(&"search_ctc_exhaustive_vs_oracle"));
        assert!(!skipped.contains(&"ctc_normalization"));
    }

    #[test]
    fn oversized_bundle_hits_guard() {
        let m = Models::from_seed(1, 30, 3, 2.0).unwrap();
        assert!(matches!(verify(&m, None), Err(Error::Guard { .. })));
    }
}
