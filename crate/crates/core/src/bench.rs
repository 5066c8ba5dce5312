//! Real-time-factor measurement and parameter sweeps.
//!
//! RTF is total processing time over total declared speech duration. Model
//! loading is excluded; scorer cache construction happens inside the search
//! and is included. Each measurement runs one untimed warm-up pass, then
//! `repeats` timed passes, and checksums the n-best output of every pass so
//! nondeterminism cannot go unnoticed.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::LogProb;
use crate::models::hash::Fnv1a;
use crate::models::Models;
use crate::search::{search, Algorithm, SearchConfig, DEFAULT_K_PRE};
use crate::synth::aligned_models;
use crate::vocab::TokenSeq;
use crate::weights::{rnnt_weight_sweep, DecoderWeights, WeightPreset};

/// Seconds of speech per model frame, as for a 10 ms front end subsampled
/// four times.
pub const FRAME_SHIFT_S: f64 = 0.04;

#[derive(Debug, Clone)]
pub struct Utterance {
    pub name: String,
    pub models: Arc<Models>,
    pub speech_duration_s: f64,
}

impl Utterance {
    /// Duration derived from the frame count of the bundle.
    pub fn new(name: impl Into<String>, models: Arc<Models>) -> Result<Self> {
        let frames = models.frames().ok_or_else(|| {
            Error::usage("utterance needs a time-aligned model to derive its duration")
        })?;
        Self::with_duration(name, models, frames as f64 * FRAME_SHIFT_S)
    }

    pub fn with_duration(
        name: impl Into<String>,
        models: Arc<Models>,
        speech_duration_s: f64,
    ) -> Result<Self> {
        if !(speech_duration_s.is_finite() && speech_duration_s > 0.0) {
            return Err(Error::usage(format!(
                "speech duration must be positive, got {speech_duration_s}"
            )));
        }
        Ok(Utterance {
            name: name.into(),
            models,
            speech_duration_s,
        })
    }
}

/// One row of benchmark output. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algorithm: Algorithm,
    pub k_beam: usize,
    pub k_pre: usize,
    pub mu_ctc: f64,
    pub mu_rnnt: f64,
    pub mu_att: f64,
    pub beta: f64,
    pub mean_rtf: f64,
    pub mean_joint_score: f64,
    pub wall_time_s: f64,
    pub repeats: usize,
}

pub const CSV_HEADER: &str =
    "algorithm,k_beam,k_pre,mu_ctc,mu_rnnt,mu_att,beta,mean_rtf,mean_joint_score,wall_time_s,repeats";

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub record: BenchRecord,
    /// FNV-1a of the n-best JSON of every utterance, in order.
    pub checksum: u64,
}

/// RTF of one configuration over an utterance set.
pub fn measure_rtf(
    utterances: &[Utterance],
    cfg: &SearchConfig,
    repeats: usize,
) -> Result<Measurement> {
    let mut m = measure_interleaved(utterances, std::slice::from_ref(cfg), repeats)
        .map_err(unwrap_sweep)?;
    Ok(m.remove(0))
}

fn unwrap_sweep(e: Error) -> Error {
    match e {
        Error::Sweep { source, .. } => *source,
        other => other,
    }
}

/// RTF of several configurations, with their timed repeats interleaved
/// round-robin so that slow drifts in machine speed affect all of them
/// alike. Errors name the failing configuration.
pub fn measure_interleaved(
    utterances: &[Utterance],
    cfgs: &[SearchConfig],
    repeats: usize,
) -> Result<Vec<Measurement>> {
    if utterances.is_empty() {
        return Err(Error::usage("no utterances to measure"));
    }
    if repeats == 0 {
        return Err(Error::usage("repeats must be at least 1"));
    }
    let speech: f64 = utterances.iter().map(|u| u.speech_duration_s).sum();

    // Warm-up pass: fixes the reference checksum and the scores.
    let mut warm = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        warm.push(decode_all(utterances, cfg, None).map_err(at(cfg))?);
    }

    let mut rtf_sum = vec![0.0; cfgs.len()];
    let mut wall = vec![Duration::ZERO; cfgs.len()];
    for _ in 0..repeats {
        for (i, cfg) in cfgs.iter().enumerate() {
            let start = Instant::now();
            let mut proc = Duration::ZERO;
            let (checksum, _) = decode_all(utterances, cfg, Some(&mut proc)).map_err(at(cfg))?;
            wall[i] += start.elapsed();
            if checksum != warm[i].0 {
                return Err(at(cfg)(Error::usage(
                    "decode output changed between repeats",
                )));
            }
            rtf_sum[i] += proc.as_secs_f64() / speech;
        }
    }

    Ok(cfgs
        .iter()
        .zip(warm)
        .enumerate()
        .map(|(i, (cfg, (checksum, best)))| Measurement {
            record: BenchRecord {
                algorithm: cfg.algorithm,
                k_beam: cfg.k_beam,
                k_pre: cfg.k_pre,
                mu_ctc: cfg.weights.ctc,
                mu_rnnt: cfg.weights.rnnt,
                mu_att: cfg.weights.att,
                beta: cfg.weights.beta,
                mean_rtf: rtf_sum[i] / repeats as f64,
                mean_joint_score: best.iter().sum::<f64>() / best.len() as f64,
                wall_time_s: wall[i].as_secs_f64(),
                repeats,
            },
            checksum,
        })
        .collect())
}

/// Wraps a decode error with the configuration it came from.
fn at(cfg: &SearchConfig) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Sweep {
        point: format!(
            "algorithm={} k_beam={} weights={}:{}:{}",
            cfg.algorithm, cfg.k_beam, cfg.weights.ctc, cfg.weights.rnnt, cfg.weights.att
        ),
        source: Box::new(e),
    }
}

/// Decodes every utterance, returning the output checksum and the best
/// joint score per utterance. Only the searches themselves are timed.
fn decode_all(
    utterances: &[Utterance],
    cfg: &SearchConfig,
    mut timer: Option<&mut Duration>,
) -> Result<(u64, Vec<LogProb>)> {
    let mut h = Fnv1a::new();
    let mut best = Vec::with_capacity(utterances.len());
    for u in utterances {
        let t0 = Instant::now();
        let out = search(&u.models, cfg)?;
        if let Some(total) = timer.as_deref_mut() {
            *total += t0.elapsed();
        }
        h.write(out.nbest.to_json(&u.models.vocab)?.as_bytes());
        best.push(out.nbest.best().map_or(LogProb::NEG_INFINITY, |b| b.joint));
    }
    Ok((h.finish(), best))
}

/// Weight axis entry of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightChoice {
    /// The preset matching each algorithm.
    AlgorithmDefault,
    Preset(WeightPreset),
    Explicit(DecoderWeights),
}

impl WeightChoice {
    pub fn resolve(self, algorithm: Algorithm) -> DecoderWeights {
        match self {
            WeightChoice::AlgorithmDefault => algorithm.default_preset().weights(),
            WeightChoice::Preset(p) => p.weights(),
            WeightChoice::Explicit(w) => w,
        }
    }
}

impl fmt::Display for WeightChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightChoice::AlgorithmDefault => f.write_str("default"),
            WeightChoice::Preset(p) => write!(f, "{p}"),
            WeightChoice::Explicit(w) => write!(f, "{}:{}:{}", w.ctc, w.rnnt, w.att),
        }
    }
}

/// Cartesian product of algorithms, weights and beam sizes. Points are
/// visited algorithm-major, then weights, then beams.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub algorithms: Vec<Algorithm>,
    pub beams: Vec<usize>,
    pub weights: Vec<WeightChoice>,
    /// Prebeam; raised to `k_beam` where it would be smaller.
    pub k_pre: usize,
    pub beta: f64,
    pub max_output_len: Option<usize>,
}

impl SweepGrid {
    pub fn new(algorithms: Vec<Algorithm>, beams: Vec<usize>, weights: Vec<WeightChoice>) -> Self {
        SweepGrid {
            algorithms,
            beams,
            weights,
            k_pre: DEFAULT_K_PRE,
            beta: 0.0,
            max_output_len: None,
        }
    }

    pub fn points(&self) -> Result<Vec<SearchConfig>> {
        if self.algorithms.is_empty() || self.beams.is_empty() || self.weights.is_empty() {
            return Err(Error::usage("sweep grid has an empty axis"));
        }
        let mut points = Vec::new();
        for &algorithm in &self.algorithms {
            for w in &self.weights {
                for &k_beam in &self.beams {
                    let mut cfg =
                        SearchConfig::new(algorithm, w.resolve(algorithm).with_beta(self.beta))
                            .beams(k_beam, self.k_pre.max(k_beam));
                    cfg.max_output_len = self.max_output_len;
                    points.push(cfg);
                }
            }
        }
        Ok(points)
    }
}

/// Parses `key=v1,v2;key=...` with keys `algorithms`, `beams`, `weights`,
/// `k_pre`, `beta` and `max_len`. Weight entries are `default`, a preset
/// name, `rnnt-sweep` (five points) or `ctc:rnnt:att`. Omitted axes default
/// to all algorithms, beam 20 and the per-algorithm preset.
impl FromStr for SweepGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut grid = SweepGrid::new(
            Algorithm::ALL.to_vec(),
            vec![20],
            vec![WeightChoice::AlgorithmDefault],
        );
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("grid entry {part:?} is not key=values")))?;
            let items = || values.split(',').map(str::trim).filter(|v| !v.is_empty());
            match key.trim() {
                "algorithms" => grid.algorithms = items().map(str::parse).collect::<Result<_>>()?,
                "beams" => grid.beams = items().map(parse_num).collect::<Result<_>>()?,
                "weights" => {
                    grid.weights = Vec::new();
                    for v in items() {
                        grid.weights.extend(parse_weights(v)?);
                    }
                }
                "k_pre" => grid.k_pre = parse_num(values.trim())?,
                "beta" => grid.beta = parse_num(values.trim())?,
                "max_len" => grid.max_output_len = Some(parse_num(values.trim())?),
                other => return Err(Error::usage(format!("unknown grid key {other:?}"))),
            }
        }
        grid.points()?;
        Ok(grid)
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::usage(format!("cannot parse {s:?} as a number")))
}

fn parse_weights(v: &str) -> Result<Vec<WeightChoice>> {
    if v == "default" {
        return Ok(vec![WeightChoice::AlgorithmDefault]);
    }
    if v == "rnnt-sweep" {
        return Ok(rnnt_weight_sweep()
            .into_iter()
            .map(WeightChoice::Explicit)
            .collect());
    }
    if v.contains(':') {
        let mu: Vec<f64> = v.split(':').map(parse_num).collect::<Result<_>>()?;
        let [ctc, rnnt, att] = mu[..] else {
            return Err(Error::usage(format!(
                "weights {v:?} need three values ctc:rnnt:att"
            )));
        };
        return Ok(vec![WeightChoice::Explicit(DecoderWeights::new(
            ctc, rnnt, att, 0.0,
        )?)]);
    }
    Ok(vec![WeightChoice::Preset(v.parse()?)])
}

/// One record per grid point, in grid order. Points are timed interleaved;
/// the first failing point aborts the sweep and is named in the error.
pub fn sweep(
    grid: &SweepGrid,
    utterances: &[Utterance],
    repeats: usize,
) -> Result<Vec<BenchRecord>> {
    let points = grid.points()?;
    Ok(measure_interleaved(utterances, &points, repeats)?
        .into_iter()
        .map(|m| m.record)
        .collect())
}

/// Pairs `(smaller, larger)` of record indices that share algorithm, weights,
/// and β where the larger beam found a lower mean joint score. Beam search
/// gives no such guarantee, so callers treat these as warnings.
pub fn beam_regressions(records: &[BenchRecord]) -> Vec<(usize, usize)> {
    let same_setting = |a: &BenchRecord, b: &BenchRecord| {
        a.algorithm == b.algorithm
            && a.mu_ctc == b.mu_ctc
            && a.mu_rnnt == b.mu_rnnt
            && a.mu_att == b.mu_att
            && a.beta == b.beta
    };
    let mut out = Vec::new();
    for (i, a) in records.iter().enumerate() {
        for (j, b) in records.iter().enumerate() {
            if same_setting(a, b)
                && a.k_beam < b.k_beam
                && b.mean_joint_score < a.mean_joint_score - 1e-9
            {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::usage(format!(
            "unexpected CSV header {:?}",
            header.join(",")
        )));
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// Utterances used for RTF direction checks: eight 16-frame utterances over
/// 16 tokens, each with three table decoders agreeing on a six-token
/// reference (see [`aligned_models`]). Returns the references alongside.
pub fn synthetic_suite() -> Result<Vec<(Utterance, TokenSeq)>> {
    (0..8u64)
        .map(|i| {
            let (models, reference) = aligned_models(0x5eed_0000 + i, 16, 16, 6)?;
            Ok((
                Utterance::new(format!("synthetic-{i}"), Arc::new(models))?,
                reference,
            ))
        })
        .collect()
}

/// Levenshtein distance between two token sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_models;

    fn small_suite() -> Vec<Utterance> {
        (0..2)
            .map(|i| {
                Utterance::new(
                    format!("u{i}"),
                    Arc::new(random_models(i, 3, 2, 3).unwrap()),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn rtf_definition() {
        // 0.5 s of processing on 2 s of speech
        assert_eq!(0.5 / 2.0, 0.25);
        let u = small_suite();
        assert!((u[0].speech_duration_s - 0.12).abs() < 1e-12);
        assert!(Utterance::with_duration("x", u[0].models.clone(), 0.0).is_err());
    }

    #[test]
    fn empty_set_is_usage_error() {
        let cfg = SearchConfig::with_defaults(Algorithm::CtcDriven);
        assert!(matches!(measure_rtf(&[], &cfg, 3), Err(Error::Usage(_))));
    }

    #[test]
    fn checksums_repeat() {
        let suite = small_suite();
        let cfg = SearchConfig::with_defaults(Algorithm::RnntDriven).beams(3, 3);
        let a = measure_rtf(&suite, &cfg, 2).unwrap();
        let b = measure_rtf(&suite, &cfg, 2).unwrap();
        assert_eq!(a.checksum, b.checksum);
        assert!(a.record.mean_rtf > 0.0);
        assert_eq!(a.record.mean_joint_score, b.record.mean_joint_score);
    }

    #[test]
    fn grid_cardinality_and_order() {
        let grid: SweepGrid = "algorithms=att,ctc,rnnt;beams=1,2,4,8".parse().unwrap();
        let points = grid.points().unwrap();
        assert_eq!(points.len(), 12);
        assert_eq!(points[0].algorithm, Algorithm::AttentionDriven);
        assert_eq!(points[3].k_beam, 8);
        assert_eq!(points[4].algorithm, Algorithm::CtcDriven);
        assert!(points.iter().all(|p| p.k_pre == 30));
    }

    #[test]
    fn grid_weight_axis() {
        let grid: SweepGrid = "algorithms=att;beams=40;weights=rnnt-sweep,balanced,0.2:0.3:0.5"
            .parse()
            .unwrap();
        let points = grid.points().unwrap();
        assert_eq!(points.len(), 7);
        assert_eq!(points[0].k_pre, 40);
        assert!(points[..5].iter().all(|p| p.weights.att == 0.5));
        assert_eq!(points[6].weights.rnnt, 0.3);
        for bad in [
            "beams=",
            "speed=3",
            "weights=1:2",
            "algorithms=beam",
            "beams=x",
        ] {
            assert!(bad.parse::<SweepGrid>().is_err(), "{bad}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let grid: SweepGrid = "algorithms=att,ctc;beams=1,3".parse().unwrap();
        let records = sweep(&grid, &small_suite(), 1).unwrap();
        assert_eq!(records.len(), 4);
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert!(text.lines().nth(1).unwrap().starts_with("att,1,30,"));
        assert_eq!(read_csv(&buf[..]).unwrap(), records);
    }

    #[test]
    fn sweep_failure_names_point() {
        let models = Models::new(crate::Vocabulary::alphabetic(1))
            .with_ctc(crate::CtcGrid::uniform(2, 1).unwrap());
        let suite = vec![Utterance::new("grid-only", Arc::new(models)).unwrap()];
        let grid: SweepGrid = "algorithms=ctc,att;beams=1;weights=1:0:0".parse().unwrap();
        let err = sweep(&grid, &suite, 1).unwrap_err();
        assert!(err.to_string().contains("algorithm=att"), "{err}");
    }

    #[test]
    fn exhaustive_beam_scores_best() {
        let suite = small_suite();
        for algorithm in Algorithm::ALL {
            let mut grid = SweepGrid::new(
                vec![algorithm],
                vec![1, 2, 4, 15],
                vec![WeightChoice::AlgorithmDefault],
            );
            grid.max_output_len = Some(3);
            let records = sweep(&grid, &suite, 1).unwrap();
            let top = records.last().unwrap().mean_joint_score;
            assert!(
                records.iter().all(|r| r.mean_joint_score <= top + 1e-12),
                "{algorithm}"
            );
        }
    }

    #[test]
    fn synthetic_suite_is_decodable() {
        let suite = synthetic_suite().unwrap();
        assert_eq!(suite.len(), 8);
        for algorithm in Algorithm::ALL {
            let cfg = SearchConfig::with_defaults(algorithm);
            let errors: usize = suite
                .iter()
                .map(|(u, reference)| {
                    let best = search(&u.models, &cfg)
                        .unwrap()
                        .nbest
                        .best()
                        .unwrap()
                        .tokens
                        .clone();
                    edit_distance(&best, reference)
                })
                .sum();
            assert!(errors <= 4, "{algorithm}: {errors} token errors");
        }
    }

    #[test]
    fn levenshtein() {
        assert_eq!(edit_distance::<u8>(&[], &[]), 0);
        assert_eq!(edit_distance(b"kitten", b"sitting"), 3);
        assert_eq!(edit_distance(&[1, 2, 3], &[]), 3);
        assert_eq!(edit_distance(&[1, 2, 3], &[1, 3]), 1);
    }
}
