//! `jointbeam` command-line front end.
//!
//! Exit codes: 0 success, 1 model or decode failure (or a failed oracle
//! check), 2 usage error, 3 oracle instance-size guard.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use jointbeam::bench::{self, SweepGrid, Utterance};
use jointbeam::search::DEFAULT_K_PRE;
use jointbeam::verify::verify;
use jointbeam::{
    compute_stage2_weights, search, Algorithm, DecoderWeights, Error, Models, SearchConfig,
    WeightPreset,
};

#[derive(Parser)]
#[command(
    name = "jointbeam",
    version,
    about = "Joint CTC / transducer / attention beam search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode model bundles and print one n-best JSON array per bundle.
    Decode(DecodeArgs),
    /// Check scorers and search against brute-force enumeration.
    Oracle(OracleArgs),
    /// Measure real-time factors over a parameter grid and print CSV.
    Bench(BenchArgs),
    /// Second-stage training weights from per-loss best epochs.
    Weights(WeightsArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model bundle JSON; repeat for several utterances.
    #[arg(long = "model", value_name = "PATH")]
    models: Vec<PathBuf>,
    /// Build hash models from this seed instead of reading files.
    #[arg(long, conflicts_with = "models")]
    seed: Option<u64>,
    /// Frames of a seeded bundle.
    #[arg(long, default_value_t = 20)]
    frames: usize,
    /// Vocabulary size of a seeded bundle.
    #[arg(long, default_value_t = 8)]
    vocab_size: usize,
    /// Logit scale of a seeded bundle; larger is peakier.
    #[arg(long, default_value_t = 4.0)]
    concentration: f64,
}

impl ModelArgs {
    fn load(&self) -> anyhow::Result<Vec<Arc<Models>>> {
        if let Some(seed) = self.seed {
            let m = Models::from_seed(seed, self.frames, self.vocab_size, self.concentration)?;
            return Ok(vec![Arc::new(m)]);
        }
        if self.models.is_empty() {
            return Err(Error::Usage("one of --model or --seed is required".into()).into());
        }
        self.models
            .iter()
            .map(|p| {
                Models::load(p)
                    .map(Arc::new)
                    .with_context(|| format!("loading {}", p.display()))
            })
            .collect()
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    /// Attention-driven, label-synchronous.
    Att,
    /// CTC-driven, time-synchronous.
    Ctc,
    /// Transducer-driven, time-synchronous.
    Rnnt,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Att => Algorithm::AttentionDriven,
            AlgorithmArg::Ctc => Algorithm::CtcDriven,
            AlgorithmArg::Rnnt => Algorithm::RnntDriven,
        }
    }
}

const PRESET_HELP: &str = "Weight preset (mu_ctc, mu_rnnt, mu_att): \
att-driven-default (0.3, 0.3, 0.4), ctc-driven-default and rnnt-driven-default (0.1, 0.4, 0.5), \
ctc-rnnt, ctc-att, rnnt-att, balanced. The published triples are listed in an order that does \
not pin which algorithm each belongs to; these names fix one reading and every triple stays \
selectable. Defaults to the preset named after --algorithm.";

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    models: ModelArgs,
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    #[arg(long, default_value_t = 20)]
    k_beam: usize,
    /// Prebeam size [default: max(30, k-beam)].
    #[arg(long)]
    k_pre: Option<usize>,
    #[arg(long, help = PRESET_HELP, value_parser = parse_preset)]
    preset: Option<WeightPreset>,
    /// Overrides the preset's CTC weight.
    #[arg(long)]
    mu_ctc: Option<f64>,
    /// Overrides the preset's transducer weight.
    #[arg(long)]
    mu_rnnt: Option<f64>,
    /// Overrides the preset's attention weight.
    #[arg(long)]
    mu_att: Option<f64>,
    /// Score added per output token.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    n_best: usize,
    /// Output length cap [default: 2T label-synchronous, T otherwise].
    #[arg(long)]
    max_len: Option<usize>,
    /// Worker threads; bundles are decoded in parallel, each on one thread.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_preset(s: &str) -> Result<WeightPreset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long = "model", value_name = "PATH")]
    model: PathBuf,
    /// Longest sequence enumerated [default: frame count, lowered to the
    /// table context bound].
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Utterance bundles; without any, the built-in synthetic suite is used.
    #[arg(long = "model", value_name = "PATH")]
    models: Vec<PathBuf>,
    /// Sweep grid, e.g. "algorithms=att,ctc,rnnt;beams=1,2,4,8;weights=default".
    /// Weight entries: default, a preset name, rnnt-sweep, or ctc:rnnt:att.
    /// Further keys: k_pre, beta, max_len.
    #[arg(long, default_value = "")]
    grid: String,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

#[derive(Args)]
struct WeightsArgs {
    /// Best epochs of the four first-stage losses, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    epochs: Vec<i64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let mut inner = e.downcast_ref::<Error>();
    while let Some(Error::Sweep { source, .. }) = inner {
        inner = Some(source);
    }
    match inner {
        Some(Error::Usage(_)) => 2,
        Some(Error::Guard { .. }) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Decode(args) => decode(args, &mut out)?,
        Command::Oracle(args) => return oracle(args, &mut out),
        Command::Bench(args) => run_bench(args, &mut out)?,
        Command::Weights(args) => weights(args, &mut out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn decode(args: DecodeArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let algorithm = Algorithm::from(args.algorithm);
    let base = args.preset.unwrap_or(algorithm.default_preset()).weights();
    let weights = DecoderWeights::new(
        args.mu_ctc.unwrap_or(base.ctc),
        args.mu_rnnt.unwrap_or(base.rnnt),
        args.mu_att.unwrap_or(base.att),
        args.beta,
    )?;
    let mut cfg = SearchConfig::new(algorithm, weights)
        .beams(
            args.k_beam,
            args.k_pre.unwrap_or(DEFAULT_K_PRE.max(args.k_beam)),
        )
        .n_best(args.n_best);
    cfg.max_output_len = args.max_len;
    cfg.validate()?;
    if args.jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()).into());
    }

    let models = args.models.load()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()?;
    let lines = pool.install(|| {
        models
            .par_iter()
            .map(|m| Ok(search(m, &cfg)?.nbest.to_json(&m.vocab)?))
            .collect::<anyhow::Result<Vec<String>>>()
    })?;
    for line in lines {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn oracle(args: OracleArgs, out: &mut impl Write) -> anyhow::Result<ExitCode> {
    let models =
        Models::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let report = verify(&models, args.max_len)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    if report.all_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        for c in report.checks.iter().filter(|c| c.failed()) {
            eprintln!("check failed: {} (max abs err {:?})", c.name, c.max_abs_err);
        }
        Ok(ExitCode::from(1))
    }
}

fn run_bench(args: BenchArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let grid: SweepGrid = args.grid.parse()?;
    let utterances = if args.models.is_empty() {
        bench::synthetic_suite()?
            .into_iter()
            .map(|(u, _)| u)
            .collect()
    } else {
        args.models
            .iter()
            .map(|p| {
                let m = Models::load(p).with_context(|| format!("loading {}", p.display()))?;
                Ok(Utterance::new(p.display().to_string(), Arc::new(m))?)
            })
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    let records = bench::sweep(&grid, &utterances, args.repeats)?;
    bench::write_csv(&records, out)?;
    for (i, j) in bench::beam_regressions(&records) {
        let (a, b) = (&records[i], &records[j]);
        eprintln!(
            "warning: {} k_beam={} scored {:.6} below k_beam={} at {:.6}",
            a.algorithm, b.k_beam, b.mean_joint_score, a.k_beam, a.mean_joint_score
        );
    }
    Ok(())
}

fn weights(args: WeightsArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let Ok(epochs) = <[i64; 4]>::try_from(args.epochs.as_slice()) else {
        bail!(Error::Usage(format!(
            "--epochs needs 4 values, got {}",
            args.epochs.len()
        )));
    };
    let w = compute_stage2_weights(epochs)?;
    writeln!(out, "{} {} {} {}", w[0], w[1], w[2], w[3])?;
    Ok(())
}
