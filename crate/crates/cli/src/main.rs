use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use convest::experiment::{self, ExperimentConfig, ExperimentKind, ExperimentRecord};

/// Soft-output decoding experiments for binary convolutional codes.
#[derive(Parser)]
#[command(name = "convest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare exhaustive and forward-backward posteriors on random frames.
    OracleCheck(RunArgs),
    /// MAP vs. Viterbi bit error rate per SNR (CSV).
    Ber(RunArgs),
    /// Reliability bins of the MAP bit posteriors at one SNR (CSV).
    Calibrate(RunArgs),
    /// Change-of-measure checks on the channel likelihood ratio (JSON).
    Measure(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the output path; stdout when neither is set.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn summarize(record: &ExperimentRecord) -> Vec<String> {
    match record {
        ExperimentRecord::OracleCheck(r) => r
            .rows
            .iter()
            .map(|row| {
                format!(
                    "c={:<6} frames={} branch_dev={:.3e} bit_dev={:.3e} map_mismatches={} viterbi_gap={:.3e}",
                    row.c,
                    row.frames,
                    row.max_branch_deviation,
                    row.max_bit_deviation,
                    row.map_argmax_mismatches,
                    row.max_viterbi_metric_gap
                )
            })
            .collect(),
        ExperimentRecord::BerCurve(r) => r
            .rows
            .iter()
            .map(|row| {
                format!(
                    "snr_db={:<6} map_ber={:.4e} viterbi_ber={:.4e} oracle_mismatches={}",
                    row.snr_db, row.map_ber, row.viterbi_ber, row.oracle_mismatches
                )
            })
            .collect(),
        ExperimentRecord::AppCalibration(r) => r
            .bins
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| {
                format!(
                    "[{:.1},{:.1}) count={} predicted={:.4} empirical={:.4} {}",
                    b.lower,
                    b.upper,
                    b.count,
                    b.mean_predicted.unwrap_or(f64::NAN),
                    b.empirical_frequency.unwrap_or(f64::NAN),
                    if !b.checked {
                        "unchecked"
                    } else if b.pass {
                        "pass"
                    } else {
                        "FAIL"
                    }
                )
            })
            .collect(),
        ExperimentRecord::MeasureSuite(r) => {
            let rep = &r.report;
            let mut lines = Vec::new();
            let a = &rep.alpha_mean.estimate;
            lines.push(format!(
                "alpha_mean: {:.5} target {} se {:.2e} {}",
                a.value,
                a.target,
                a.std_error,
                verdict(a.pass)
            ));
            for m in [&rep.forward, &rep.reverse] {
                lines.push(format!(
                    "{}: {} estimates, {} failures, ess {:.0} {}",
                    m.test,
                    m.estimates().count(),
                    m.failures(),
                    m.effective_sample_size,
                    verdict(m.passed)
                ));
            }
            for cf in &rep.char_fn {
                lines.push(format!(
                    "char_fn xi={:?}: {:.5}{:+.5}i target {:.5} se {:.2e} {}",
                    cf.xi,
                    cf.estimate_re,
                    cf.estimate_im,
                    cf.target,
                    cf.std_error,
                    verdict(cf.pass)
                ));
            }
            lines
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<bool> {
    let mut config =
        ExperimentConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output = Some(out);
    }
    let start = Instant::now();
    let record = experiment::run(kind, &config)?;
    let elapsed = start.elapsed();
    let bytes = record.to_bytes()?;
    match &config.output {
        Some(path) => std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    for line in summarize(&record) {
        eprintln!("{line}");
    }
    eprintln!("{} in {:.3} s", if record.passed() { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    Ok(record.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::OracleCheck(a) => (ExperimentKind::OracleCheck, a),
        Command::Ber(a) => (ExperimentKind::BerCurve, a),
        Command::Calibrate(a) => (ExperimentKind::AppCalibration, a),
        Command::Measure(a) => (ExperimentKind::MeasureSuite, a),
    };
    match run(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
