//! Reproducible experiments: oracle equivalence, BER curves, APP
//! calibration and the measure-change suite.
//!
//! Frames are simulated in parallel with per-frame seeds derived from the
//! master seed and reduced in frame order, so identical configs produce
//! byte-identical records.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{map_bpsk, snr_to_c, transmit, ObservationSeq};
use crate::code::{encode, BitSeq, GeneratorSpec, Mode, Trellis};
use crate::exact::{ExactOracle, MAX_EXACT_FREE_BITS};
use crate::measure::{run_suite, LabSetup, MeasureSuiteReport};
use crate::recursive::ForwardBackward;
use crate::rng::{derive_seed, random_bit, rng_from_seed};
use crate::viterbi::ml_decode;
use crate::{Error, Result};

/// Version tag of every serialized record.
pub const RECORD_SCHEMA: &str = "convest.record/1";

/// Oracle-check thresholds.
pub const POSTERIOR_TOLERANCE: f64 = 1e-9;
pub const BRANCH_NORMALIZATION_TOLERANCE: f64 = 1e-9;
pub const BIT_SUM_TOLERANCE: f64 = 1e-12;
pub const VITERBI_METRIC_TOLERANCE: f64 = 1e-12;
/// BER runs compare MAP decisions with the exact oracle when the frame is
/// at most this deep.
pub const SPOT_CHECK_MAX_DEPTH: usize = 14;
/// Frames per SNR that are spot-checked against the oracle.
pub const SPOT_CHECK_FRAMES: usize = 20;
/// Calibration bins, their minimum populated count and tolerance.
pub const CALIBRATION_BINS: usize = 10;
pub const CALIBRATION_MIN_COUNT: usize = 500;
pub const CALIBRATION_TOLERANCE: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    OracleCheck,
    BerCurve,
    AppCalibration,
    MeasureSuite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    /// Octal generator taps, e.g. `"7,5"`.
    pub taps: String,
    /// Memory; inferred from the widest tap when absent.
    #[serde(default)]
    pub nu: Option<usize>,
    /// Outputs per input bit; checked against the tap count when present.
    #[serde(default)]
    pub n0: Option<usize>,
}

impl CodeConfig {
    pub fn spec(&self) -> Result<GeneratorSpec> {
        let spec = match self.nu {
            Some(nu) => GeneratorSpec::from_octal_with_memory(&self.taps, nu)?,
            None => GeneratorSpec::from_octal(&self.taps)?,
        };
        if let Some(n0) = self.n0 {
            if n0 != spec.n0() {
                return Err(Error::Spec(format!("n0 = {n0} but {} taps given", spec.n0())));
            }
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default = "MeasureConfig::default_depth")]
    pub depth: usize,
    #[serde(default = "MeasureConfig::default_c")]
    pub c: f64,
    #[serde(default = "MeasureConfig::default_trials")]
    pub trials: usize,
    #[serde(default = "MeasureConfig::default_alpha_trials")]
    pub alpha_trials: usize,
}

impl MeasureConfig {
    fn default_depth() -> usize {
        4
    }
    fn default_c() -> f64 {
        0.5
    }
    fn default_trials() -> usize {
        100_000
    }
    fn default_alpha_trials() -> usize {
        200_000
    }
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            depth: Self::default_depth(),
            c: Self::default_c(),
            trials: Self::default_trials(),
            alpha_trials: Self::default_alpha_trials(),
        }
    }
}

fn default_mode() -> Mode {
    Mode::Terminated
}

/// Everything needed to reproduce an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    pub code: CodeConfig,
    /// Information bits per frame, `L`.
    #[serde(default = "ExperimentConfig::default_frame_length")]
    pub frame_length: usize,
    /// Es/N0 values in dB.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    /// Channel gains `c`, used by the oracle check instead of `snr_db`.
    #[serde(default)]
    pub channel_gains: Vec<f64>,
    #[serde(default = "ExperimentConfig::default_frames")]
    pub frames: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub measure: MeasureConfig,
}

impl ExperimentConfig {
    fn default_frame_length() -> usize {
        10
    }
    fn default_frames() -> usize {
        100
    }

    /// A config with defaults for everything but the code.
    pub fn new(taps: &str) -> Self {
        Self {
            kind: None,
            code: CodeConfig { taps: taps.to_string(), nu: None, n0: None },
            frame_length: Self::default_frame_length(),
            snr_db: Vec::new(),
            channel_gains: Vec::new(),
            frames: Self::default_frames(),
            seed: 0,
            mode: Mode::Terminated,
            output: None,
            measure: MeasureConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<GeneratorSpec> {
        if self.frame_length == 0 {
            return Err(Error::Config("frame_length must be at least 1".into()));
        }
        self.code.spec()
    }

    fn depth(&self, spec: &GeneratorSpec) -> usize {
        self.mode.total_depth(self.frame_length, spec.nu())
    }
}

/// Random frame: information bits and the observations they produce.
struct Frame {
    info: Vec<u8>,
    z: ObservationSeq,
}

fn simulate_frame(trellis: &Trellis, info_len: usize, mode: Mode, c: f64, seed: u64) -> Result<Frame> {
    let mut rng = rng_from_seed(seed);
    let info: Vec<u8> = (0..info_len).map(|_| random_bit(&mut rng)).collect();
    let cw = encode(trellis.spec(), &BitSeq::information(info.clone())?, mode == Mode::Terminated)?;
    let signal = map_bpsk(&cw, trellis.n0())?;
    let (z, _) = transmit(&signal, c, derive_seed(seed, u64::MAX));
    Ok(Frame { info, z })
}

/// Per-gain summary of an oracle check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub c: f64,
    pub frames: usize,
    pub max_branch_deviation: f64,
    pub max_bit_deviation: f64,
    pub max_branch_normalization_error: f64,
    pub max_bit_sum_error: f64,
    pub map_argmax_mismatches: usize,
    pub max_viterbi_metric_gap: f64,
    pub viterbi_invalid_codewords: usize,
    pub exact_sequence_metric_evals: u64,
    pub max_recursive_branch_metric_evals: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckRecord {
    pub schema: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub depth: usize,
    pub codewords: usize,
    pub rows: Vec<OracleRow>,
    pub passed: bool,
}

#[derive(Default)]
struct OracleFrame {
    branch_dev: f64,
    bit_dev: f64,
    branch_norm: f64,
    bit_sum: f64,
    mismatches: usize,
    viterbi_gap: f64,
    viterbi_invalid: usize,
    exact_evals: u64,
    recursive_evals: u64,
}

fn gains(config: &ExperimentConfig) -> Result<Vec<f64>> {
    if !config.channel_gains.is_empty() {
        if let Some(c) = config.channel_gains.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::Config(format!("channel gain {c} must be finite and non-negative")));
        }
        return Ok(config.channel_gains.clone());
    }
    if config.snr_db.is_empty() {
        return Err(Error::Config("either channel_gains or snr_db must be given".into()));
    }
    Ok(config.snr_db.iter().map(|&s| snr_to_c(s)).collect())
}

/// Runs the exact and recursive estimators side by side on random frames.
pub fn run_oracle_check(config: &ExperimentConfig) -> Result<OracleCheckRecord> {
    let spec = config.validate()?;
    let n = config.depth(&spec);
    if config.frame_length + spec.nu() > MAX_EXACT_FREE_BITS {
        return Err(Error::EnumerationTooLarge {
            free_bits: config.frame_length + spec.nu(),
            cap: MAX_EXACT_FREE_BITS,
        });
    }
    let gains = gains(config)?;
    let trellis = Trellis::new(spec);
    let oracle = ExactOracle::new(&trellis, n, config.mode)?;
    let mut rows = Vec::with_capacity(gains.len());
    for (gi, &c) in gains.iter().enumerate() {
        let gain_seed = derive_seed(config.seed, gi as u64);
        let frames = (0..config.frames)
            .into_par_iter()
            .map(|f| oracle_frame(&trellis, &oracle, config, c, derive_seed(gain_seed, f as u64)))
            .collect::<Result<Vec<_>>>()?;
        let mut row = OracleRow {
            c,
            frames: frames.len(),
            max_branch_deviation: 0.0,
            max_bit_deviation: 0.0,
            max_branch_normalization_error: 0.0,
            max_bit_sum_error: 0.0,
            map_argmax_mismatches: 0,
            max_viterbi_metric_gap: 0.0,
            viterbi_invalid_codewords: 0,
            exact_sequence_metric_evals: 0,
            max_recursive_branch_metric_evals: 0,
        };
        for f in frames {
            row.max_branch_deviation = row.max_branch_deviation.max(f.branch_dev);
            row.max_bit_deviation = row.max_bit_deviation.max(f.bit_dev);
            row.max_branch_normalization_error = row.max_branch_normalization_error.max(f.branch_norm);
            row.max_bit_sum_error = row.max_bit_sum_error.max(f.bit_sum);
            row.map_argmax_mismatches += f.mismatches;
            row.max_viterbi_metric_gap = row.max_viterbi_metric_gap.max(f.viterbi_gap);
            row.viterbi_invalid_codewords += f.viterbi_invalid;
            row.exact_sequence_metric_evals = row.exact_sequence_metric_evals.max(f.exact_evals);
            row.max_recursive_branch_metric_evals = row.max_recursive_branch_metric_evals.max(f.recursive_evals);
        }
        rows.push(row);
    }
    let passed = rows.iter().all(|r| {
        r.max_branch_deviation < POSTERIOR_TOLERANCE
            && r.max_bit_deviation < POSTERIOR_TOLERANCE
            && r.max_branch_normalization_error <= BRANCH_NORMALIZATION_TOLERANCE
            && r.max_bit_sum_error <= BIT_SUM_TOLERANCE
            && r.map_argmax_mismatches == 0
            && r.max_viterbi_metric_gap <= VITERBI_METRIC_TOLERANCE
            && r.viterbi_invalid_codewords == 0
    });
    Ok(OracleCheckRecord {
        schema: RECORD_SCHEMA.into(),
        kind: ExperimentKind::OracleCheck,
        config: config.clone(),
        depth: n,
        codewords: oracle.num_codewords(),
        rows,
        passed,
    })
}

fn oracle_frame(
    trellis: &Trellis,
    oracle: &ExactOracle<'_>,
    config: &ExperimentConfig,
    c: f64,
    seed: u64,
) -> Result<OracleFrame> {
    let frame = simulate_frame(trellis, config.frame_length, config.mode, c, seed)?;
    let eval = oracle.evaluate(&frame.z, c)?;
    let exact = eval.table()?;
    let fb = ForwardBackward::run(trellis, &frame.z, c, config.mode)?;
    let rec = fb.table()?;
    let (branch_dev, bit_dev) = exact.max_abs_deviation(&rec)?;
    let map = fb.decode()?;
    let mismatches = map.bits().iter().zip(exact.decisions()).filter(|(a, b)| **a != *b).count();
    let ml = ml_decode(trellis, &frame.z, c, config.mode)?;
    let (_, best) = eval.max_log_metric();
    let reencoded = encode(trellis.spec(), &ml.info, config.mode == Mode::Terminated)?;
    Ok(OracleFrame {
        branch_dev,
        bit_dev,
        branch_norm: exact.max_branch_normalization_error().max(rec.max_branch_normalization_error()),
        bit_sum: exact.max_bit_sum_error().max(rec.max_bit_sum_error()),
        mismatches,
        viterbi_gap: (ml.metric - best).abs(),
        viterbi_invalid: (reencoded != ml.codeword) as usize,
        exact_evals: eval.op_count().sequence_metric_evals,
        recursive_evals: fb.op_count().branch_metric_evals,
    })
}

/// One SNR point of a BER curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub snr_db: f64,
    pub c: f64,
    pub frames: usize,
    pub info_bits: u64,
    pub map_bit_errors: u64,
    pub viterbi_bit_errors: u64,
    pub map_ber: f64,
    pub viterbi_ber: f64,
    pub oracle_checked_frames: usize,
    pub oracle_mismatches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub schema: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub rows: Vec<BerRow>,
    pub passed: bool,
}

/// MAP vs. Viterbi information-bit error rates per SNR. Tail bits are not
/// counted.
pub fn run_ber_curve(config: &ExperimentConfig) -> Result<BerRecord> {
    let spec = config.validate()?;
    if config.snr_db.is_empty() {
        return Err(Error::Config("ber_curve needs a non-empty snr_db list".into()));
    }
    let n = config.depth(&spec);
    let trellis = Trellis::new(spec);
    let spot_oracle = if n <= SPOT_CHECK_MAX_DEPTH { Some(ExactOracle::new(&trellis, n, config.mode)?) } else { None };
    let mut rows = Vec::with_capacity(config.snr_db.len());
    for (si, &snr_db) in config.snr_db.iter().enumerate() {
        let c = snr_to_c(snr_db);
        let snr_seed = derive_seed(config.seed, si as u64);
        let frames = (0..config.frames)
            .into_par_iter()
            .map(|f| -> Result<(u64, u64, Option<usize>)> {
                let frame =
                    simulate_frame(&trellis, config.frame_length, config.mode, c, derive_seed(snr_seed, f as u64))?;
                let fb = ForwardBackward::run(&trellis, &frame.z, c, config.mode)?;
                let map = fb.decode()?;
                let ml = ml_decode(&trellis, &frame.z, c, config.mode)?;
                let errs = |bits: &[u8]| bits.iter().zip(&frame.info).filter(|(a, b)| a != b).count() as u64;
                let spot = match &spot_oracle {
                    Some(o) if f < SPOT_CHECK_FRAMES => {
                        let exact = o.evaluate(&frame.z, c)?.table()?.decisions();
                        Some(exact.iter().zip(map.bits()).filter(|(a, b)| a != b).count())
                    }
                    _ => None,
                };
                Ok((errs(map.bits()), errs(ml.info.bits()), spot))
            })
            .collect::<Result<Vec<_>>>()?;
        let info_bits = (config.frames * config.frame_length) as u64;
        let map_bit_errors: u64 = frames.iter().map(|f| f.0).sum();
        let viterbi_bit_errors: u64 = frames.iter().map(|f| f.1).sum();
        let ber = |e: u64| if info_bits == 0 { 0.0 } else { e as f64 / info_bits as f64 };
        rows.push(BerRow {
            snr_db,
            c,
            frames: config.frames,
            info_bits,
            map_bit_errors,
            viterbi_bit_errors,
            map_ber: ber(map_bit_errors),
            viterbi_ber: ber(viterbi_bit_errors),
            oracle_checked_frames: frames.iter().filter(|f| f.2.is_some()).count(),
            oracle_mismatches: frames.iter().filter_map(|f| f.2).sum(),
        });
    }
    let passed = rows.iter().all(|r| r.oracle_mismatches == 0);
    Ok(BerRecord { schema: RECORD_SCHEMA.into(), kind: ExperimentKind::BerCurve, config: config.clone(), rows, passed })
}

/// One bin of predicted `P(i_l = 0 | Z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    /// Mean predicted probability; `None` for an empty bin.
    pub mean_predicted: Option<f64>,
    /// Fraction of bits in the bin that were actually 0; `None` if empty.
    pub empirical_frequency: Option<f64>,
    /// Whether the bin has enough samples to be judged.
    pub checked: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub schema: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub snr_db: f64,
    pub c: f64,
    pub bins: Vec<CalibrationBin>,
    pub passed: bool,
}

fn bin_of(p: f64) -> usize {
    ((p * CALIBRATION_BINS as f64) as usize).min(CALIBRATION_BINS - 1)
}

/// Bins the MAP bit posteriors and compares each bin's mean prediction
/// with the observed frequency of zeros.
pub fn run_app_calibration(config: &ExperimentConfig) -> Result<CalibrationRecord> {
    let spec = config.validate()?;
    let [snr_db] = config.snr_db[..] else {
        return Err(Error::Config(format!("app_calibration needs exactly one SNR, got {}", config.snr_db.len())));
    };
    let c = snr_to_c(snr_db);
    let trellis = Trellis::new(spec);
    // Per frame: (count, sum of predictions, zeros) per bin.
    let per_frame = (0..config.frames)
        .into_par_iter()
        .map(|f| -> Result<Vec<(u64, f64, u64)>> {
            let frame =
                simulate_frame(&trellis, config.frame_length, config.mode, c, derive_seed(config.seed, f as u64))?;
            let fb = ForwardBackward::run(&trellis, &frame.z, c, config.mode)?;
            let mut bins = vec![(0u64, 0.0f64, 0u64); CALIBRATION_BINS];
            for (l, &bit) in frame.info.iter().enumerate() {
                let p0 = fb.bit_posterior(l + 1)?.p0;
                let b = &mut bins[bin_of(p0)];
                b.0 += 1;
                b.1 += p0;
                b.2 += (bit == 0) as u64;
            }
            Ok(bins)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut totals = vec![(0u64, 0.0f64, 0u64); CALIBRATION_BINS];
    for frame in &per_frame {
        for (t, b) in totals.iter_mut().zip(frame) {
            t.0 += b.0;
            t.1 += b.1;
            t.2 += b.2;
        }
    }
    let bins: Vec<CalibrationBin> = totals
        .iter()
        .enumerate()
        .map(|(i, &(count, sum, zeros))| {
            let (mean_predicted, empirical_frequency) =
                if count == 0 { (None, None) } else { (Some(sum / count as f64), Some(zeros as f64 / count as f64)) };
            let checked = count as usize >= CALIBRATION_MIN_COUNT;
            let pass =
                !checked || (empirical_frequency.unwrap() - mean_predicted.unwrap()).abs() <= CALIBRATION_TOLERANCE;
            CalibrationBin {
                lower: i as f64 / CALIBRATION_BINS as f64,
                upper: (i + 1) as f64 / CALIBRATION_BINS as f64,
                count,
                mean_predicted,
                empirical_frequency,
                checked,
                pass,
            }
        })
        .collect();
    let passed = bins.iter().all(|b| b.pass);
    Ok(CalibrationRecord {
        schema: RECORD_SCHEMA.into(),
        kind: ExperimentKind::AppCalibration,
        config: config.clone(),
        snr_db,
        c,
        bins,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureRecord {
    pub schema: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub report: MeasureSuiteReport,
    pub passed: bool,
}

/// Runs every measure-change check; refuses setups outside the guard.
pub fn run_measure_suite(config: &ExperimentConfig) -> Result<MeasureRecord> {
    let spec = config.code.spec()?;
    let m = &config.measure;
    let setup = LabSetup::new(&spec, m.depth, config.mode, m.c)?;
    let report = run_suite(&setup, m.alpha_trials, m.trials, config.seed)?;
    let passed = report.passed;
    Ok(MeasureRecord {
        schema: RECORD_SCHEMA.into(),
        kind: ExperimentKind::MeasureSuite,
        config: config.clone(),
        report,
        passed,
    })
}

/// Any experiment record.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentRecord {
    OracleCheck(OracleCheckRecord),
    BerCurve(BerRecord),
    AppCalibration(CalibrationRecord),
    MeasureSuite(MeasureRecord),
}

impl ExperimentRecord {
    pub fn passed(&self) -> bool {
        match self {
            Self::OracleCheck(r) => r.passed,
            Self::BerCurve(r) => r.passed,
            Self::AppCalibration(r) => r.passed,
            Self::MeasureSuite(r) => r.passed,
        }
    }

    /// Serialized output: JSON for reports, CSV (with `#` provenance lines)
    /// for curves and bins.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        match self {
            Self::OracleCheck(r) => json_bytes(r),
            Self::MeasureSuite(r) => json_bytes(r),
            Self::BerCurve(r) => {
                let mut out = csv_preamble(&r.config, r.passed)?;
                let mut w = csv::Writer::from_writer(Vec::new());
                for row in &r.rows {
                    w.serialize(row)?;
                }
                out.push_str(std::str::from_utf8(&w.into_inner().map_err(|e| e.into_error())?).expect("utf8"));
                Ok(out.into_bytes())
            }
            Self::AppCalibration(r) => {
                let mut out = csv_preamble(&r.config, r.passed)?;
                writeln!(out, "# snr_db={:?} c={:?}", r.snr_db, r.c).expect("string write");
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record([
                    "lower",
                    "upper",
                    "count",
                    "mean_predicted",
                    "empirical_frequency",
                    "checked",
                    "pass",
                ])?;
                for b in &r.bins {
                    let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
                    w.write_record([
                        format!("{:?}", b.lower),
                        format!("{:?}", b.upper),
                        b.count.to_string(),
                        opt(b.mean_predicted),
                        opt(b.empirical_frequency),
                        b.checked.to_string(),
                        b.pass.to_string(),
                    ])?;
                }
                out.push_str(std::str::from_utf8(&w.into_inner().map_err(|e| e.into_error())?).expect("utf8"));
                Ok(out.into_bytes())
            }
        }
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_preamble(config: &ExperimentConfig, passed: bool) -> Result<String> {
    Ok(format!("# schema={RECORD_SCHEMA}\n# config={}\n# passed={passed}\n", serde_json::to_string(config)?))
}

/// Runs the experiment named by `kind`.
pub fn run(kind: ExperimentKind, config: &ExperimentConfig) -> Result<ExperimentRecord> {
    if let Some(k) = config.kind {
        if k != kind {
            return Err(Error::Config(format!("config is for {k:?}, not {kind:?}")));
        }
    }
    Ok(match kind {
        ExperimentKind::OracleCheck => ExperimentRecord::OracleCheck(run_oracle_check(config)?),
        ExperimentKind::BerCurve => ExperimentRecord::BerCurve(run_ber_curve(config)?),
        ExperimentKind::AppCalibration => ExperimentRecord::AppCalibration(run_app_calibration(config)?),
        ExperimentKind::MeasureSuite => ExperimentRecord::MeasureSuite(run_measure_suite(config)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new("7,5");
        cfg.frame_length = 6;
        cfg.frames = 10;
        cfg.channel_gains = vec![0.0, 1.0, 2.0];
        cfg.seed = 3;
        cfg
    }

    #[test]
    fn oracle_check_small() {
        let r = run_oracle_check(&oracle_config()).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.codewords, 64);
        assert!(r.rows.iter().all(|row| row.exact_sequence_metric_evals == 64));
    }

    #[test]
    fn oracle_check_zero_frames_and_cap() {
        let mut cfg = oracle_config();
        cfg.frames = 0;
        let r = run_oracle_check(&cfg).unwrap();
        assert!(r.passed);
        assert!(r.rows.iter().all(|row| row.frames == 0));
        cfg.frame_length = 28;
        assert!(matches!(run_oracle_check(&cfg), Err(Error::EnumerationTooLarge { .. })));
    }

    #[test]
    fn ber_needs_snr() {
        let cfg = ExperimentConfig::new("7,5");
        assert!(run_ber_curve(&cfg).is_err());
    }

    #[test]
    fn calibration_empty_bins_and_zero_gain() {
        let mut cfg = ExperimentConfig::new("7,5");
        cfg.snr_db = vec![f64::NEG_INFINITY];
        cfg.frames = 20;
        let r = run_app_calibration(&cfg).unwrap();
        assert_eq!(r.c, 0.0);
        // Uniform prior: every P0 is exactly 1/2.
        assert_eq!(r.bins[5].count, 200);
        assert!(r.bins.iter().enumerate().all(|(i, b)| i == 5 || (b.count == 0 && b.mean_predicted.is_none())));
        cfg.snr_db = vec![0.0, 1.0];
        assert!(run_app_calibration(&cfg).is_err());
    }

    #[test]
    fn measure_guard() {
        let mut cfg = ExperimentConfig::new("7,5");
        cfg.measure.c = 3.0;
        cfg.measure.depth = 20;
        assert!(matches!(run_measure_suite(&cfg), Err(Error::Guard(_))));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let mut cfg = oracle_config();
        cfg.kind = Some(ExperimentKind::BerCurve);
        assert!(run(ExperimentKind::OracleCheck, &cfg).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            kind = "ber_curve"
            frame_length = 32
            snr_db = [0.0, 2.0]
            frames = 5
            seed = 9
            mode = "truncated"
            [code]
            taps = "7,5"
            [measure]
            c = 0.25
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.kind, Some(ExperimentKind::BerCurve));
        assert_eq!(cfg.mode, Mode::Truncated);
        assert_eq!(cfg.measure.depth, 4);
        assert_eq!(cfg.measure.c, 0.25);
        assert!(ExperimentConfig::from_toml("[code]\ntaps=\"7,5\"\nbogus=1\n").is_err());
    }
}
