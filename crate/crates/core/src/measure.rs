//! Monte-Carlo checks of the change of measure between the channel law `P`
//! and the reference law `Q` with `dQ/dP = alpha_n`.
//!
//! - `E_P[alpha_n] = 1`.
//! - Under `Q` (simulate under `P`, weight by `alpha_n`) the observations are
//!   i.i.d. standard normal and independent of the code symbols.
//! - Conversely, simulating `Z` under `Q` and weighting by `beta_n = 1/alpha_n`
//!   makes `W = Z - cX` standard normal and independent of `X`.
//! - The `alpha`-weighted characteristic function of `Z` is `exp(-|xi|^2/2)`.
//!
//! Moment estimates use self-normalised weights; their standard errors use
//! the delta-method form `sqrt(sum_i w_i^2 (f_i - mean)^2)` with `w`
//! normalised to sum 1.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_q_observations, transmit, ObservationSeq, SignalSeq};
use crate::code::{GeneratorSpec, Mode, Trellis};
use crate::metric::{alpha_log_raw, beta_log_raw};
use crate::rng::{derive_seed, random_bit, rng_from_seed};
use crate::{Error, Result};

/// Largest allowed `c^2 n0 n`, the log-variance of `alpha_n`.
pub const GUARD_EXPONENT: f64 = 16.0;
/// Fewest trials accepted by the estimators.
pub const MIN_TRIALS: usize = 1_000;
/// Effective sample sizes below this are flagged in reports.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 50.0;
/// Tolerance, in standard errors, of the martingale-mean check.
pub const ALPHA_MEAN_TOLERANCE_SE: f64 = 4.0;
/// Tolerance, in standard errors, of every moment and characteristic-function check.
pub const MOMENT_TOLERANCE_SE: f64 = 5.0;
/// Largest allowed `|xi_j|`.
pub const MAX_XI: f64 = 3.0;

/// Code, section length and channel gain of a measure-change experiment.
#[derive(Clone, Debug)]
pub struct LabSetup {
    trellis: Trellis,
    depth: usize,
    mode: Mode,
    c: f64,
}

impl LabSetup {
    pub fn new(spec: &GeneratorSpec, depth: usize, mode: Mode, c: f64) -> Result<Self> {
        mode.free_bits(depth, spec.nu())?;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Guard(format!("channel gain {c} must be finite and non-negative")));
        }
        let exponent = c * c * (spec.n0() * depth) as f64;
        if exponent > GUARD_EXPONENT {
            return Err(Error::Guard(format!(
                "c^2 n0 n = {exponent} exceeds {GUARD_EXPONENT}; alpha_n is lognormal with that log-variance \
                 and the weighted estimates would be dominated by a handful of trials"
            )));
        }
        Ok(Self { trellis: Trellis::new(spec.clone()), depth, mode, c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of real coordinates in one stacked observation, `n * n0`.
    pub fn dim(&self) -> usize {
        self.depth * self.trellis.n0()
    }

    /// Uniformly random codeword, mapped to BPSK.
    fn random_signal<R: Rng>(&self, rng: &mut R) -> SignalSeq {
        let free = self.mode.free_bits(self.depth, self.trellis.nu()).expect("checked in new");
        let info: Vec<u8> = (0..free).map(|_| random_bit(rng)).collect();
        let inputs = self.trellis.inputs_for(&info, self.mode);
        let n0 = self.trellis.n0();
        let values = self
            .trellis
            .walk(&inputs)
            .into_iter()
            .flat_map(|t| (0..n0).map(move |i| if (t.label >> i) & 1 == 0 { 1.0 } else { -1.0 }))
            .collect();
        SignalSeq::new(n0, values).expect("n0-aligned")
    }

    fn check_trials(&self, trials: usize) -> Result<()> {
        if trials < MIN_TRIALS {
            return Err(Error::Guard(format!("need at least {MIN_TRIALS} trials, got {trials}")));
        }
        Ok(())
    }
}

/// One importance-weighted trial.
#[derive(Clone, Debug)]
pub struct WeightedSample {
    /// Log of the unnormalised weight (`log alpha_n` or `log beta_n`).
    pub log_weight: f64,
    pub signal: SignalSeq,
    pub observation: ObservationSeq,
}

/// Trials simulated under `P` (`Z = cX + W`), weighted by `alpha_n`.
pub fn draw_under_p(setup: &LabSetup, trials: usize, seed: u64) -> Vec<WeightedSample> {
    let mut rng = rng_from_seed(seed);
    (0..trials)
        .map(|i| {
            let signal = setup.random_signal(&mut rng);
            let (observation, noise) = transmit(&signal, setup.c, derive_seed(seed, i as u64));
            let log_weight = alpha_log_raw(signal.values(), noise.values(), setup.c);
            WeightedSample { log_weight, signal, observation }
        })
        .collect()
}

/// Trials with `Z` i.i.d. standard normal (law under `Q`) and `X` an
/// independent uniform codeword, weighted by `beta_n`.
pub fn draw_under_q(setup: &LabSetup, trials: usize, seed: u64) -> Vec<WeightedSample> {
    let mut rng = rng_from_seed(seed);
    let n0 = setup.trellis.n0();
    (0..trials)
        .map(|i| {
            let signal = setup.random_signal(&mut rng);
            let observation = sample_q_observations(setup.depth, n0, derive_seed(seed, i as u64));
            let log_weight = beta_log_raw(signal.values(), observation.values(), setup.c);
            WeightedSample { log_weight, signal, observation }
        })
        .collect()
}

/// Self-normalised weights of a sample.
struct Weights {
    /// `exp(log_weight - max)`.
    raw: Vec<f64>,
    total: f64,
}

impl Weights {
    fn from_samples(samples: &[WeightedSample]) -> Self {
        let max = samples.iter().map(|s| s.log_weight).fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = samples.iter().map(|s| (s.log_weight - max).exp()).collect();
        let total = raw.iter().sum();
        Self { raw, total }
    }

    fn effective_sample_size(&self) -> f64 {
        let sq: f64 = self.raw.iter().map(|w| w * w).sum();
        self.total * self.total / sq
    }

    /// Weighted mean of `f` and its standard error.
    fn mean(&self, f: impl Fn(usize) -> f64) -> (f64, f64) {
        let values: Vec<f64> = (0..self.raw.len()).map(f).collect();
        let num: f64 = self.raw.iter().zip(&values).map(|(w, v)| w * v).sum();
        let mean = num / self.total;
        let var: f64 = self.raw.iter().zip(&values).map(|(w, v)| w * w * (v - mean) * (v - mean)).sum();
        (mean, var.sqrt() / self.total)
    }
}

/// One estimated quantity with its target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub std_error: f64,
    pub tolerance_se: f64,
    pub pass: bool,
}

impl Estimate {
    fn new(name: String, value: f64, target: f64, std_error: f64, tolerance_se: f64) -> Self {
        let pass = (value - target).abs() <= tolerance_se * std_error;
        Self { name, value, target, std_error, tolerance_se, pass }
    }
}

/// `E_P[alpha_n]` estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaMeanReport {
    pub trials: usize,
    pub estimate: Estimate,
}

/// Draws `trials` (codeword, noise) pairs and averages `alpha_n`.
pub fn estimate_alpha_mean(setup: &LabSetup, trials: usize, seed: u64) -> Result<AlphaMeanReport> {
    setup.check_trials(trials)?;
    let alphas: Vec<f64> = draw_under_p(setup, trials, seed).iter().map(|s| s.log_weight.exp()).collect();
    let m = trials as f64;
    let mean = alphas.iter().sum::<f64>() / m;
    let var = alphas.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (m - 1.0);
    let se = (var / m).sqrt();
    Ok(AlphaMeanReport {
        trials,
        estimate: Estimate::new("mean(alpha_n)".into(), mean, 1.0, se, ALPHA_MEAN_TOLERANCE_SE),
    })
}

/// Weighted moment battery of one test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub test: String,
    pub trials: usize,
    pub dim: usize,
    pub effective_sample_size: f64,
    pub low_effective_sample_size: bool,
    /// Per-coordinate means, target 0.
    pub means: Vec<Estimate>,
    /// Upper-triangular covariance entries, target identity.
    pub covariances: Vec<Estimate>,
    /// Correlation of every code-symbol coordinate with every noise or
    /// observation coordinate, target 0.
    pub cross_correlations: Vec<Estimate>,
    /// Worst `|log alpha_n + log beta_n|` over trials, when checked.
    pub max_log_identity_error: Option<f64>,
    pub passed: bool,
}

impl MomentReport {
    pub fn estimates(&self) -> impl Iterator<Item = &Estimate> {
        self.means.iter().chain(&self.covariances).chain(&self.cross_correlations)
    }

    pub fn failures(&self) -> usize {
        self.estimates().filter(|e| !e.pass).count()
    }
}

/// Moments of `vectors[i]` (each of length `dim`) and their correlation
/// with `signals[i]`, weighted by `w`.
#[allow(clippy::needless_range_loop)]
fn moment_battery(
    test: &str,
    weights: &Weights,
    vectors: &[&[f64]],
    signals: &[&[f64]],
    var_name: &str,
) -> MomentReport {
    let dim = vectors.first().map_or(0, |v| v.len());
    let tol = MOMENT_TOLERANCE_SE;
    let mut means = Vec::with_capacity(dim);
    let mut mu = Vec::with_capacity(dim);
    for j in 0..dim {
        let (m, se) = weights.mean(|i| vectors[i][j]);
        mu.push(m);
        means.push(Estimate::new(format!("E[{var_name}{}]", j + 1), m, 0.0, se, tol));
    }
    let mut covariances = Vec::new();
    let mut sd = vec![0.0; dim];
    for j in 0..dim {
        for k in j..dim {
            let (v, se) = weights.mean(|i| (vectors[i][j] - mu[j]) * (vectors[i][k] - mu[k]));
            if j == k {
                sd[j] = v.max(0.0).sqrt();
            }
            let target = if j == k { 1.0 } else { 0.0 };
            covariances.push(Estimate::new(
                format!("Cov[{var_name}{},{var_name}{}]", j + 1, k + 1),
                v,
                target,
                se,
                tol,
            ));
        }
    }
    let mut cross_correlations = Vec::new();
    let sdim = signals.first().map_or(0, |v| v.len());
    for a in 0..sdim {
        let (mx, _) = weights.mean(|i| signals[i][a]);
        let (vx, _) = weights.mean(|i| (signals[i][a] - mx) * (signals[i][a] - mx));
        for j in 0..dim {
            let name = format!("Corr[X{},{var_name}{}]", a + 1, j + 1);
            if vx <= 1e-12 {
                // A constant code symbol is trivially independent.
                cross_correlations.push(Estimate::new(name, 0.0, 0.0, 0.0, tol));
                continue;
            }
            let (cov, se) = weights.mean(|i| (signals[i][a] - mx) * (vectors[i][j] - mu[j]));
            let scale = vx.sqrt() * sd[j];
            cross_correlations.push(Estimate::new(name, cov / scale, 0.0, se / scale, tol));
        }
    }
    let ess = weights.effective_sample_size();
    let mut report = MomentReport {
        test: test.to_string(),
        trials: weights.raw.len(),
        dim,
        effective_sample_size: ess,
        low_effective_sample_size: ess < MIN_EFFECTIVE_SAMPLES,
        means,
        covariances,
        cross_correlations,
        max_log_identity_error: None,
        passed: false,
    };
    report.passed = !report.low_effective_sample_size && report.failures() == 0;
    report
}

/// Simulates under `P`, weights by `alpha_n`, and checks that the stacked
/// observations look standard normal and independent of the code symbols.
pub fn girsanov_forward_test(setup: &LabSetup, trials: usize, seed: u64) -> Result<MomentReport> {
    setup.check_trials(trials)?;
    let samples = draw_under_p(setup, trials, seed);
    let weights = Weights::from_samples(&samples);
    let z: Vec<&[f64]> = samples.iter().map(|s| s.observation.values()).collect();
    let x: Vec<&[f64]> = samples.iter().map(|s| s.signal.values()).collect();
    Ok(moment_battery("girsanov_forward", &weights, &z, &x, "Z"))
}

/// Samples `Z` under `Q`, weights by `beta_n`, and checks that
/// `W = Z - cX` looks standard normal and independent of the code symbols.
pub fn girsanov_reverse_test(setup: &LabSetup, trials: usize, seed: u64) -> Result<MomentReport> {
    setup.check_trials(trials)?;
    let samples = draw_under_q(setup, trials, seed);
    let weights = Weights::from_samples(&samples);
    let c = setup.c;
    let w: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.observation.values().iter().zip(s.signal.values()).map(|(z, x)| z - c * x).collect())
        .collect();
    let identity = samples
        .iter()
        .zip(&w)
        .map(|(s, w)| (alpha_log_raw(s.signal.values(), w, c) + s.log_weight).abs())
        .fold(0.0, f64::max);
    let wr: Vec<&[f64]> = w.iter().map(|v| v.as_slice()).collect();
    let x: Vec<&[f64]> = samples.iter().map(|s| s.signal.values()).collect();
    let mut report = moment_battery("girsanov_reverse", &weights, &wr, &x, "W");
    report.max_log_identity_error = Some(identity);
    Ok(report)
}

/// `alpha`-weighted characteristic function of the stacked observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharFnReport {
    pub xi: Vec<f64>,
    pub estimate_re: f64,
    pub estimate_im: f64,
    /// `exp(-|xi|^2 / 2)`.
    pub target: f64,
    pub std_error: f64,
    /// `|estimate - target|`.
    pub deviation: f64,
    /// `MOMENT_TOLERANCE_SE * std_error`.
    pub bound: f64,
    pub effective_sample_size: f64,
    pub pass: bool,
}

impl CharFnReport {
    pub fn estimate(&self) -> Complex64 {
        Complex64::new(self.estimate_re, self.estimate_im)
    }
}

/// Estimates `E_Q[exp(i <xi, Z>)]` by `alpha`-weighted averaging under `P`.
pub fn weighted_char_fn_test(setup: &LabSetup, trials: usize, seed: u64, xi: &[f64]) -> Result<CharFnReport> {
    setup.check_trials(trials)?;
    if xi.len() != setup.dim() {
        return Err(Error::LengthMismatch { expected: setup.dim(), found: xi.len() });
    }
    if let Some(v) = xi.iter().find(|v| v.is_nan() || v.abs() > MAX_XI) {
        return Err(Error::Guard(format!("|xi_j| = {} exceeds {MAX_XI}", v.abs())));
    }
    let samples = draw_under_p(setup, trials, seed);
    let weights = Weights::from_samples(&samples);
    let phase: Vec<f64> =
        samples.iter().map(|s| s.observation.values().iter().zip(xi).fold(0.0, |acc, (z, x)| acc + x * z)).collect();
    let (re, se_re) = weights.mean(|i| phase[i].cos());
    let (im, se_im) = weights.mean(|i| phase[i].sin());
    let target = (-0.5 * xi.iter().map(|x| x * x).sum::<f64>()).exp();
    let estimate = Complex64::new(re, im);
    let std_error = se_re.hypot(se_im);
    let deviation = (estimate - target).norm();
    let bound = MOMENT_TOLERANCE_SE * std_error;
    Ok(CharFnReport {
        xi: xi.to_vec(),
        estimate_re: re,
        estimate_im: im,
        target,
        std_error,
        deviation,
        bound,
        effective_sample_size: weights.effective_sample_size(),
        pass: deviation <= bound,
    })
}

/// Five fixed frequency vectors of norm at most 1 in dimension `dim`.
pub fn default_char_fn_points(dim: usize) -> Vec<Vec<f64>> {
    assert!(dim >= 2);
    let unit = |j: usize| {
        let mut v = vec![0.0; dim];
        v[j] = 1.0;
        v
    };
    let spread = 1.0 / (dim as f64).sqrt();
    vec![
        unit(0),
        {
            let mut v = vec![0.0; dim];
            v[0] = 0.5;
            v[1] = -0.5;
            v
        },
        vec![spread; dim],
        (0..dim).map(|j| if j % 2 == 0 { 0.8 * spread } else { -0.8 * spread }).collect(),
        {
            let mut v = vec![0.0; dim];
            v[dim - 1] = 0.7;
            v[dim - 2] = -0.7;
            v
        },
    ]
}

/// Every measure-change check on one setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSuiteReport {
    pub c: f64,
    pub depth: usize,
    pub n0: usize,
    pub alpha_mean: AlphaMeanReport,
    pub forward: MomentReport,
    pub reverse: MomentReport,
    pub char_fn: Vec<CharFnReport>,
    pub passed: bool,
}

/// Runs the martingale-mean, forward, reverse and characteristic-function
/// checks with sub-seeds derived from `seed`.
pub fn run_suite(setup: &LabSetup, alpha_trials: usize, trials: usize, seed: u64) -> Result<MeasureSuiteReport> {
    let alpha_mean = estimate_alpha_mean(setup, alpha_trials, derive_seed(seed, 0))?;
    let forward = girsanov_forward_test(setup, trials, derive_seed(seed, 1))?;
    let reverse = girsanov_reverse_test(setup, trials, derive_seed(seed, 2))?;
    let char_fn = default_char_fn_points(setup.dim())
        .iter()
        .map(|xi| weighted_char_fn_test(setup, trials, derive_seed(seed, 3), xi))
        .collect::<Result<Vec<_>>>()?;
    let passed = alpha_mean.estimate.pass && forward.passed && reverse.passed && char_fn.iter().all(|r| r.pass);
    Ok(MeasureSuiteReport {
        c: setup.c,
        depth: setup.depth,
        n0: setup.trellis.n0(),
        alpha_mean,
        forward,
        reverse,
        char_fn,
        passed,
    })
}
