//! Log-domain symbol, branch and sequence metrics.
//!
//! The sequence metric `log pm(x) = c sum_k <x_k, z_k> - c^2 n0 n / 2` is the
//! log of the density `beta_n = dP/dQ`; `alpha_n = dQ/dP` is its reciprocal
//! when written in terms of the noise `w = z - c x`. All sums run depth-major,
//! symbol-minor, left to right, starting from `0.0`.

use serde::{Deserialize, Serialize};

use crate::channel::{NoiseSeq, ObservationSeq, SignalSeq};
use crate::{Error, Result};

/// A natural-log metric value.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogMetric(pub f64);

/// `log alpha_n`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AlphaLog(pub f64);

/// Which symbol metric the decoders use.
///
/// `Correlation` drops the `-c^2/2` term, a constant shared by every path
/// of the same depth; posteriors are unchanged by it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricForm {
    #[default]
    Full,
    Correlation,
}

/// `c x z - c^2 / 2`.
#[inline]
pub fn symbol_log_metric(x: f64, z: f64, c: f64) -> f64 {
    c * x * z - 0.5 * c * c
}

#[inline]
fn symbol_metric_with(form: MetricForm, x: f64, z: f64, c: f64) -> f64 {
    match form {
        MetricForm::Full => symbol_log_metric(x, z, c),
        MetricForm::Correlation => c * x * z,
    }
}

/// `c <x, z> - c^2 n0 / 2`, summed symbol by symbol.
pub fn branch_log_metric(x: &[f64], z: &[f64], c: f64) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: z.len() });
    }
    Ok(x.iter().zip(z).fold(0.0, |acc, (&x, &z)| acc + symbol_log_metric(x, z, c)))
}

/// Branch metric of a trellis label (bit `i` of `label` is code symbol `i`,
/// mapped 0 -> +1, 1 -> -1). Bitwise equal to [`branch_log_metric`] on the
/// mapped block when `form` is `Full`.
#[inline]
pub fn label_log_metric(label: u32, z: &[f64], c: f64, form: MetricForm) -> f64 {
    z.iter().enumerate().fold(0.0, |acc, (i, &zi)| {
        let x = if (label >> i) & 1 == 0 { 1.0 } else { -1.0 };
        acc + symbol_metric_with(form, x, zi, c)
    })
}

/// `log pm(x)`, the sum of branch metrics over all depths.
pub fn sequence_log_metric(x: &SignalSeq, z: &ObservationSeq, c: f64) -> Result<LogMetric> {
    if x.n0() != z.n0() {
        return Err(Error::LengthMismatch { expected: x.n0(), found: z.n0() });
    }
    if x.depth() != z.depth() {
        return Err(Error::LengthMismatch { expected: x.depth(), found: z.depth() });
    }
    let mut total = 0.0;
    for (xb, zb) in x.blocks().zip(z.blocks()) {
        total += branch_log_metric(xb, zb, c)?;
    }
    Ok(LogMetric(total))
}

/// `log alpha_n = -c sum_k <x_k, w_k> - c^2 n0 n / 2`.
pub fn alpha_log(x: &SignalSeq, w: &NoiseSeq, c: f64) -> Result<AlphaLog> {
    if x.n0() != w.n0() {
        return Err(Error::LengthMismatch { expected: x.n0(), found: w.n0() });
    }
    if x.depth() != w.depth() {
        return Err(Error::LengthMismatch { expected: x.depth(), found: w.depth() });
    }
    Ok(AlphaLog(alpha_log_raw(x.values(), w.values(), c)))
}

pub(crate) fn alpha_log_raw(x: &[f64], w: &[f64], c: f64) -> f64 {
    x.iter().zip(w).fold(0.0, |acc, (&x, &w)| acc + (-c * x * w - 0.5 * c * c))
}

pub(crate) fn beta_log_raw(x: &[f64], z: &[f64], c: f64) -> f64 {
    x.iter().zip(z).fold(0.0, |acc, (&x, &z)| acc + symbol_log_metric(x, z, c))
}

/// `log sum exp(v_i)` with max subtraction. Entries equal to `-inf` are
/// allowed; if every entry is `-inf` the result is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Err(Error::Empty("log_sum_exp input"));
    }
    if values.len() == 1 || max == f64::NEG_INFINITY || max == f64::INFINITY {
        return Ok(if values.len() == 1 { values[0] } else { max });
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
