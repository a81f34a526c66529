//! Brute-force posteriors: every codeword's sequence metric is evaluated and
//! `P(X_l in B | Z_1..Z_n)` is the ratio of metric sums over codewords with
//! `x_l in B` to the sum over all codewords. Equally likely information bits
//! give every codeword the same prior, which cancels in the ratio.
//!
//! Exponential in the number of free bits; used as the correctness oracle
//! for [`crate::recursive`].

use crate::channel::ObservationSeq;
use crate::code::{Mode, Trellis};
use crate::metric::{label_log_metric, log_sum_exp, MetricForm};
use crate::posterior::{check_depth, BitPosterior, BranchSet, DepthPosterior, PosteriorTable};
use crate::{Error, Result};

/// Largest number of free bits the oracle will enumerate.
pub const MAX_EXACT_FREE_BITS: usize = 24;

/// Operation counts of one exact evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExactOpCount {
    /// Sequence metrics evaluated for the common denominator.
    pub sequence_metric_evals: u64,
}

/// The enumerated code of one trellis section, ready to be scored against
/// observations.
#[derive(Clone, Debug)]
pub struct ExactOracle<'t> {
    trellis: &'t Trellis,
    n: usize,
    mode: Mode,
    free: usize,
    count: usize,
    /// `labels[x * n + k]`: label of codeword `x` at depth `k + 1`.
    labels: Vec<u32>,
    /// `inputs[x * n + k]`: input bit on that edge.
    inputs: Vec<u8>,
}

impl<'t> ExactOracle<'t> {
    pub fn new(trellis: &'t Trellis, n: usize, mode: Mode) -> Result<Self> {
        let free = mode.free_bits(n, trellis.nu())?;
        if free > MAX_EXACT_FREE_BITS {
            return Err(Error::EnumerationTooLarge { free_bits: free, cap: MAX_EXACT_FREE_BITS });
        }
        let count = 1usize << free;
        let mut labels = Vec::with_capacity(count * n);
        let mut inputs = Vec::with_capacity(count * n);
        let mut info = vec![0u8; free];
        for x in 0..count {
            for (l, bit) in info.iter_mut().enumerate() {
                *bit = ((x >> (free - 1 - l)) & 1) as u8;
            }
            for t in trellis.walk(&trellis.inputs_for(&info, mode)) {
                labels.push(t.label);
                inputs.push(t.input);
            }
        }
        Ok(Self { trellis, n, mode, free, count, labels, inputs })
    }

    pub fn trellis(&self) -> &Trellis {
        self.trellis
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn num_codewords(&self) -> usize {
        self.count
    }

    /// Free information bits of codeword `x`.
    pub fn info_bits(&self, x: usize) -> Vec<u8> {
        self.inputs[x * self.n..x * self.n + self.free].to_vec()
    }

    /// Branch labels of codeword `x`.
    pub fn labels_of(&self, x: usize) -> &[u32] {
        &self.labels[x * self.n..(x + 1) * self.n]
    }

    pub fn evaluate(&self, z: &ObservationSeq, c: f64) -> Result<ExactEvaluation<'_, 't>> {
        self.evaluate_with(z, c, MetricForm::Full)
    }

    /// Scores every codeword against `z`.
    pub fn evaluate_with(&self, z: &ObservationSeq, c: f64, form: MetricForm) -> Result<ExactEvaluation<'_, 't>> {
        if z.n0() != self.trellis.n0() {
            return Err(Error::LengthMismatch { expected: self.trellis.n0(), found: z.n0() });
        }
        if z.depth() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, found: z.depth() });
        }
        // Per-depth label metrics; summing them left to right reproduces
        // `sequence_log_metric` exactly.
        let nl = self.trellis.num_labels();
        let table: Vec<f64> = (0..self.n)
            .flat_map(|k| (0..nl as u32).map(move |v| (k, v)))
            .map(|(k, v)| label_log_metric(v, z.block(k), c, form))
            .collect();
        let log_metrics: Vec<f64> = self
            .labels
            .chunks_exact(self.n)
            .map(|labels| labels.iter().enumerate().fold(0.0, |acc, (k, &v)| acc + table[k * nl + v as usize]))
            .collect();
        Ok(ExactEvaluation {
            oracle: self,
            c,
            log_metrics,
            ops: ExactOpCount { sequence_metric_evals: self.count as u64 },
        })
    }
}

/// Sequence metrics of every codeword for one observation sequence.
#[derive(Clone, Debug)]
pub struct ExactEvaluation<'o, 't> {
    oracle: &'o ExactOracle<'t>,
    c: f64,
    log_metrics: Vec<f64>,
    ops: ExactOpCount,
}

impl ExactEvaluation<'_, '_> {
    pub fn op_count(&self) -> ExactOpCount {
        self.ops
    }

    /// `log pm(x)` for every codeword, in enumeration order.
    pub fn log_metrics(&self) -> &[f64] {
        &self.log_metrics
    }

    /// Adds `delta` to every sequence log metric.
    pub fn shifted(&self, delta: f64) -> Self {
        Self { log_metrics: self.log_metrics.iter().map(|m| m + delta).collect(), ..self.clone() }
    }

    /// Best codeword index and its metric; ties go to the earliest index.
    pub fn max_log_metric(&self) -> (usize, f64) {
        self.log_metrics
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &m)| if m > best.1 { (i, m) } else { best })
    }

    fn log_mass(&self, mut keep: impl FnMut(usize) -> bool) -> f64 {
        let kept: Vec<f64> = self.log_metrics.iter().enumerate().filter(|(x, _)| keep(*x)).map(|(_, &m)| m).collect();
        if kept.is_empty() {
            f64::NEG_INFINITY
        } else {
            log_sum_exp(&kept).expect("non-empty")
        }
    }

    /// `log sum_x pm(x)`.
    pub fn log_denominator(&self) -> f64 {
        self.log_mass(|_| true)
    }

    fn at(&self, x: usize, depth: usize) -> usize {
        x * self.oracle.n + depth - 1
    }

    fn ratio(&self, log_num: f64, log_den: f64, depth: usize) -> Result<f64> {
        if log_den == f64::NEG_INFINITY {
            return Err(Error::Unreachable { depth });
        }
        Ok((log_num - log_den).exp())
    }

    /// `P(X_l in B | Z)`.
    pub fn branch_posterior(&self, set: &BranchSet) -> Result<f64> {
        let o = self.oracle;
        let l = set.depth();
        check_depth(l, o.n, o.trellis.nu(), o.mode, false)?;
        let num = self.log_mass(|x| set.contains(o.labels[self.at(x, l)]));
        self.ratio(num, self.log_denominator(), l)
    }

    /// `P(i_l = 0 | Z)`, `P(i_l = 1 | Z)` and the APP ratio.
    pub fn bit_posterior(&self, l: usize) -> Result<BitPosterior> {
        let o = self.oracle;
        check_depth(l, o.n, o.trellis.nu(), o.mode, true)?;
        let m0 = self.log_mass(|x| o.inputs[self.at(x, l)] == 0);
        let m1 = self.log_mass(|x| o.inputs[self.at(x, l)] == 1);
        if m0 == f64::NEG_INFINITY && m1 == f64::NEG_INFINITY {
            return Err(Error::Unreachable { depth: l });
        }
        Ok(BitPosterior::from_log_masses(m0, m1))
    }

    /// `E(X_l^(i) | Z)` for code symbol `i` (1-based) of block `l`.
    pub fn symbol_expectation(&self, l: usize, i: usize) -> Result<f64> {
        let o = self.oracle;
        check_depth(l, o.n, o.trellis.nu(), o.mode, false)?;
        let n0 = o.trellis.n0();
        if i == 0 || i > n0 {
            return Err(Error::SymbolOutOfRange { index: i, n0 });
        }
        let den = self.log_denominator();
        let bit_of = |x: usize| (o.labels[self.at(x, l)] >> (i - 1)) & 1;
        let plus = self.ratio(self.log_mass(|x| bit_of(x) == 0), den, l)?;
        let minus = self.ratio(self.log_mass(|x| bit_of(x) == 1), den, l)?;
        Ok((plus - minus).clamp(-1.0, 1.0))
    }

    /// Full per-depth table over the labels that occur at each depth.
    pub fn table(&self) -> Result<PosteriorTable> {
        let o = self.oracle;
        let mut table = PosteriorTable::new("exact", o.trellis, o.n, self.c, o.mode);
        let den = self.log_denominator();
        for l in 1..=o.n {
            let mut present = vec![false; o.trellis.num_labels()];
            for x in 0..o.count {
                present[o.labels[self.at(x, l)] as usize] = true;
            }
            let mut branches = std::collections::BTreeMap::new();
            for (v, _) in present.iter().enumerate().filter(|(_, p)| **p) {
                let num = self.log_mass(|x| o.labels[self.at(x, l)] == v as u32);
                branches.insert(o.trellis.label_string(v as u32), self.ratio(num, den, l)?);
            }
            let bit = if l <= o.free { Some(self.bit_posterior(l)?) } else { None };
            table.depths.push(DepthPosterior { depth: l, branches, bit });
        }
        Ok(table)
    }
}

/// `P(X_l in B | Z)` by full enumeration.
pub fn posterior_branch_exact(
    trellis: &Trellis,
    z: &ObservationSeq,
    c: f64,
    set: &BranchSet,
    mode: Mode,
) -> Result<f64> {
    ExactOracle::new(trellis, z.depth(), mode)?.evaluate(z, c)?.branch_posterior(set)
}

/// Bit posterior at depth `l` by full enumeration.
pub fn posterior_bit_exact(
    trellis: &Trellis,
    z: &ObservationSeq,
    c: f64,
    l: usize,
    mode: Mode,
) -> Result<BitPosterior> {
    ExactOracle::new(trellis, z.depth(), mode)?.evaluate(z, c)?.bit_posterior(l)
}

/// `E(X_l^(i) | Z)` by full enumeration.
pub fn posterior_symbol_expectation_exact(
    trellis: &Trellis,
    z: &ObservationSeq,
    c: f64,
    l: usize,
    i: usize,
    mode: Mode,
) -> Result<f64> {
    ExactOracle::new(trellis, z.depth(), mode)?.evaluate(z, c)?.symbol_expectation(l, i)
}
