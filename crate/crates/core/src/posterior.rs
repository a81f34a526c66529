//! Types shared by the exact and recursive posterior estimators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::code::{Mode, Trellis};
use crate::{Error, Result};

/// Version tag written into every serialized [`PosteriorTable`].
pub const POSTERIOR_SCHEMA: &str = "convest.posterior/1";

/// A set `B` of branch labels at depth `l` (1-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchSet {
    depth: usize,
    labels: Vec<u32>,
}

impl BranchSet {
    pub fn new(depth: usize, labels: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut labels: Vec<u32> = labels.into_iter().collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.is_empty() {
            return Err(Error::Empty("branch set"));
        }
        if depth == 0 {
            return Err(Error::DepthOutOfRange { depth, last: usize::MAX });
        }
        Ok(Self { depth, labels })
    }

    /// Every label value an `n0`-output code can emit.
    pub fn all(depth: usize, n0: usize) -> Result<Self> {
        Self::new(depth, 0..(1u32 << n0))
    }

    /// Parses labels written as `0`/`1` strings in tap order, e.g. `"10"`.
    pub fn from_strings<'a>(depth: usize, labels: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let parsed = labels
            .into_iter()
            .map(|s| {
                s.chars().enumerate().try_fold(0u32, |acc, (i, ch)| match ch {
                    '0' => Ok(acc),
                    '1' => Ok(acc | (1 << i)),
                    other => Err(Error::Bits(format!("unexpected character {other:?} in label"))),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(depth, parsed)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn contains(&self, label: u32) -> bool {
        self.labels.binary_search(&label).is_ok()
    }
}

/// Posterior of one information bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitPosterior {
    pub p0: f64,
    pub p1: f64,
    /// `ln(P0 / P1)`.
    pub log_app_ratio: f64,
}

impl BitPosterior {
    /// Builds the posterior from the log numerators of `P(i_l = 0)` and
    /// `P(i_l = 1)`; their common denominator cancels in the ratio.
    pub fn from_log_masses(log_mass0: f64, log_mass1: f64) -> Self {
        let log_app_ratio = if log_mass0 == log_mass1 { 0.0 } else { log_mass0 - log_mass1 };
        Self { p0: logistic(log_app_ratio), p1: logistic(-log_app_ratio), log_app_ratio }
    }

    /// The APP ratio `P0 / P1` (may be infinite).
    pub fn app_ratio(&self) -> f64 {
        self.log_app_ratio.exp()
    }

    /// MAP decision: 0 iff `ln Lambda >= 0`.
    pub fn decision(&self) -> u8 {
        if self.log_app_ratio >= 0.0 {
            0
        } else {
            1
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Posteriors at one depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthPosterior {
    pub depth: usize,
    /// `P(X_l = v)` keyed by the label written in tap order.
    pub branches: BTreeMap<String, f64>,
    /// Present only at depths carrying a free information bit.
    pub bit: Option<BitPosterior>,
}

/// Per-depth branch and bit posteriors of one observation sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTable {
    pub schema: String,
    pub method: String,
    pub n: usize,
    pub nu: usize,
    pub n0: usize,
    pub c: f64,
    pub mode: Mode,
    pub depths: Vec<DepthPosterior>,
}

impl PosteriorTable {
    pub(crate) fn new(method: &str, trellis: &Trellis, n: usize, c: f64, mode: Mode) -> Self {
        Self {
            schema: POSTERIOR_SCHEMA.to_string(),
            method: method.to_string(),
            n,
            nu: trellis.nu(),
            n0: trellis.n0(),
            c,
            mode,
            depths: Vec::with_capacity(n),
        }
    }

    /// Largest absolute differences `(branch, bit)` against another table
    /// over the same trellis section. Labels missing on one side count as 0.
    pub fn max_abs_deviation(&self, other: &PosteriorTable) -> Result<(f64, f64)> {
        if self.depths.len() != other.depths.len() {
            return Err(Error::LengthMismatch { expected: self.depths.len(), found: other.depths.len() });
        }
        let mut branch = 0.0f64;
        let mut bit = 0.0f64;
        for (a, b) in self.depths.iter().zip(&other.depths) {
            for key in a.branches.keys().chain(b.branches.keys()) {
                let pa = a.branches.get(key).copied().unwrap_or(0.0);
                let pb = b.branches.get(key).copied().unwrap_or(0.0);
                branch = branch.max((pa - pb).abs());
            }
            match (&a.bit, &b.bit) {
                (Some(x), Some(y)) => bit = bit.max((x.p0 - y.p0).abs()).max((x.p1 - y.p1).abs()),
                (None, None) => {}
                _ => return Err(Error::NotInformationDepth { depth: a.depth, last: 0 }),
            }
        }
        Ok((branch, bit))
    }

    /// Worst `|sum_v P(X_l = v) - 1|` over depths.
    pub fn max_branch_normalization_error(&self) -> f64 {
        self.depths.iter().map(|d| (d.branches.values().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Worst `|P0 + P1 - 1|` over information depths.
    pub fn max_bit_sum_error(&self) -> f64 {
        self.depths.iter().filter_map(|d| d.bit.map(|b| (b.p0 + b.p1 - 1.0).abs())).fold(0.0, f64::max)
    }

    /// MAP decisions at the information depths.
    pub fn decisions(&self) -> Vec<u8> {
        self.depths.iter().filter_map(|d| d.bit.map(|b| b.decision())).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Checks `1 <= depth <= n` and, when `information` is set, that the depth
/// carries a free information bit.
pub(crate) fn check_depth(depth: usize, n: usize, nu: usize, mode: Mode, information: bool) -> Result<()> {
    if depth == 0 || depth > n {
        return Err(Error::DepthOutOfRange { depth, last: n });
    }
    if information {
        let last = mode.free_bits(n, nu)?;
        if depth > last {
            return Err(Error::NotInformationDepth { depth, last });
        }
    }
    Ok(())
}
