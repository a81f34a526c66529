//! Forward-backward computation of branch and bit posteriors in
//! `O(n 2^nu)`.
//!
//! Quantities are keyed by trellis state. With `S` the number of states:
//!
//! - forward `F(k, s)`: log of the summed prefix metric times prefix prior
//!   over all paths from the zero state at depth 0 to `s` at depth `k`;
//! - backward `B(k, s)`: log of the summed suffix metric times conditional
//!   prior over all admissible continuations from `s` at depth `k`;
//! - edge weight: `ln 1/2` on a free input bit, `0` on a forced tail zero,
//!   plus the branch log metric.
//!
//! The posterior of a branch event at depth `l` combines
//! `F(l-1, s') + weight + B(l, s)` over the edges in the event, normalised by
//! the same sum over all edges at that depth.

use crate::channel::ObservationSeq;
use crate::code::{BitSeq, Mode, Trellis};
use crate::metric::{label_log_metric, log_add, MetricForm};
use crate::posterior::{check_depth, BitPosterior, BranchSet, DepthPosterior, PosteriorTable};
use crate::{Error, Result};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Work done by a forward-backward run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub branch_metric_evals: u64,
    pub state_updates: u64,
}

impl std::ops::Add for OpCounter {
    type Output = OpCounter;

    fn add(self, o: OpCounter) -> OpCounter {
        OpCounter {
            branch_metric_evals: self.branch_metric_evals + o.branch_metric_evals,
            state_updates: self.state_updates + o.state_updates,
        }
    }
}

/// Forward log quantities `F(k, s)` for `k = 0..=n`, plus the edge
/// weights evaluated on the way.
#[derive(Clone, Debug)]
pub struct ForwardState {
    n: usize,
    states: usize,
    log_f: Vec<f64>,
    /// `weight[(k * states + s) * 2 + b]` for the edge leaving `s` at depth
    /// `k` with input `b`; `-inf` where not evaluated or forbidden.
    weight: Vec<f64>,
    ops: OpCounter,
}

impl ForwardState {
    pub fn depth(&self) -> usize {
        self.n
    }

    /// `F(k, s)`.
    pub fn get(&self, k: usize, s: u32) -> f64 {
        self.log_f[k * self.states + s as usize]
    }

    pub fn at_depth(&self, k: usize) -> &[f64] {
        &self.log_f[k * self.states..(k + 1) * self.states]
    }

    fn edge_weight(&self, k: usize, s: u32, b: u8) -> f64 {
        self.weight[(k * self.states + s as usize) * 2 + b as usize]
    }

    pub fn op_count(&self) -> OpCounter {
        self.ops
    }
}

/// Backward log quantities `B(k, s)` for `k = 0..=n`.
#[derive(Clone, Debug)]
pub struct BackwardState {
    n: usize,
    states: usize,
    log_b: Vec<f64>,
    ops: OpCounter,
}

impl BackwardState {
    pub fn depth(&self) -> usize {
        self.n
    }

    /// `B(k, s)`.
    pub fn get(&self, k: usize, s: u32) -> f64 {
        self.log_b[k * self.states + s as usize]
    }

    pub fn at_depth(&self, k: usize) -> &[f64] {
        &self.log_b[k * self.states..(k + 1) * self.states]
    }

    pub fn op_count(&self) -> OpCounter {
        self.ops
    }
}

fn check_observations(trellis: &Trellis, z: &ObservationSeq, mode: Mode) -> Result<usize> {
    if z.n0() != trellis.n0() {
        return Err(Error::LengthMismatch { expected: trellis.n0(), found: z.n0() });
    }
    let n = z.depth();
    mode.free_bits(n, trellis.nu())?;
    Ok(n)
}

pub fn forward_pass(trellis: &Trellis, z: &ObservationSeq, c: f64, mode: Mode) -> Result<ForwardState> {
    forward_pass_with(trellis, z, c, mode, MetricForm::Full)
}

pub fn forward_pass_with(
    trellis: &Trellis,
    z: &ObservationSeq,
    c: f64,
    mode: Mode,
    form: MetricForm,
) -> Result<ForwardState> {
    let n = check_observations(trellis, z, mode)?;
    let states = trellis.num_states();
    let mut log_f = vec![NEG_INF; (n + 1) * states];
    let mut weight = vec![NEG_INF; n * states * 2];
    let mut ops = OpCounter::default();
    log_f[0] = 0.0;
    for k in 1..=n {
        let zk = z.block(k - 1);
        for s in 0..states as u32 {
            let prev = log_f[(k - 1) * states + s as usize];
            if prev == NEG_INF {
                continue;
            }
            for edge in trellis.outgoing(s) {
                let Some(prior) = trellis.log_input_prior(k, edge.input, n, mode) else {
                    continue;
                };
                let w = prior + label_log_metric(edge.label, zk, c, form);
                ops.branch_metric_evals += 1;
                weight[((k - 1) * states + s as usize) * 2 + edge.input as usize] = w;
                let slot = &mut log_f[k * states + edge.to as usize];
                *slot = log_add(*slot, prev + w);
                ops.state_updates += 1;
            }
        }
    }
    Ok(ForwardState { n, states, log_f, weight, ops })
}

pub fn backward_pass(trellis: &Trellis, z: &ObservationSeq, c: f64, mode: Mode) -> Result<BackwardState> {
    backward_pass_with(trellis, z, c, mode, MetricForm::Full)
}

pub fn backward_pass_with(
    trellis: &Trellis,
    z: &ObservationSeq,
    c: f64,
    mode: Mode,
    form: MetricForm,
) -> Result<BackwardState> {
    let n = check_observations(trellis, z, mode)?;
    let states = trellis.num_states();
    let mut log_b = vec![NEG_INF; (n + 1) * states];
    let mut ops = OpCounter::default();
    match mode {
        Mode::Terminated => log_b[n * states] = 0.0,
        Mode::Truncated => log_b[n * states..].iter_mut().for_each(|v| *v = 0.0),
    }
    for k in (0..n).rev() {
        let zk = z.block(k);
        for s in 0..states as u32 {
            let mut acc = NEG_INF;
            for edge in trellis.outgoing(s) {
                let next = log_b[(k + 1) * states + edge.to as usize];
                if next == NEG_INF {
                    continue;
                }
                let Some(prior) = trellis.log_input_prior(k + 1, edge.input, n, mode) else {
                    continue;
                };
                ops.branch_metric_evals += 1;
                acc = log_add(acc, prior + label_log_metric(edge.label, zk, c, form) + next);
            }
            log_b[k * states + s as usize] = acc;
            ops.state_updates += 1;
        }
    }
    Ok(BackwardState { n, states, log_b, ops })
}

/// A completed forward-backward run over one observation sequence.
#[derive(Clone, Debug)]
pub struct ForwardBackward<'t> {
    trellis: &'t Trellis,
    mode: Mode,
    c: f64,
    fwd: ForwardState,
    bwd: BackwardState,
}

impl<'t> ForwardBackward<'t> {
    pub fn run(trellis: &'t Trellis, z: &ObservationSeq, c: f64, mode: Mode) -> Result<Self> {
        Self::run_with(trellis, z, c, mode, MetricForm::Full)
    }

    pub fn run_with(trellis: &'t Trellis, z: &ObservationSeq, c: f64, mode: Mode, form: MetricForm) -> Result<Self> {
        let (fwd, bwd) = rayon::join(
            || forward_pass_with(trellis, z, c, mode, form),
            || backward_pass_with(trellis, z, c, mode, form),
        );
        Ok(Self { trellis, mode, c, fwd: fwd?, bwd: bwd? })
    }

    pub fn forward(&self) -> &ForwardState {
        &self.fwd
    }

    pub fn backward(&self) -> &BackwardState {
        &self.bwd
    }

    pub fn depth(&self) -> usize {
        self.fwd.n
    }

    pub fn op_count(&self) -> OpCounter {
        self.fwd.ops + self.bwd.ops
    }

    /// Log of `sum_{edges e at depth l, keep(e)} F(l-1, from) + w(e) + B(l, to)`.
    fn log_mass(&self, l: usize, mut keep: impl FnMut(u32, u8, u32) -> bool) -> f64 {
        let mut acc = NEG_INF;
        for s in 0..self.trellis.num_states() as u32 {
            let f = self.fwd.get(l - 1, s);
            if f == NEG_INF {
                continue;
            }
            for edge in self.trellis.outgoing(s) {
                let w = self.fwd.edge_weight(l - 1, s, edge.input);
                let b = self.bwd.get(l, edge.to);
                if w == NEG_INF || b == NEG_INF || !keep(s, edge.input, edge.label) {
                    continue;
                }
                acc = log_add(acc, f + w + b);
            }
        }
        acc
    }

    /// The log denominator factored at the cut between depths `l-1` and
    /// `l`. The same for every `l` up to rounding.
    pub fn log_denominator_at(&self, l: usize) -> Result<f64> {
        check_depth(l, self.depth(), self.trellis.nu(), self.mode, false)?;
        Ok(self.log_mass(l, |_, _, _| true))
    }

    /// Log of the total prior-weighted metric sum read off the forward pass.
    pub fn log_total(&self) -> f64 {
        let last = self.fwd.at_depth(self.depth());
        match self.mode {
            Mode::Terminated => last[0],
            Mode::Truncated => last.iter().fold(NEG_INF, |a, &v| log_add(a, v)),
        }
    }

    fn ratio(&self, l: usize, log_num: f64) -> Result<f64> {
        let den = self.log_mass(l, |_, _, _| true);
        if den == NEG_INF {
            return Err(Error::Unreachable { depth: l });
        }
        Ok((log_num - den).exp())
    }

    /// `P(X_l in B | Z)`.
    pub fn branch_posterior(&self, set: &BranchSet) -> Result<f64> {
        let l = set.depth();
        check_depth(l, self.depth(), self.trellis.nu(), self.mode, false)?;
        self.ratio(l, self.log_mass(l, |_, _, label| set.contains(label)))
    }

    /// Bit posterior at information depth `l`.
    pub fn bit_posterior(&self, l: usize) -> Result<BitPosterior> {
        check_depth(l, self.depth(), self.trellis.nu(), self.mode, true)?;
        let m0 = self.log_mass(l, |_, b, _| b == 0);
        let m1 = self.log_mass(l, |_, b, _| b == 1);
        if m0 == NEG_INF && m1 == NEG_INF {
            return Err(Error::Unreachable { depth: l });
        }
        Ok(BitPosterior::from_log_masses(m0, m1))
    }

    /// `E(X_l^(i) | Z)` for code symbol `i` (1-based).
    pub fn symbol_expectation(&self, l: usize, i: usize) -> Result<f64> {
        check_depth(l, self.depth(), self.trellis.nu(), self.mode, false)?;
        let n0 = self.trellis.n0();
        if i == 0 || i > n0 {
            return Err(Error::SymbolOutOfRange { index: i, n0 });
        }
        let plus = self.ratio(l, self.log_mass(l, |_, _, v| (v >> (i - 1)) & 1 == 0))?;
        let minus = self.ratio(l, self.log_mass(l, |_, _, v| (v >> (i - 1)) & 1 == 1))?;
        Ok((plus - minus).clamp(-1.0, 1.0))
    }

    /// Per-depth table with the same schema as the exact oracle's.
    pub fn table(&self) -> Result<PosteriorTable> {
        let n = self.depth();
        let free = self.mode.free_bits(n, self.trellis.nu())?;
        let mut table = PosteriorTable::new("recursive", self.trellis, n, self.c, self.mode);
        for l in 1..=n {
            let den = self.log_mass(l, |_, _, _| true);
            if den == NEG_INF {
                return Err(Error::Unreachable { depth: l });
            }
            let mut labels: Vec<u32> = Vec::new();
            for s in 0..self.trellis.num_states() as u32 {
                if self.fwd.get(l - 1, s) == NEG_INF {
                    continue;
                }
                for e in self.trellis.outgoing(s) {
                    if self.fwd.edge_weight(l - 1, s, e.input) != NEG_INF && self.bwd.get(l, e.to) != NEG_INF {
                        labels.push(e.label);
                    }
                }
            }
            labels.sort_unstable();
            labels.dedup();
            let branches = labels
                .into_iter()
                .map(|v| (self.trellis.label_string(v), (self.log_mass(l, |_, _, x| x == v) - den).exp()))
                .collect();
            let bit = if l <= free { Some(self.bit_posterior(l)?) } else { None };
            table.depths.push(DepthPosterior { depth: l, branches, bit });
        }
        Ok(table)
    }

    /// MAP decisions for every free information bit.
    pub fn decode(&self) -> Result<BitSeq> {
        let free = self.mode.free_bits(self.depth(), self.trellis.nu())?;
        let bits = (1..=free).map(|l| self.bit_posterior(l).map(|p| p.decision())).collect::<Result<Vec<_>>>()?;
        BitSeq::information(bits)
    }
}

/// `P(X_l in B | Z)` by forward-backward recursion.
pub fn posterior_branch(trellis: &Trellis, z: &ObservationSeq, c: f64, set: &BranchSet, mode: Mode) -> Result<f64> {
    ForwardBackward::run(trellis, z, c, mode)?.branch_posterior(set)
}

/// Bit posterior at depth `l` by forward-backward recursion.
pub fn posterior_bit(trellis: &Trellis, z: &ObservationSeq, c: f64, l: usize, mode: Mode) -> Result<BitPosterior> {
    ForwardBackward::run(trellis, z, c, mode)?.bit_posterior(l)
}

/// Bitwise MAP decoding: bit `l` is 0 iff `ln Lambda(i_l) >= 0`.
pub fn map_decode(trellis: &Trellis, z: &ObservationSeq, c: f64, mode: Mode) -> Result<BitSeq> {
    ForwardBackward::run(trellis, z, c, mode)?.decode()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{map_bpsk, transmit};
    use crate::code::{encode, GeneratorSpec};
    use crate::exact::ExactOracle;
    use crate::metric::label_log_metric;

    const LN_HALF: f64 = -std::f64::consts::LN_2;

    fn t75() -> Trellis {
        Trellis::new(GeneratorSpec::from_octal("7,5").unwrap())
    }

    fn observe(t: &Trellis, info: &[u8], c: f64, seed: u64, mode: Mode) -> ObservationSeq {
        let cw = encode(t.spec(), &BitSeq::information(info.to_vec()).unwrap(), mode == Mode::Terminated).unwrap();
        transmit(&map_bpsk(&cw, t.n0()).unwrap(), c, seed).0
    }

    #[test]
    fn single_step_forward() {
        let t = t75();
        let z = ObservationSeq::new(2, vec![0.4, -1.1], 1.0, 0).unwrap();
        let f = forward_pass(&t, &z, 1.0, Mode::Truncated).unwrap();
        for s in 0..4u32 {
            let expected = t
                .outgoing(0)
                .iter()
                .find(|e| e.to == s)
                .map(|e| LN_HALF + label_log_metric(e.label, z.block(0), 1.0, MetricForm::Full));
            match expected {
                Some(v) => assert!((f.get(1, s) - v).abs() < 1e-15),
                None => assert_eq!(f.get(1, s), NEG_INF),
            }
        }
    }

    #[test]
    fn zero_gain_forward_total_is_one() {
        let t = t75();
        let z = observe(&t, &[1, 0, 1, 1, 0, 1], 0.0, 4, Mode::Terminated);
        let f = forward_pass(&t, &z, 0.0, Mode::Terminated).unwrap();
        assert!(f.get(8, 0).abs() < 1e-12);
    }

    #[test]
    fn forward_total_matches_exact_denominator() {
        let t = t75();
        for seed in 0..10 {
            let z = observe(&t, &[1, 1, 0, 1, 0, 0, 1, 0], 1.2, seed, Mode::Terminated);
            let fb = ForwardBackward::run(&t, &z, 1.2, Mode::Terminated).unwrap();
            let o = ExactOracle::new(&t, 10, Mode::Terminated).unwrap();
            let den = o.evaluate(&z, 1.2).unwrap().log_denominator() + 8.0 * LN_HALF;
            let rel = ((fb.log_total() - den).exp() - 1.0).abs();
            assert!(rel < 1e-9, "rel {rel}");
            for l in 1..=10 {
                let cut = fb.log_denominator_at(l).unwrap();
                assert!(((cut - den).exp() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn backward_terminal_conditions() {
        let t = t75();
        let c = 0.7;
        let z = observe(&t, &[1, 0, 1, 1], c, 2, Mode::Terminated);
        let n = 6;
        let b = backward_pass(&t, &z, c, Mode::Terminated).unwrap();
        assert_eq!(b.get(n, 0), 0.0);
        assert!((1..4).all(|s| b.get(n, s) == NEG_INF));
        // Depth n-1: only states that a forced zero drives to 0 survive.
        for s in 0..4u32 {
            let e = t.edge(s, 0);
            if e.to == 0 {
                let m = label_log_metric(e.label, z.block(n - 1), c, MetricForm::Full);
                assert!((b.get(n - 1, s) - m).abs() < 1e-15);
            } else {
                assert_eq!(b.get(n - 1, s), NEG_INF);
            }
        }
        let zt = observe(&t, &[1, 0, 1, 1], c, 2, Mode::Truncated);
        let bt = backward_pass(&t, &zt, c, Mode::Truncated).unwrap();
        for s in 0..4u32 {
            let [e0, e1] = t.outgoing(s);
            let m0 = label_log_metric(e0.label, zt.block(3), c, MetricForm::Full);
            let m1 = label_log_metric(e1.label, zt.block(3), c, MetricForm::Full);
            assert!((bt.get(3, s) - (log_add(m0, m1) + LN_HALF)).abs() < 1e-14);
        }
    }

    #[test]
    fn agrees_with_exact_oracle() {
        let t = t75();
        let o = ExactOracle::new(&t, 12, Mode::Terminated).unwrap();
        for seed in 0..100u64 {
            let info: Vec<u8> = (0..10).map(|i| ((seed >> (i % 7)) ^ (i as u64)) as u8 & 1).collect();
            let c = [0.0, 0.5, 1.0, 2.0, 8.0][seed as usize % 5];
            let z = observe(&t, &info, c, seed, Mode::Terminated);
            let exact = o.evaluate(&z, c).unwrap().table().unwrap();
            let fb = ForwardBackward::run(&t, &z, c, Mode::Terminated).unwrap();
            let rec = fb.table().unwrap();
            let (db, dbit) = exact.max_abs_deviation(&rec).unwrap();
            assert!(db < 1e-9 && dbit < 1e-9, "seed {seed}: {db} {dbit}");
            assert_eq!(exact.decisions(), fb.decode().unwrap().into_bits());
        }
    }

    #[test]
    fn truncated_filtering_matches_enumeration() {
        let t = Trellis::new(GeneratorSpec::from_octal("15,17").unwrap());
        let o = ExactOracle::new(&t, 9, Mode::Truncated).unwrap();
        for seed in 0..10 {
            let z = observe(&t, &[1, 0, 1, 1, 0, 1, 1, 0, 1], 0.8, seed, Mode::Truncated);
            let e = o.evaluate(&z, 0.8).unwrap();
            let fb = ForwardBackward::run(&t, &z, 0.8, Mode::Truncated).unwrap();
            let (db, dbit) = e.table().unwrap().max_abs_deviation(&fb.table().unwrap()).unwrap();
            assert!(db < 1e-9 && dbit < 1e-9);
            for v in 0..4 {
                let set = BranchSet::new(9, [v]).unwrap();
                assert!((fb.branch_posterior(&set).unwrap() - e.branch_posterior(&set).unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn correlation_metric_gives_same_posteriors() {
        let t = t75();
        let z = observe(&t, &[0, 1, 1, 1, 0, 1, 0], 1.4, 21, Mode::Terminated);
        let a = ForwardBackward::run(&t, &z, 1.4, Mode::Terminated).unwrap().table().unwrap();
        let b =
            ForwardBackward::run_with(&t, &z, 1.4, Mode::Terminated, MetricForm::Correlation).unwrap().table().unwrap();
        let (db, dbit) = a.max_abs_deviation(&b).unwrap();
        assert!(db < 1e-12 && dbit < 1e-12, "{db} {dbit}");
    }

    #[test]
    fn op_count_bounds() {
        for (taps, nu, n) in [("7,5", 2usize, 12usize), ("7,5", 2, 20), ("15,17", 3, 13)] {
            let t = Trellis::new(GeneratorSpec::from_octal(taps).unwrap());
            let z = observe(&t, &vec![1; n - nu], 1.0, 0, Mode::Terminated);
            let fb = ForwardBackward::run(&t, &z, 1.0, Mode::Terminated).unwrap();
            let bound = 2 * n as u64 * (1 << (nu + 1));
            assert!(fb.op_count().branch_metric_evals <= bound);
            assert!(fb.op_count().branch_metric_evals < 1 << (n - nu));
            let again = ForwardBackward::run(&t, &z, 1.0, Mode::Terminated).unwrap();
            assert_eq!(again.op_count(), fb.op_count());
        }
    }

    #[test]
    fn noiseless_map_recovers_info() {
        let t = t75();
        let info = [1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 1, 1];
        let cw = encode(t.spec(), &BitSeq::information(info.to_vec()).unwrap(), true).unwrap();
        let x = map_bpsk(&cw, 2).unwrap();
        let c = 6.0;
        let z = ObservationSeq::new(2, x.values().iter().map(|v| c * v).collect(), c, 0).unwrap();
        assert_eq!(map_decode(&t, &z, c, Mode::Terminated).unwrap().bits(), &info);
    }

    #[test]
    fn zero_gain_ties_decode_to_zero() {
        let t = t75();
        let z = observe(&t, &[1, 1, 1, 1, 1], 0.0, 3, Mode::Truncated);
        let fb = ForwardBackward::run(&t, &z, 0.0, Mode::Truncated).unwrap();
        for l in 1..=5 {
            let p = fb.bit_posterior(l).unwrap();
            assert_eq!(p.log_app_ratio, 0.0);
        }
        assert!(fb.decode().unwrap().bits().iter().all(|&b| b == 0));
    }

    #[test]
    fn errors() {
        let t = t75();
        let z = observe(&t, &[1, 0, 1], 1.0, 0, Mode::Terminated);
        let fb = ForwardBackward::run(&t, &z, 1.0, Mode::Terminated).unwrap();
        assert!(matches!(fb.bit_posterior(4), Err(Error::NotInformationDepth { .. })));
        assert!(matches!(fb.branch_posterior(&BranchSet::new(6, [0]).unwrap()), Err(Error::DepthOutOfRange { .. })));
        let short = ObservationSeq::new(2, vec![0.1; 4], 1.0, 0).unwrap();
        assert!(forward_pass(&t, &short, 1.0, Mode::Terminated).is_err());
        let odd = ObservationSeq::new(3, vec![0.1; 9], 1.0, 0).unwrap();
        assert!(backward_pass(&t, &odd, 1.0, Mode::Truncated).is_err());
    }
}
