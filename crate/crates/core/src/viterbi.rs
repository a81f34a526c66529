//! Maximum-likelihood sequence decoding (Viterbi), the baseline for MAP.
//!
//! Path metrics are sums of branch log metrics in depth order starting at
//! `0.0`, so the winner's metric is bitwise equal to `sequence_log_metric`
//! of the decoded codeword. Ties keep the survivor from the lower-indexed
//! predecessor; in truncated mode the lowest-indexed best end state wins.

use crate::channel::ObservationSeq;
use crate::code::{BitSeq, Mode, Trellis};
use crate::metric::{label_log_metric, MetricForm};
use crate::{Error, Result};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Best cumulative metric and predecessor for every (depth, state).
#[derive(Clone, Debug)]
pub struct SurvivorTable {
    n: usize,
    states: usize,
    metric: Vec<f64>,
    /// Predecessor state, `u32::MAX` where no survivor exists.
    pred: Vec<u32>,
    input: Vec<u8>,
}

impl SurvivorTable {
    pub fn build(trellis: &Trellis, z: &ObservationSeq, c: f64, mode: Mode) -> Result<Self> {
        if z.n0() != trellis.n0() {
            return Err(Error::LengthMismatch { expected: trellis.n0(), found: z.n0() });
        }
        let n = z.depth();
        mode.free_bits(n, trellis.nu())?;
        let states = trellis.num_states();
        let mut metric = vec![NEG_INF; (n + 1) * states];
        let mut pred = vec![u32::MAX; (n + 1) * states];
        let mut input = vec![0u8; (n + 1) * states];
        metric[0] = 0.0;
        for k in 1..=n {
            let zk = z.block(k - 1);
            for s in 0..states as u32 {
                let prev = metric[(k - 1) * states + s as usize];
                if prev == NEG_INF {
                    continue;
                }
                for edge in trellis.outgoing(s) {
                    if trellis.log_input_prior(k, edge.input, n, mode).is_none() {
                        continue;
                    }
                    let cand = prev + label_log_metric(edge.label, zk, c, MetricForm::Full);
                    let idx = k * states + edge.to as usize;
                    if cand > metric[idx] {
                        metric[idx] = cand;
                        pred[idx] = s;
                        input[idx] = edge.input;
                    }
                }
            }
        }
        Ok(Self { n, states, metric, pred, input })
    }

    /// Best cumulative metric into state `s` at depth `k`.
    pub fn metric(&self, k: usize, s: u32) -> f64 {
        self.metric[k * self.states + s as usize]
    }

    pub fn predecessor(&self, k: usize, s: u32) -> Option<u32> {
        let p = self.pred[k * self.states + s as usize];
        (p != u32::MAX).then_some(p)
    }

    fn end_state(&self, mode: Mode) -> u32 {
        match mode {
            Mode::Terminated => 0,
            Mode::Truncated => {
                let last = &self.metric[self.n * self.states..];
                let mut best = 0;
                for (s, &m) in last.iter().enumerate() {
                    if m > last[best] {
                        best = s;
                    }
                }
                best as u32
            }
        }
    }

    /// Input sequence along the winning path, tail included.
    fn traceback(&self, end: u32) -> Vec<u8> {
        let mut inputs = vec![0u8; self.n];
        let mut s = end;
        for k in (1..=self.n).rev() {
            let idx = k * self.states + s as usize;
            inputs[k - 1] = self.input[idx];
            s = self.pred[idx];
        }
        debug_assert_eq!(s, 0);
        inputs
    }
}

/// Result of an ML decode.
#[derive(Clone, Debug, PartialEq)]
pub struct MlDecision {
    /// Free information bits (tail excluded).
    pub info: BitSeq,
    pub codeword: BitSeq,
    /// `sequence_log_metric` of `codeword`.
    pub metric: f64,
}

/// Maximum-likelihood codeword for the observations.
pub fn ml_decode(trellis: &Trellis, z: &ObservationSeq, c: f64, mode: Mode) -> Result<MlDecision> {
    let table = SurvivorTable::build(trellis, z, c, mode)?;
    let end = table.end_state(mode);
    let metric = table.metric(table.n, end);
    if metric == NEG_INF {
        return Err(Error::Unreachable { depth: table.n });
    }
    let inputs = table.traceback(end);
    let free = mode.free_bits(table.n, trellis.nu())?;
    let codeword = trellis.labels_to_bits(trellis.walk(&inputs).into_iter().map(|t| t.label));
    Ok(MlDecision {
        info: BitSeq::information(inputs[..free].to_vec())?,
        codeword: BitSeq::codeword(codeword)?,
        metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{map_bpsk, transmit};
    use crate::code::{encode, enumerate_codewords, GeneratorSpec};
    use crate::metric::sequence_log_metric;

    fn t75() -> Trellis {
        Trellis::new(GeneratorSpec::from_octal("7,5").unwrap())
    }

    #[test]
    fn noiseless_recovers_sequence() {
        let t = t75();
        let info = BitSeq::information(vec![1, 1, 0, 1, 0, 0, 1]).unwrap();
        let cw = encode(t.spec(), &info, true).unwrap();
        let x = map_bpsk(&cw, 2).unwrap();
        let z = ObservationSeq::new(2, x.values().iter().map(|v| 3.0 * v).collect(), 3.0, 0).unwrap();
        let d = ml_decode(&t, &z, 3.0, Mode::Terminated).unwrap();
        assert_eq!(d.info, info);
        assert_eq!(d.codeword, cw);
    }

    #[test]
    fn zero_gain_decodes_all_zero() {
        let t = t75();
        for mode in [Mode::Terminated, Mode::Truncated] {
            let z = ObservationSeq::new(2, vec![0.37; 16], 0.0, 0).unwrap();
            let d = ml_decode(&t, &z, 0.0, mode).unwrap();
            assert!(d.info.bits().iter().all(|&b| b == 0), "{mode}");
        }
    }

    #[test]
    fn winner_is_exhaustive_maximum() {
        for (taps, mode) in [("7,5", Mode::Terminated), ("15,17", Mode::Terminated), ("7,5", Mode::Truncated)] {
            let t = Trellis::new(GeneratorSpec::from_octal(taps).unwrap());
            let n = 10;
            for seed in 0..30u64 {
                let info: Vec<u8> = (0..mode.free_bits(n, t.nu()).unwrap())
                    .map(|i| (seed * 7 + i as u64).is_multiple_of(3) as u8)
                    .collect();
                let cw = encode(t.spec(), &BitSeq::information(info).unwrap(), mode == Mode::Terminated).unwrap();
                let (z, _) = transmit(&map_bpsk(&cw, t.n0()).unwrap(), 0.8, seed);
                let d = ml_decode(&t, &z, 0.8, mode).unwrap();
                let best = enumerate_codewords(&t, n, mode)
                    .unwrap()
                    .map(|(cw, _)| sequence_log_metric(&map_bpsk(&cw, t.n0()).unwrap(), &z, 0.8).unwrap().0)
                    .fold(NEG_INF, f64::max);
                assert_eq!(d.metric, best, "{taps} {mode} seed {seed}");
                let re = encode(t.spec(), &d.info, mode == Mode::Terminated).unwrap();
                assert_eq!(re, d.codeword);
                let own = sequence_log_metric(&map_bpsk(&d.codeword, t.n0()).unwrap(), &z, 0.8).unwrap().0;
                assert_eq!(own, d.metric);
            }
        }
    }
}
