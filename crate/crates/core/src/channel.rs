//! BPSK mapping and the memoryless AWGN observation model `Z = cX + W`.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::code::{BitRole, BitSeq};
use crate::rng::{rng_from_seed, standard_normal};
use crate::{Error, Result};

/// Antipodal channel symbols, grouped into blocks of `n0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSeq {
    n0: usize,
    values: Vec<f64>,
}

impl SignalSeq {
    pub fn new(n0: usize, values: Vec<f64>) -> Result<Self> {
        check_blocks(n0, values.len())?;
        if let Some(v) = values.iter().find(|v| **v != 1.0 && **v != -1.0) {
            return Err(Error::Bits(format!("signal entry {v} is not +/-1")));
        }
        Ok(Self { n0, values })
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Number of blocks (trellis depth).
    pub fn depth(&self) -> usize {
        self.values.len() / self.n0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn block(&self, k: usize) -> &[f64] {
        &self.values[k * self.n0..(k + 1) * self.n0]
    }

    pub fn blocks(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.n0)
    }
}

/// Received blocks together with the channel gain and the seed that
/// produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeq {
    n0: usize,
    values: Vec<f64>,
    c: f64,
    seed: u64,
}

impl ObservationSeq {
    pub fn new(n0: usize, values: Vec<f64>, c: f64, seed: u64) -> Result<Self> {
        check_blocks(n0, values.len())?;
        Ok(Self { n0, values, c, seed })
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn depth(&self) -> usize {
        self.values.len() / self.n0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Block `k`, zero-based.
    pub fn block(&self, k: usize) -> &[f64] {
        &self.values[k * self.n0..(k + 1) * self.n0]
    }

    pub fn blocks(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.n0)
    }

    /// Writes one CSV row per block, preceded by a `# n0=.. c=.. seed=..`
    /// line and a column header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# n0={} c={:?} seed={}", self.n0, self.c, self.seed)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.n0).map(|i| format!("z{i}")))?;
        for block in self.blocks() {
            w.write_record(block.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut meta = String::new();
        reader.read_line(&mut meta)?;
        let meta = meta
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Config("observation CSV must start with a '#' metadata line".into()))?;
        let (mut n0, mut c, mut seed) = (None, None, None);
        for field in meta.split_whitespace() {
            let (key, value) =
                field.split_once('=').ok_or_else(|| Error::Config(format!("bad metadata field {field:?}")))?;
            let bad = || Error::Config(format!("bad value for {key}: {value:?}"));
            match key {
                "n0" => n0 = Some(value.parse::<usize>().map_err(|_| bad())?),
                "c" => c = Some(value.parse::<f64>().map_err(|_| bad())?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
                _ => {}
            }
        }
        let missing = |k: &str| Error::Config(format!("observation CSV metadata lacks {k}"));
        let n0 = n0.ok_or_else(|| missing("n0"))?;
        let c = c.ok_or_else(|| missing("c"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;
        let mut values = Vec::new();
        for record in csv::Reader::from_reader(reader).records() {
            let record = record?;
            if record.len() != n0 {
                return Err(Error::LengthMismatch { expected: n0, found: record.len() });
            }
            for f in record.iter() {
                values.push(f.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {f:?}")))?);
            }
        }
        Self::new(n0, values, c, seed)
    }
}

/// Channel noise blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSeq {
    n0: usize,
    values: Vec<f64>,
}

impl NoiseSeq {
    pub fn new(n0: usize, values: Vec<f64>) -> Result<Self> {
        check_blocks(n0, values.len())?;
        Ok(Self { n0, values })
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn depth(&self) -> usize {
        self.values.len() / self.n0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn blocks(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.n0)
    }
}

fn check_blocks(n0: usize, len: usize) -> Result<()> {
    if n0 == 0 {
        return Err(Error::Spec("block size n0 must be positive".into()));
    }
    if !len.is_multiple_of(n0) {
        return Err(Error::LengthMismatch { expected: len.next_multiple_of(n0), found: len });
    }
    Ok(())
}

/// Maps code bit 0 to +1 and 1 to -1.
pub fn map_bpsk(codeword: &BitSeq, n0: usize) -> Result<SignalSeq> {
    if codeword.role() != BitRole::Codeword {
        return Err(Error::Bits("BPSK mapping expects a codeword".into()));
    }
    check_blocks(n0, codeword.len())?;
    let values = codeword.bits().iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
    Ok(SignalSeq { n0, values })
}

/// Sends `signal` through the AWGN channel with gain `c`, returning the
/// observations and the unit-variance noise that was added.
pub fn transmit(signal: &SignalSeq, c: f64, seed: u64) -> (ObservationSeq, NoiseSeq) {
    assert!(c >= 0.0, "channel gain must be non-negative");
    let mut rng = rng_from_seed(seed);
    let noise: Vec<f64> = (0..signal.values.len()).map(|_| standard_normal(&mut rng)).collect();
    let values = signal.values.iter().zip(&noise).map(|(x, w)| c * x + w).collect();
    (ObservationSeq { n0: signal.n0, values, c, seed }, NoiseSeq { n0: signal.n0, values: noise })
}

/// Draws `n` blocks of i.i.d. standard normal observations, the law of `Z`
/// under the reference measure. The recorded gain is zero.
pub fn sample_q_observations(n: usize, n0: usize, seed: u64) -> ObservationSeq {
    assert!(n >= 1 && n0 >= 1, "need at least one block of one symbol");
    let mut rng = rng_from_seed(seed);
    let values = (0..n * n0).map(|_| standard_normal(&mut rng)).collect();
    ObservationSeq { n0, values, c: 0.0, seed }
}

/// Channel gain `c = sqrt(2 Es/N0)` for an Es/N0 given in dB.
pub fn snr_to_c(es_n0_db: f64) -> f64 {
    (2.0 * 10f64.powf(es_n0_db / 10.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cw(s: &str) -> BitSeq {
        BitSeq::parse(s, BitRole::Codeword).unwrap()
    }

    #[test]
    fn bpsk_mapping_rule() {
        let s = map_bpsk(&cw("0010"), 2).unwrap();
        assert_eq!(s.block(0), &[1.0, 1.0]);
        assert_eq!(s.block(1), &[-1.0, 1.0]);
        assert!(map_bpsk(&cw("000"), 2).is_err());
        assert!(map_bpsk(&cw("0000"), 2).unwrap().values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn bpsk_inversion_negates() {
        let a = cw("0110100111");
        let inv = BitSeq::codeword(a.bits().iter().map(|b| 1 - b).collect()).unwrap();
        let sa = map_bpsk(&a, 2).unwrap();
        let si = map_bpsk(&inv, 2).unwrap();
        for (x, y) in sa.values().iter().zip(si.values()) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn zero_gain_passes_noise() {
        let s = map_bpsk(&cw("01100110"), 2).unwrap();
        let (z, w) = transmit(&s, 0.0, 5);
        assert_eq!(z.values(), w.values());
    }

    #[test]
    fn transmit_is_deterministic_and_additive() {
        let s = map_bpsk(&cw("0110011011"), 2).unwrap();
        let (z1, w1) = transmit(&s, 1.3, 77);
        let (z2, _) = transmit(&s, 1.3, 77);
        assert_eq!(z1, z2);
        for ((z, x), w) in z1.values().iter().zip(s.values()).zip(w1.values()) {
            assert_eq!(*z, 1.3 * x + w);
        }
        let (z3, _) = transmit(&s, 1.3, 78);
        assert_ne!(z1, z3);
    }

    #[test]
    fn noise_mean_within_four_se() {
        let m = 100_000;
        let s = SignalSeq::new(1, vec![1.0; m]).unwrap();
        let c = 0.8;
        let (z, _) = transmit(&s, c, 2024);
        let resid: Vec<f64> = z.values().iter().map(|v| v - c).collect();
        let mean = resid.iter().sum::<f64>() / m as f64;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert!(mean.abs() <= 4.0 * (var / m as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn q_observations_are_standard_normal() {
        let m = 100_000;
        let z = sample_q_observations(m, 2, 31337);
        let a: Vec<f64> = z.blocks().map(|b| b[0]).collect();
        let b: Vec<f64> = z.blocks().map(|b| b[1]).collect();
        let mf = m as f64;
        let var_a = a.iter().map(|v| v * v).sum::<f64>() / mf;
        // Var of a sample second moment of N(0,1) is 2/M.
        assert!((var_a - 1.0).abs() <= 4.0 * (2.0 / mf).sqrt(), "var {var_a}");
        let cross = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / mf;
        assert!(cross.abs() <= 4.0 * (1.0 / mf).sqrt(), "cross {cross}");
        assert_eq!(z, sample_q_observations(m, 2, 31337));
    }

    #[test]
    fn snr_conversion() {
        assert!((snr_to_c(0.0) - 2f64.sqrt()).abs() < 1e-12);
        assert!((snr_to_c(-3.0103) - 1.0).abs() < 1e-5);
        assert!((snr_to_c(6.0206) - 2.0 * 2f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn csv_round_trip() {
        let s = map_bpsk(&cw("011011"), 2).unwrap();
        let (z, _) = transmit(&s, 1.1, 9);
        let mut buf = Vec::new();
        z.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# n0=2 c=1.1 seed=9\nz1,z2\n"));
        assert_eq!(ObservationSeq::read_csv(&buf[..]).unwrap(), z);
        assert!(ObservationSeq::read_csv(&b"z1,z2\n1,2\n"[..]).is_err());
    }
}
