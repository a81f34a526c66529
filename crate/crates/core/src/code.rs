//! Rate-1/n0 convolutional codes: generator specs, trellis, encoder and
//! codeword enumeration.
//!
//! Conventions used throughout the crate:
//!
//! - A generator polynomial is stored as a bitmask whose bit `j` is the
//!   coefficient of `D^j`. Octal strings follow the usual coding-theory
//!   layout instead: the most significant of the `nu + 1` bits is the
//!   coefficient applied to the current input, so `"7,5"` is
//!   `(1 + D + D^2, 1 + D^2)`.
//! - A state at depth `k` is an integer whose bit `j` holds `i_{k-j}`, the
//!   input bit seen `j` steps ago. The shift register for an input `b` is
//!   therefore `b | state << 1` and the next state is that register masked
//!   to `nu` bits.
//! - A branch label is a bitmask whose bit `i` is the output of tap `i`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest supported memory. Keeps state and register indices in `u32`.
pub const MAX_MEMORY: usize = 16;
/// Largest supported number of outputs per input bit.
pub const MAX_OUTPUTS: usize = 16;

/// Termination mode of a finite trellis section.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `nu` zero tail bits drive the encoder back to the all-zero state.
    Terminated,
    /// No tail; every ending state is allowed.
    Truncated,
}

impl Mode {
    /// Number of free information bits in a section of total depth `n`.
    pub fn free_bits(self, n: usize, nu: usize) -> Result<usize> {
        match self {
            Mode::Terminated if n <= nu => Err(Error::NoFreeBits { depth: n, nu }),
            Mode::Terminated => Ok(n - nu),
            Mode::Truncated if n == 0 => Err(Error::NoFreeBits { depth: n, nu }),
            Mode::Truncated => Ok(n),
        }
    }

    /// Total trellis depth for `info_len` information bits.
    pub fn total_depth(self, info_len: usize, nu: usize) -> usize {
        match self {
            Mode::Terminated => info_len + nu,
            Mode::Truncated => info_len,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Terminated => "terminated",
            Mode::Truncated => "truncated",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "terminated" => Ok(Mode::Terminated),
            "truncated" => Ok(Mode::Truncated),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Generator polynomials of a rate-1/n0 code with memory `nu`.
///
/// Canonicality of the generator matrix is assumed, not checked.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorSpecRepr", into = "GeneratorSpecRepr")]
pub struct GeneratorSpec {
    nu: usize,
    taps: Vec<u32>,
}

impl GeneratorSpec {
    /// Builds a spec from polynomial bitmasks (bit `j` = coefficient of `D^j`).
    pub fn new(nu: usize, taps: Vec<u32>) -> Result<Self> {
        if nu == 0 || nu > MAX_MEMORY {
            return Err(Error::Spec(format!("memory must be in 1..={MAX_MEMORY}, got {nu}")));
        }
        if taps.is_empty() || taps.len() > MAX_OUTPUTS {
            return Err(Error::Spec(format!("number of taps must be in 1..={MAX_OUTPUTS}, got {}", taps.len())));
        }
        for (i, &t) in taps.iter().enumerate() {
            if t == 0 {
                return Err(Error::Spec(format!("tap {i} is the zero polynomial")));
            }
            if degree(t) > nu {
                return Err(Error::Spec(format!("tap {i} has degree {} > memory {nu}", degree(t))));
            }
        }
        if !taps.iter().any(|&t| degree(t) == nu) {
            return Err(Error::Spec(format!("no tap reaches degree {nu}")));
        }
        Ok(Self { nu, taps })
    }

    /// Like [`GeneratorSpec::new`] but also checks the declared output count.
    pub fn with_outputs(n0: usize, nu: usize, taps: Vec<u32>) -> Result<Self> {
        if taps.len() != n0 {
            return Err(Error::Spec(format!("expected {n0} taps, got {}", taps.len())));
        }
        Self::new(nu, taps)
    }

    /// Parses comma-separated octal taps, inferring `nu` from the widest tap.
    pub fn from_octal(s: &str) -> Result<Self> {
        let values = parse_octal_list(s)?;
        let width = values.iter().map(|&v| 32 - v.leading_zeros() as usize).max().unwrap_or(0);
        if width < 2 {
            return Err(Error::Spec(format!("octal taps {s:?} describe a memoryless code")));
        }
        Self::from_octal_values(&values, width - 1)
    }

    /// Parses comma-separated octal taps for a code of known memory `nu`.
    pub fn from_octal_with_memory(s: &str, nu: usize) -> Result<Self> {
        let values = parse_octal_list(s)?;
        Self::from_octal_values(&values, nu)
    }

    fn from_octal_values(values: &[u32], nu: usize) -> Result<Self> {
        if nu == 0 || nu > MAX_MEMORY {
            return Err(Error::Spec(format!("memory must be in 1..={MAX_MEMORY}, got {nu}")));
        }
        let taps = values
            .iter()
            .map(|&v| {
                if v >> (nu + 1) != 0 {
                    return Err(Error::Spec(format!("octal tap {v:o} is wider than nu + 1 = {} bits", nu + 1)));
                }
                Ok(reverse_bits(v, nu + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(nu, taps)
    }

    pub fn n0(&self) -> usize {
        self.taps.len()
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    /// Polynomial bitmasks, bit `j` = coefficient of `D^j`.
    pub fn taps(&self) -> &[u32] {
        &self.taps
    }

    /// Octal rendering in the MSB-is-current-input convention.
    pub fn to_octal(&self) -> String {
        self.taps.iter().map(|&t| format!("{:o}", reverse_bits(t, self.nu + 1))).collect::<Vec<_>>().join(",")
    }

    /// Output label for a full shift register (`bit j` = `i_{k-j}`).
    #[inline]
    pub fn output_label(&self, register: u32) -> u32 {
        self.taps.iter().enumerate().fold(0, |acc, (i, &t)| acc | (((register & t).count_ones() & 1) << i))
    }
}

#[derive(Serialize, Deserialize)]
struct GeneratorSpecRepr {
    taps: String,
    nu: usize,
}

impl TryFrom<GeneratorSpecRepr> for GeneratorSpec {
    type Error = Error;

    fn try_from(r: GeneratorSpecRepr) -> Result<Self> {
        GeneratorSpec::from_octal_with_memory(&r.taps, r.nu)
    }
}

impl From<GeneratorSpec> for GeneratorSpecRepr {
    fn from(g: GeneratorSpec) -> Self {
        GeneratorSpecRepr { taps: g.to_octal(), nu: g.nu }
    }
}

fn parse_octal_list(s: &str) -> Result<Vec<u32>> {
    let values = s
        .split(',')
        .map(|f| {
            let f = f.trim();
            u32::from_str_radix(f, 8).map_err(|_| Error::Spec(format!("invalid octal tap {f:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Spec("no taps given".into()));
    }
    Ok(values)
}

fn degree(poly: u32) -> usize {
    debug_assert!(poly != 0);
    31 - poly.leading_zeros() as usize
}

fn reverse_bits(v: u32, width: usize) -> u32 {
    (0..width).fold(0, |acc, j| acc | (((v >> j) & 1) << (width - 1 - j)))
}

/// What a bit sequence represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitRole {
    Information,
    Codeword,
}

/// A sequence of bits, each stored as `0` or `1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitSeq {
    bits: Vec<u8>,
    role: BitRole,
}

impl BitSeq {
    pub fn new(bits: Vec<u8>, role: BitRole) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Bits(format!("value {} at position {pos} is not a bit", bits[pos])));
        }
        Ok(Self { bits, role })
    }

    pub fn information(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits, BitRole::Information)
    }

    pub fn codeword(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits, BitRole::Codeword)
    }

    /// Parses a string of `0`/`1` characters; whitespace is ignored.
    pub fn parse(s: &str, role: BitRole) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Bits(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bits, role })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn role(&self) -> BitRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bitwise XOR of two equally long sequences.
    pub fn xor(&self, other: &BitSeq) -> Result<BitSeq> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: other.len() });
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect();
        Ok(BitSeq { bits, role: self.role })
    }
}

impl fmt::Display for BitSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

/// One edge of the trellis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub from: u32,
    pub input: u8,
    pub to: u32,
    pub label: u32,
}

/// Time-invariant trellis section of a rate-1/n0 code.
#[derive(Clone, Debug)]
pub struct Trellis {
    spec: GeneratorSpec,
    /// `edges[s][b]` for state `s` and input `b`.
    edges: Vec<[Transition; 2]>,
    /// The two transitions entering each state.
    incoming: Vec<[Transition; 2]>,
}

impl Trellis {
    pub fn new(spec: GeneratorSpec) -> Self {
        let nu = spec.nu();
        let states = 1usize << nu;
        let mask = (states - 1) as u32;
        let edges: Vec<[Transition; 2]> = (0..states as u32)
            .map(|s| {
                [0u8, 1].map(|b| {
                    let register = b as u32 | (s << 1);
                    Transition { from: s, input: b, to: register & mask, label: spec.output_label(register) }
                })
            })
            .collect();
        let mut incoming: Vec<Vec<Transition>> = vec![Vec::with_capacity(2); states];
        for t in edges.iter().flatten() {
            incoming[t.to as usize].push(*t);
        }
        let incoming = incoming
            .into_iter()
            .map(|v| {
                debug_assert_eq!(v.len(), 2);
                [v[0], v[1]]
            })
            .collect();
        Self { spec, edges, incoming }
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn nu(&self) -> usize {
        self.spec.nu()
    }

    pub fn n0(&self) -> usize {
        self.spec.n0()
    }

    pub fn num_states(&self) -> usize {
        self.edges.len()
    }

    /// Number of distinct label values, `2^n0`.
    pub fn num_labels(&self) -> usize {
        1 << self.n0()
    }

    #[inline]
    pub fn edge(&self, state: u32, input: u8) -> Transition {
        self.edges[state as usize][input as usize]
    }

    pub fn outgoing(&self, state: u32) -> &[Transition; 2] {
        &self.edges[state as usize]
    }

    pub fn incoming(&self, state: u32) -> &[Transition; 2] {
        &self.incoming[state as usize]
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> + '_ {
        self.edges.iter().flatten()
    }

    /// Log prior of taking input `input` on the edge into depth `depth`
    /// (1-based) of a section of total depth `n`, or `None` if forbidden.
    ///
    /// Free information bits carry `ln 1/2`; forced tail zeros carry `0`.
    #[inline]
    pub fn log_input_prior(&self, depth: usize, input: u8, n: usize, mode: Mode) -> Option<f64> {
        if mode == Mode::Terminated && depth + self.nu() > n {
            (input == 0).then_some(0.0)
        } else {
            Some(-std::f64::consts::LN_2)
        }
    }

    /// States reachable at each depth `0..=n` on paths that respect `mode`.
    pub fn depth_profile(&self, n: usize, mode: Mode) -> Result<Vec<Vec<u32>>> {
        mode.free_bits(n, self.nu())?;
        let states = self.num_states();
        let mut fwd = vec![vec![false; states]; n + 1];
        fwd[0][0] = true;
        for k in 1..=n {
            for s in 0..states as u32 {
                if !fwd[k - 1][s as usize] {
                    continue;
                }
                for t in self.outgoing(s) {
                    if self.log_input_prior(k, t.input, n, mode).is_some() {
                        fwd[k][t.to as usize] = true;
                    }
                }
            }
        }
        let mut bwd = vec![vec![false; states]; n + 1];
        match mode {
            Mode::Terminated => bwd[n][0] = true,
            Mode::Truncated => bwd[n].iter_mut().for_each(|b| *b = true),
        }
        for k in (0..n).rev() {
            for s in 0..states as u32 {
                bwd[k][s as usize] = self
                    .outgoing(s)
                    .iter()
                    .any(|t| self.log_input_prior(k + 1, t.input, n, mode).is_some() && bwd[k + 1][t.to as usize]);
            }
        }
        Ok((0..=n)
            .map(|k| (0..states as u32).filter(|&s| fwd[k][s as usize] && bwd[k][s as usize]).collect())
            .collect())
    }

    /// Follows the input sequence from the all-zero state, returning the
    /// visited transitions.
    pub fn walk(&self, inputs: &[u8]) -> Vec<Transition> {
        let mut state = 0;
        inputs
            .iter()
            .map(|&b| {
                let t = self.edge(state, b);
                state = t.to;
                t
            })
            .collect()
    }

    /// Flattens branch labels into codeword bits, tap order within a block.
    pub fn labels_to_bits(&self, labels: impl IntoIterator<Item = u32>) -> Vec<u8> {
        let n0 = self.n0();
        labels.into_iter().flat_map(|l| (0..n0).map(move |i| ((l >> i) & 1) as u8)).collect()
    }

    pub fn label_string(&self, label: u32) -> String {
        (0..self.n0()).map(|i| if (label >> i) & 1 == 1 { '1' } else { '0' }).collect()
    }

    /// Full input sequence (information bits plus any tail) for `info`.
    pub fn inputs_for(&self, info: &[u8], mode: Mode) -> Vec<u8> {
        let mut inputs = info.to_vec();
        if mode == Mode::Terminated {
            inputs.extend(std::iter::repeat_n(0, self.nu()));
        }
        inputs
    }
}

/// Builds the trellis of a generator spec.
pub fn build_trellis(spec: &GeneratorSpec) -> Trellis {
    Trellis::new(spec.clone())
}

/// Encodes `info` with a shift register. Terminated mode appends `nu` zero
/// tail bits so the register ends in the all-zero state.
pub fn encode(spec: &GeneratorSpec, info: &BitSeq, terminated: bool) -> Result<BitSeq> {
    if info.role() != BitRole::Information {
        return Err(Error::Bits("encoder input must be an information sequence".into()));
    }
    if info.is_empty() {
        return Err(Error::Empty("information sequence"));
    }
    let tail = if terminated { spec.nu() } else { 0 };
    let n0 = spec.n0();
    let mut register = 0u32;
    let mut out = Vec::with_capacity((info.len() + tail) * n0);
    for &b in info.bits().iter().chain(std::iter::repeat_n(&0, tail)) {
        register = ((register << 1) | b as u32) & ((1 << (spec.nu() + 1)) - 1);
        let label = spec.output_label(register);
        out.extend((0..n0).map(|i| ((label >> i) & 1) as u8));
    }
    BitSeq::codeword(out)
}

/// Cap on the number of free bits the iterator will enumerate.
pub const MAX_ENUMERATION_BITS: usize = 40;

/// Iterator over every codeword of a finite trellis section, paired with
/// its free information bits. Information sequences are produced in
/// lexicographic order, first bit most significant.
pub struct Codewords<'a> {
    trellis: &'a Trellis,
    mode: Mode,
    free: usize,
    next: u64,
    end: u64,
}

impl Iterator for Codewords<'_> {
    type Item = (BitSeq, BitSeq);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let counter = self.next;
        self.next += 1;
        let info: Vec<u8> = (0..self.free).map(|l| ((counter >> (self.free - 1 - l)) & 1) as u8).collect();
        let inputs = self.trellis.inputs_for(&info, self.mode);
        let bits = self.trellis.labels_to_bits(self.trellis.walk(&inputs).into_iter().map(|t| t.label));
        Some((BitSeq { bits, role: BitRole::Codeword }, BitSeq { bits: info, role: BitRole::Information }))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = (self.end - self.next) as usize;
        (rem, Some(rem))
    }
}

impl ExactSizeIterator for Codewords<'_> {}

/// Enumerates the `2^(n-nu)` terminated or `2^n` truncated codewords of depth `n`.
pub fn enumerate_codewords(trellis: &Trellis, n: usize, mode: Mode) -> Result<Codewords<'_>> {
    let free = mode.free_bits(n, trellis.nu())?;
    if free > MAX_ENUMERATION_BITS {
        return Err(Error::EnumerationTooLarge { free_bits: free, cap: MAX_ENUMERATION_BITS });
    }
    Ok(Codewords { trellis, mode, free, next: 0, end: 1u64 << free })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code75() -> GeneratorSpec {
        GeneratorSpec::from_octal("7,5").unwrap()
    }

    #[test]
    fn octal_75_is_standard_pair() {
        let g = code75();
        assert_eq!(g.nu(), 2);
        assert_eq!(g.n0(), 2);
        // 1 + D + D^2 and 1 + D^2
        assert_eq!(g.taps(), &[0b111, 0b101]);
        assert_eq!(g.to_octal(), "7,5");
    }

    #[test]
    fn octal_msb_is_current_input() {
        // 6 = 110 -> 1 + D ; 3 = 011 -> D + D^2
        let g = GeneratorSpec::from_octal_with_memory("6,3", 2).unwrap();
        assert_eq!(g.taps(), &[0b011, 0b110]);
        let k7 = GeneratorSpec::from_octal("171,133").unwrap();
        assert_eq!(k7.nu(), 6);
        assert_eq!(k7.to_octal(), "171,133");
    }

    #[test]
    fn malformed_specs_rejected() {
        assert!(GeneratorSpec::with_outputs(2, 2, vec![0b111, 0b101, 0b011]).is_err());
        assert!(GeneratorSpec::new(2, vec![0b1111]).is_err());
        assert!(GeneratorSpec::new(2, vec![0b11, 0b01]).is_err());
        assert!(GeneratorSpec::new(0, vec![0b1]).is_err());
        assert!(GeneratorSpec::new(2, vec![]).is_err());
        assert!(GeneratorSpec::from_octal("7,9").is_err());
        assert!(GeneratorSpec::from_octal_with_memory("17", 2).is_err());
        assert!(GeneratorSpec::from_octal("1").is_err());
    }

    #[test]
    fn trellis_sizes() {
        let t = Trellis::new(code75());
        assert_eq!(t.num_states(), 4);
        assert_eq!(t.transitions().count(), 8);
        for s in 0..4 {
            assert_eq!(t.incoming(s).len(), 2);
            assert!(t.incoming(s).iter().all(|e| e.to == s));
        }
    }

    #[test]
    fn differential_code_labels() {
        // 1 + D: label = b xor previous bit, and the state is the previous bit.
        let t = Trellis::new(GeneratorSpec::with_outputs(1, 1, vec![0b11]).unwrap());
        assert_eq!(t.num_states(), 2);
        for s in 0..2u32 {
            for b in 0..2u8 {
                let e = t.edge(s, b);
                assert_eq!(e.label, (b as u32) ^ s);
                assert_eq!(e.to, b as u32);
            }
        }
    }

    #[test]
    fn impulse_response_75() {
        let info = BitSeq::information(vec![1]).unwrap();
        let cw = encode(&code75(), &info, true).unwrap();
        assert_eq!(cw.to_string(), "111011");
        let t = Trellis::new(code75());
        let walk = t.labels_to_bits(t.walk(&[1, 0, 0]).into_iter().map(|e| e.label));
        assert_eq!(walk, cw.bits());
    }

    #[test]
    fn zero_input_zero_output() {
        let info = BitSeq::information(vec![0; 9]).unwrap();
        let cw = encode(&code75(), &info, true).unwrap();
        assert_eq!(cw.len(), 11 * 2);
        assert!(cw.bits().iter().all(|&b| b == 0));
    }

    #[test]
    fn encode_rejects_codeword_role_and_empty() {
        let g = code75();
        assert!(encode(&g, &BitSeq::codeword(vec![1]).unwrap(), true).is_err());
        assert!(encode(&g, &BitSeq::information(vec![]).unwrap(), true).is_err());
    }

    #[test]
    fn codeword_counts() {
        let t = Trellis::new(code75());
        assert_eq!(enumerate_codewords(&t, 5, Mode::Terminated).unwrap().count(), 8);
        assert_eq!(enumerate_codewords(&t, 3, Mode::Terminated).unwrap().count(), 2);
        assert!(enumerate_codewords(&t, 2, Mode::Terminated).is_err());
        let d = Trellis::new(GeneratorSpec::new(1, vec![0b11]).unwrap());
        assert_eq!(enumerate_codewords(&d, 3, Mode::Truncated).unwrap().count(), 8);
    }

    #[test]
    fn terminated_profile_ends_in_zero() {
        let t = Trellis::new(GeneratorSpec::from_octal("15,17").unwrap());
        let p = t.depth_profile(9, Mode::Terminated).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p[0], vec![0]);
        assert_eq!(p[9], vec![0]);
        assert_eq!(p[1], vec![0, 1]);
        assert_eq!(p[3].len(), 8);
        assert_eq!(p[8].len(), 2);
        let q = t.depth_profile(9, Mode::Truncated).unwrap();
        assert_eq!(q[9].len(), 8);
    }

    #[test]
    fn bitseq_parse_and_display() {
        let b = BitSeq::parse("00 10", BitRole::Codeword).unwrap();
        assert_eq!(b.bits(), &[0, 0, 1, 0]);
        assert_eq!(b.to_string(), "0010");
        assert!(BitSeq::parse("012", BitRole::Codeword).is_err());
        assert!(BitSeq::information(vec![2]).is_err());
    }

    #[test]
    fn mode_parse() {
        assert_eq!("Terminated".parse::<Mode>().unwrap(), Mode::Terminated);
        assert_eq!("truncated".parse::<Mode>().unwrap(), Mode::Truncated);
        assert!("open".parse::<Mode>().is_err());
    }
}
