//! Posterior estimation and decoding of convolutionally encoded sequences
//! sent over a BPSK/AWGN channel.
//!
//! The observation model is `Z_k = c X_k + W_k`, where `X_k` is the
//! antipodal image of the k-th encoded block and `W_k` is standard normal
//! noise. Under the reference measure `Q` obtained from the exponential
//! martingale `alpha_n`, the observations become i.i.d. standard normal and
//! the a-posteriori probability of any branch event reduces to a ratio of
//! sequence-metric sums. This crate provides:
//!
//! - [`code`]: generator specs, trellis construction, encoding, codeword enumeration.
//! - [`channel`]: BPSK mapping, seeded AWGN transmission, sampling under `Q`.
//! - [`metric`]: symbol/branch/sequence log metrics and the densities `alpha_n`, `beta_n`.
//! - [`exact`]: brute-force posteriors over every codeword (the oracle).
//! - [`recursive`]: forward-backward posteriors and MAP bit decoding.
//! - [`viterbi`]: maximum-likelihood sequence decoding.
//! - [`measure`]: Monte-Carlo checks of the measure-change identities.
//! - [`experiment`]: configurable experiment runners used by the CLI.

pub mod channel;
pub mod code;
mod error;
pub mod exact;
pub mod experiment;
pub mod measure;
pub mod metric;
pub mod posterior;
pub mod recursive;
pub mod rng;
pub mod viterbi;

pub use channel::{map_bpsk, sample_q_observations, snr_to_c, transmit, NoiseSeq, ObservationSeq, SignalSeq};
pub use code::{encode, BitRole, BitSeq, GeneratorSpec, Mode, Trellis};
pub use error::{Error, Result};
pub use posterior::{BitPosterior, BranchSet, PosteriorTable};
