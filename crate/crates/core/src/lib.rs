//! Link-level simulation of precoded downlink XL-MIMO with affine frequency
//! division multiplexing (AFDM).
//!
//! The crate is organised bottom-up:
//!
//! * [`afdm`]: the discrete affine Fourier transform (DAFT), modulation and
//!   the chirp-periodic prefix.
//! * [`channel`]: delay-Doppler paths and their DAFT-domain effective
//!   channel, plus a brute-force time-domain construction used as a check.
//! * [`xl_array`]: subarray-partitioned, spatially non-stationary XL-MIMO
//!   channels and the desired/intra/inter power split at each user.
//! * [`precoding`]: ZF/RZF, randomized Kaczmarz precoders and the FLOP model.
//! * [`metrics`]: SINR, sum-rate, QAM, AWGN and Monte Carlo BER.
//! * [`harness`]: configuration, experiment orchestration and CSV output.

pub mod afdm;
pub mod channel;
mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod precoding;
pub mod rng;
pub mod xl_array;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;
