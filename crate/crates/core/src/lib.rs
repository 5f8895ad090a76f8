//! Link-level simulation and error-bound analysis for windowed OTSM
//! (orthogonal time sequency multiplexing) without zero padding, under
//! oscillator phase noise.
//!
//! Symbols live on an `M x N` delay-sequency grid. The transmitter spreads
//! them with a sequency-ordered Walsh-Hadamard transform along time, shapes
//! each block with a sampled window, and the cyclic doubly-selective channel
//! plus a Wiener phase process act on the resulting time-domain samples.
//!
//! Module map:
//! - [`params`], [`constellation`], [`rng`]: shared parameters, symbol
//!   mapping and reproducible random streams.
//! - [`transforms`], [`windows`]: DFT/Walsh matrices and window samples.
//! - [`channel`], [`modem`]: channel/PHN draws and the transmit/receive chain.
//! - [`detectors`], [`coding`]: ML and soft LMMSE detection, LDPC coding and
//!   the iterative detection-decoding loop.
//! - [`analysis`]: pairwise error probabilities and the union bound.
//! - [`spectral`]: oversampled synthesis and out-of-band emission estimates.
//! - [`sim`]: single-trial link runners used by the Monte Carlo drivers.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod coding;
pub mod constellation;
pub mod detectors;
mod error;
pub mod modem;
pub mod params;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod transforms;
pub mod windows;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used for every `MN x MN` operator.
pub type CMatrix = nalgebra::DMatrix<C64>;
