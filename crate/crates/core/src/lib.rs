//! One-dimensional Fourier phase retrieval.
//!
//! Squared-magnitude DFT samples `b = |F_M x|^2` are linear in the
//! auto-correlation of `x`, so the least-squares fit becomes a convex program
//! over correlations. [`cork`] solves the sampled version with an FFT-only
//! ADMM, [`factor`] turns the correlation back into the unique minimum-phase
//! signal, and [`measurement`] adds a reference impulse to the measured
//! signal so that this minimum-phase factor is the signal itself. [`sdp`]
//! holds small lifted (PhaseLift-style) solvers used as bounds and
//! cross-checks, [`baselines`] the classical alternating projections, and
//! [`bench`] the Monte-Carlo experiment harness.

pub mod baselines;
pub mod bench;
pub mod cork;
pub mod error;
pub mod factor;
pub mod fft;
pub mod io;
pub mod measurement;
pub mod sampling;
pub mod sdp;
pub mod signal;

pub use error::{Error, Result};
pub use signal::{AutoCorrelation, ComplexSignal, MeasurementSet};

pub use num_complex::Complex64;
