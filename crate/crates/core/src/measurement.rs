//! Impulse augmentation that forces the minimum (or maximum) phase property,
//! its inverse, and additive measurement noise.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ComplexSignal, MeasurementSet};

/// Which end of the signal receives the impulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `[delta, 0 x gap, s]`, minimum phase when `|delta| >= ||s||_1`.
    Prefix,
    /// `[s, 0 x gap, delta]`, maximum phase when `|delta| >= ||s||_1`.
    Suffix,
}

/// How the impulse magnitude is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImpulsePolicy {
    /// `delta = ||s||_1 (1 + 1e-3)`, certified margin.
    L1Margin,
    /// `delta = 3 sigma N` for entries with per-entry standard deviation `sigma`.
    ThreeSigma { sigma: f64 },
}

/// Relative margin above `||s||_1` used by [`ImpulsePolicy::L1Margin`].
pub const L1_MARGIN: f64 = 1e-3;

/// Placement and value of the reference impulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationSpec {
    pub delta: Complex64,
    pub gap: usize,
    pub side: Side,
}

impl AugmentationSpec {
    pub fn prefix(delta: f64) -> Self {
        Self {
            delta: Complex64::new(delta, 0.0),
            gap: 0,
            side: Side::Prefix,
        }
    }

    pub fn suffix(delta: f64) -> Self {
        Self {
            delta: Complex64::new(delta, 0.0),
            gap: 0,
            side: Side::Suffix,
        }
    }

    pub fn with_gap(mut self, gap: usize) -> Self {
        self.gap = gap;
        self
    }

    /// Real positive impulse chosen by `policy` for signal `s`.
    pub fn for_signal(s: &ComplexSignal, policy: ImpulsePolicy, side: Side) -> Self {
        let delta = match policy {
            ImpulsePolicy::L1Margin => {
                let l1 = s.l1_norm();
                if l1 > 0.0 {
                    l1 * (1.0 + L1_MARGIN)
                } else {
                    1.0
                }
            }
            ImpulsePolicy::ThreeSigma { sigma } => 3.0 * sigma * s.len() as f64,
        };
        Self {
            delta: Complex64::new(delta, 0.0),
            gap: 0,
            side,
        }
    }

    /// Length of the augmented signal for an `n`-length input.
    pub fn augmented_len(&self, n: usize) -> usize {
        n + self.gap + 1
    }

    /// Index of the impulse in the minimum-phase representation.
    fn impulse_index(&self, len: usize) -> usize {
        match self.side {
            Side::Prefix => 0,
            Side::Suffix => len - 1,
        }
    }
}

/// An augmented signal together with the data needed to undo it.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub signal: ComplexSignal,
    pub spec: AugmentationSpec,
    /// `||s||_1` of the original signal.
    pub l1_norm: f64,
    /// `|delta| >= ||s||_1`, the sufficient condition for the phase property.
    pub certified: bool,
}

fn check_side(spec: &AugmentationSpec, want: Side) -> Result<()> {
    if spec.side != want {
        return Err(Error::Config(format!(
            "augmentation side is {:?}, expected {:?}",
            spec.side, want
        )));
    }
    Ok(())
}

fn finish(signal: Vec<Complex64>, s: &ComplexSignal, spec: AugmentationSpec) -> Result<Augmented> {
    let l1 = s.l1_norm();
    Ok(Augmented {
        signal: ComplexSignal::new(signal)?,
        spec,
        l1_norm: l1,
        certified: spec.delta.norm() >= l1,
    })
}

/// `[delta, 0 x gap, s_0, ..., s_{N-1}]`.
pub fn augment_min_phase(s: &ComplexSignal, spec: AugmentationSpec) -> Result<Augmented> {
    check_side(&spec, Side::Prefix)?;
    let mut v = Vec::with_capacity(spec.augmented_len(s.len()));
    v.push(spec.delta);
    v.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), spec.gap));
    v.extend_from_slice(s.values());
    finish(v, s, spec)
}

/// `[s_0, ..., s_{N-1}, 0 x gap, delta]`.
pub fn augment_max_phase(s: &ComplexSignal, spec: AugmentationSpec) -> Result<Augmented> {
    check_side(&spec, Side::Suffix)?;
    let mut v = Vec::with_capacity(spec.augmented_len(s.len()));
    v.extend_from_slice(s.values());
    v.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), spec.gap));
    v.push(spec.delta);
    finish(v, s, spec)
}

/// Dispatches on `spec.side`.
pub fn augment(s: &ComplexSignal, spec: AugmentationSpec) -> Result<Augmented> {
    match spec.side {
        Side::Prefix => augment_min_phase(s, spec),
        Side::Suffix => augment_max_phase(s, spec),
    }
}

/// Element-wise conjugate in reversed order. Maps every zero to its conjugate
/// reciprocal and leaves `|F_M x|^2` unchanged.
pub fn conjugate_reversal(x: &ComplexSignal) -> ComplexSignal {
    ComplexSignal::new(x.values().iter().rev().map(|v| v.conj()).collect())
        .expect("reversal of a valid signal is valid")
}

/// Undoes an augmentation given the recovered minimum-phase signal.
///
/// The estimate is rotated so the impulse entry carries the phase of
/// `spec.delta` (real positive in the default pipeline), then the impulse and
/// the gap zeros are removed. For suffix placements the recovered signal is
/// first conjugate-reversed back to the measured orientation.
pub fn deaugment(xmin: &ComplexSignal, spec: &AugmentationSpec) -> Result<ComplexSignal> {
    let len = xmin.len();
    if len < spec.gap + 2 {
        return Err(Error::Dimension(format!(
            "recovered signal of length {len} cannot hold an impulse, {} gap zeros and a signal",
            spec.gap
        )));
    }
    let oriented = match spec.side {
        Side::Prefix => xmin.clone(),
        Side::Suffix => conjugate_reversal(xmin),
    };
    let idx = spec.impulse_index(len);
    let pivot = oriented.values()[idx];
    if pivot.norm() == 0.0 {
        return Err(Error::DegenerateRotation { index: idx });
    }
    let target = if spec.delta.norm() > 0.0 {
        spec.delta / spec.delta.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let rot = target * (pivot.conj() / pivot.norm());
    let rotated = oriented.scaled(rot);
    let body = match spec.side {
        Side::Prefix => rotated.values()[spec.gap + 1..].to_vec(),
        Side::Suffix => rotated.values()[..len - spec.gap - 1].to_vec(),
    };
    ComplexSignal::new(body)
}

/// Adds i.i.d. real Gaussian noise of variance `sigma2` to every sample.
pub fn add_noise(b: &MeasurementSet, sigma2: f64, seed: u64) -> Result<MeasurementSet> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(format!("noise variance {sigma2} must be >= 0")));
    }
    let mut out = b.clone();
    out.sigma2 = sigma2;
    if sigma2 == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("finite positive deviation");
    for v in out.b.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

/// Noise variance that produces `snr_db` for noiseless measurements `b`.
pub fn sigma2_for_snr(b: &MeasurementSet, snr_db: f64) -> f64 {
    b.norm_sqr() / (b.m() as f64 * 10f64.powf(snr_db / 10.0))
}
