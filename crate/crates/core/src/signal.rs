//! Signal and correlation types, partial-DFT measurement maps and error metrics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

/// A finite complex sequence `x` of length `N >= 1` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal(Vec<Complex64>);

impl ComplexSignal {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("signal must have at least one entry".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput(format!("signal entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::Dimension(format!(
                "real part has {} entries, imaginary part {}",
                re.len(),
                im.len()
            )));
        }
        Self::new(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.norm()).sum()
    }

    /// Multiplies every entry by `alpha`.
    pub fn scaled(&self, alpha: Complex64) -> Self {
        Self(self.0.iter().map(|v| v * alpha).collect())
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.im.abs()))
    }
}

/// One-sided auto-correlation `r_0, ..., r_{N-1}` with `r_0` real and nonnegative.
///
/// The negative lags follow from `r_{-k} = conj(r_k)` and are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoCorrelation(Vec<Complex64>);

impl AutoCorrelation {
    /// Builds a correlation, hard-zeroing the imaginary part of `r_0`.
    pub fn new(mut values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("correlation must have at least one lag".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput(format!("correlation lag {i} is not finite")));
        }
        values[0].im = 0.0;
        if values[0].re < 0.0 {
            return Err(Error::InvalidCorrelation(format!(
                "zero-lag value {} is negative",
                values[0].re
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn r0(&self) -> f64 {
        self.0[0].re
    }

    /// `[r_{1-N}, ..., r_{-1}, r_0, r_1, ..., r_{N-1}]`.
    pub fn two_sided(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self.0[1..].iter().rev().map(|v| v.conj()).collect();
        out.extend_from_slice(&self.0);
        out
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|v| v * alpha).collect())
    }
}

/// Squared-magnitude DFT samples `b` of an `n`-length signal.
///
/// Entries may be negative under additive noise; they are never clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub b: Vec<f64>,
    pub n: usize,
    pub sigma2: f64,
    pub real_signal: bool,
}

impl MeasurementSet {
    pub fn new(b: Vec<f64>, n: usize) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::InvalidInput("measurement set is empty".into()));
        }
        if n == 0 {
            return Err(Error::InvalidInput("signal length must be positive".into()));
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("measurement {i} is not finite")));
        }
        Ok(Self {
            b,
            n,
            sigma2: 0.0,
            real_signal: false,
        })
    }

    pub fn with_real_signal(mut self, real: bool) -> Self {
        self.real_signal = real;
        self
    }

    /// Noiseless measurements `|F_M x|^2`.
    pub fn from_signal(x: &ComplexSignal, m: usize) -> Result<Self> {
        Self::new(intensity_measure(x, m)?, x.len())
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum()
    }

    /// `10 log10(||b||^2 / (M sigma^2))`; infinite when noiseless.
    pub fn snr_db(&self) -> f64 {
        if self.sigma2 <= 0.0 {
            return f64::INFINITY;
        }
        10.0 * (self.norm_sqr() / (self.m() as f64 * self.sigma2)).log10()
    }
}

/// The diagonal weighting `I~ = diag(1, 2, ..., 2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiagonalDoubler;

impl DiagonalDoubler {
    pub fn weight(k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            2.0
        }
    }

    pub fn apply(values: &[Complex64]) -> Vec<Complex64> {
        values
            .iter()
            .enumerate()
            .map(|(k, &v)| v * Self::weight(k))
            .collect()
    }
}

/// `F_M x`: the `m`-point DFT of `x` zero padded to length `m`.
pub fn dft_partial(x: &ComplexSignal, m: usize) -> Result<Vec<Complex64>> {
    if m < x.len() {
        return Err(Error::Dimension(format!(
            "transform length {m} is shorter than signal length {}",
            x.len()
        )));
    }
    Ok(fft::partial_forward(x.values(), m))
}

/// `|F_M x|^2` element-wise.
pub fn intensity_measure(x: &ComplexSignal, m: usize) -> Result<Vec<f64>> {
    Ok(dft_partial(x, m)?.into_iter().map(|c| c.norm_sqr()).collect())
}

/// `r_k = sum_{n=k}^{N-1} x_n conj(x_{n-k})`.
pub fn autocorrelation(x: &ComplexSignal) -> AutoCorrelation {
    let v = x.values();
    let n = v.len();
    let mut r = Vec::with_capacity(n);
    if n <= 64 {
        for k in 0..n {
            r.push((k..n).map(|i| v[i] * v[i - k].conj()).sum::<Complex64>());
        }
    } else {
        // |X|^2 on a grid of at least 2N-1 points, then back to lags
        let l = fft::next_pow2_at_least(2 * n);
        let spec: Vec<Complex64> = fft::partial_forward(v, l)
            .into_iter()
            .map(|c| Complex64::new(c.norm_sqr(), 0.0))
            .collect();
        let back = fft::partial_adjoint(&spec, n);
        r.extend(back.into_iter().map(|c| c / l as f64));
    }
    r[0] = Complex64::new(x.energy(), 0.0);
    AutoCorrelation(r)
}

/// `Re{F_m I~ r}`; linear in `r`. Valid for any `m >= 1`.
pub fn correlation_to_intensity(r: &AutoCorrelation, m: usize) -> Vec<f64> {
    fft::weighted_spectrum(r.values(), m.max(1))
}

/// Minimum of the sampled spectrum `Re{F_L I~ r}` and its index.
pub fn correlation_psd_check(r: &AutoCorrelation, l: usize) -> (f64, usize) {
    let spec = correlation_to_intensity(r, l);
    spec.iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |(mv, mi), (i, &v)| if v < mv { (v, i) } else { (mv, mi) })
}

/// Default grid for [`correlation_psd_check`]: smallest power of two `>= 32N`.
pub fn default_psd_grid(n: usize) -> usize {
    fft::next_pow2_at_least(32 * n)
}

/// Acceptance threshold for a sampled spectrum minimum.
pub fn psd_tolerance(r: &AutoCorrelation) -> f64 {
    1e-9 * r.r0().max(1.0)
}

/// Whether `r` passes the sampled nonnegativity test on the default grid.
pub fn is_valid_correlation(r: &AutoCorrelation) -> bool {
    let (min, _) = correlation_psd_check(r, default_psd_grid(r.len()));
    min >= -psd_tolerance(r)
}

/// `min_{|psi|=1} ||s - psi shat||^2 = ||s||^2 + ||shat||^2 - 2 |<shat, s>|`.
pub fn global_phase_distance(s: &ComplexSignal, shat: &ComplexSignal) -> Result<f64> {
    if s.len() != shat.len() {
        return Err(Error::Dimension(format!(
            "signals have lengths {} and {}",
            s.len(),
            shat.len()
        )));
    }
    let inner: Complex64 = s
        .values()
        .iter()
        .zip(shat.values())
        .map(|(a, b)| a * b.conj())
        .sum();
    Ok((s.energy() + shat.energy() - 2.0 * inner.norm()).max(0.0))
}

/// The unit-modulus `psi` attaining [`global_phase_distance`].
pub fn align_global_phase(s: &ComplexSignal, shat: &ComplexSignal) -> ComplexSignal {
    let inner: Complex64 = s
        .values()
        .iter()
        .zip(shat.values())
        .map(|(a, b)| a * b.conj())
        .sum();
    let psi = if inner.norm() > 0.0 {
        inner / inner.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    shat.scaled(psi)
}

/// Least-squares fitting error `||b - h||^2`.
pub fn fit_error(b: &[f64], h: &[f64]) -> f64 {
    b.iter().zip(h).map(|(a, c)| (a - c) * (a - c)).sum()
}

/// `||b - |F_M x|^2||^2` for a candidate signal.
pub fn signal_fit(b: &MeasurementSet, x: &ComplexSignal) -> Result<f64> {
    Ok(fit_error(&b.b, &intensity_measure(x, b.m())?))
}
