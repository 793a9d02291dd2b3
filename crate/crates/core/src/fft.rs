//! Thin wrappers over `rustfft` for the partial DFT operators used everywhere.
//!
//! `F_M` denotes the first `N` columns of the `M`-point DFT matrix with kernel
//! `exp(-j 2 pi n m / M)`. Its adjoint `F_M^H` maps `M` samples back to `N`
//! coefficients and is the unnormalized inverse transform truncated to `N`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward transform (kernel `exp(-j...)`), unnormalized.
pub fn forward_in_place(buf: &mut [Complex64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse transform (kernel `exp(+j...)`), unnormalized.
pub fn inverse_in_place(buf: &mut [Complex64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// `F_M x` for `m >= x.len()`, by zero padding.
pub fn partial_forward(x: &[Complex64], m: usize) -> Vec<Complex64> {
    debug_assert!(m >= x.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..x.len()].copy_from_slice(x);
    forward_in_place(&mut buf);
    buf
}

/// `F_M^H y`, keeping the first `n` coefficients. `n` may exceed `y.len()`,
/// in which case the periodic extension is used.
pub fn partial_adjoint(y: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut buf = y.to_vec();
    inverse_in_place(&mut buf);
    let m = buf.len();
    (0..n).map(|k| buf[k % m]).collect()
}

/// `F_M^H y` for a real vector `y`.
pub fn partial_adjoint_real(y: &[f64], n: usize) -> Vec<Complex64> {
    let buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    partial_adjoint(&buf, n)
}

/// `Re{F_L I~ r}` where `I~ = diag(1, 2, ..., 2)`. Lags beyond `l` are folded
/// modulo `l`, which is exactly the `l`-point DFT of the `N` weighted lags.
pub fn weighted_spectrum(r: &[Complex64], l: usize) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for (k, &v) in r.iter().enumerate() {
        let w = if k == 0 { 1.0 } else { 2.0 };
        buf[k % l] += v * w;
    }
    forward_in_place(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Naive `O(MN)` evaluation of `F_M x`; test oracle and reference only.
pub fn naive_partial_forward(x: &[Complex64], m: usize) -> Vec<Complex64> {
    let step = -2.0 * std::f64::consts::PI / m as f64;
    (0..m)
        .map(|row| {
            x.iter()
                .enumerate()
                .map(|(n, &xn)| {
                    // reduce the phase index modulo m to keep the angle small
                    let idx = ((n as u128 * row as u128) % m as u128) as f64;
                    xn * Complex64::from_polar(1.0, step * idx)
                })
                .sum()
        })
        .collect()
}

/// Smallest power of two strictly greater than `x`.
pub fn next_pow2_above(x: usize) -> usize {
    let mut p = 1usize;
    while p <= x {
        p <<= 1;
    }
    p
}

/// Smallest power of two greater than or equal to `x`.
pub fn next_pow2_at_least(x: usize) -> usize {
    x.max(1).next_power_of_two()
}
