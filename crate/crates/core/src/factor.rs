//! Spectral factorization: recover the minimum-phase signal that generates a
//! given auto-correlation.
//!
//! [`kolmogorov_sf`] is the workhorse (four length-`L` FFTs). [`root_sf`]
//! factors the correlation polynomial directly and serves as a small-`N`
//! cross-check; [`polynomial_roots`] is the Aberth-Ehrlich root finder both it
//! and [`is_min_phase`] rely on.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::{AutoCorrelation, ComplexSignal};

/// Options for [`kolmogorov_sf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfOptions {
    /// Transform length, a power of two `>= 2N`.
    pub l: usize,
    /// Spectrum entries below `floor_eps * max` are raised to that floor before the logarithm.
    pub floor_eps: f64,
}

impl SfOptions {
    /// `L` = smallest power of two greater than `32N`.
    pub fn for_len(n: usize) -> Self {
        Self {
            l: fft::next_pow2_above(32 * n),
            floor_eps: 1e-12,
        }
    }

    pub fn with_l(mut self, l: usize) -> Self {
        self.l = l;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !self.l.is_power_of_two() || self.l < 2 * n {
            return Err(Error::Config(format!(
                "transform length {} must be a power of two >= 2N = {}",
                self.l,
                2 * n
            )));
        }
        if !(self.floor_eps > 0.0) {
            return Err(Error::Config("spectral floor must be positive".into()));
        }
        Ok(())
    }
}

/// Largest correlation length accepted by [`root_sf`].
pub const ROOT_SF_MAX_LEN: usize = 48;

/// Kolmogorov's log-spectrum / Hilbert-transform factorization.
///
/// Steps: `gamma = 1/2 log Re{F_L I~ r}`; the phase `eta` is the discrete
/// Hilbert transform of `gamma` (DFT, multiply by `-j` on positive and `+j` on
/// negative bins, inverse DFT); the output is the first `N` samples of
/// `(1/L) F_L^H exp(gamma - j eta)`, rescaled so that `||x||^2 = r_0`.
pub fn kolmogorov_sf(r: &AutoCorrelation, opts: SfOptions) -> Result<ComplexSignal> {
    let n = r.len();
    opts.validate(n)?;
    let l = opts.l;
    let mut spectrum = fft::weighted_spectrum(r.values(), l);
    let max = spectrum.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::InvalidCorrelation(
            "spectrum is nonpositive everywhere".into(),
        ));
    }
    let floor = opts.floor_eps * max;
    for v in spectrum.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }

    let gamma: Vec<f64> = spectrum.iter().map(|v| 0.5 * v.ln()).collect();

    let mut buf: Vec<Complex64> = gamma.iter().map(|&g| Complex64::new(g, 0.0)).collect();
    fft::forward_in_place(&mut buf);
    let half = l / 2;
    let minus_j = Complex64::new(0.0, -1.0);
    for (k, v) in buf.iter_mut().enumerate() {
        *v = if k == 0 || k == half {
            Complex64::new(0.0, 0.0)
        } else if k < half {
            *v * minus_j
        } else {
            -*v * minus_j
        };
    }
    fft::inverse_in_place(&mut buf);
    let inv_l = 1.0 / l as f64;

    let mut spec: Vec<Complex64> = gamma
        .iter()
        .zip(&buf)
        .map(|(&g, eta)| Complex64::from_polar(g.exp(), -eta.re * inv_l))
        .collect();
    fft::inverse_in_place(&mut spec);
    let mut x: Vec<Complex64> = spec[..n].iter().map(|v| v * inv_l).collect();

    let energy: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    if energy > 0.0 && r.r0() > 0.0 {
        let s = (r.r0() / energy).sqrt();
        x.iter_mut().for_each(|v| *v *= s);
    }
    ComplexSignal::new(x)
}

/// Factorization by rooting `z^{N-1} R(z)` and keeping the root of every
/// conjugate-reciprocal pair that lies inside the unit circle.
///
/// The output is scaled to `||x|| = sqrt(r_0)` with `x_0` real positive.
pub fn root_sf(r: &AutoCorrelation) -> Result<ComplexSignal> {
    let n_full = r.len();
    if n_full > ROOT_SF_MAX_LEN {
        return Err(Error::Size(format!(
            "root factorization is limited to N <= {ROOT_SF_MAX_LEN} (got {n_full}); use kolmogorov_sf"
        )));
    }
    let r0 = r.r0();
    if r0 <= 0.0 {
        return Err(Error::InvalidCorrelation("zero-lag value must be positive".into()));
    }
    // vanishing trailing lags shorten the factor; pad the result with zeros
    let mut n = n_full;
    while n > 1 && r.values()[n - 1].norm() <= 1e-14 * r0 {
        n -= 1;
    }
    let lags = &r.values()[..n];
    let mut x = vec![Complex64::new(0.0, 0.0); n_full];
    if n == 1 {
        x[0] = Complex64::new(r0.sqrt(), 0.0);
        return ComplexSignal::new(x);
    }

    // descending coefficients of z^{N-1} R(z), degree 2(N-1)
    let deg = 2 * (n - 1);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); deg + 1];
    for p in 0..=deg {
        let k = p as isize - (n as isize - 1);
        coeffs[deg - p] = if k >= 0 {
            lags[k as usize].conj()
        } else {
            lags[(-k) as usize]
        };
    }
    let mut roots = polynomial_roots(&coeffs)?;
    roots.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let (inside, outside) = roots.split_at(n - 1);

    let mut used = vec![false; outside.len()];
    for z in inside {
        let tol = 1e-6 * (1.0 + z.norm_sqr());
        let partner = outside
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, w)| (j, (z * w.conj() - 1.0).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match partner {
            Some((j, d)) if d <= tol => used[j] = true,
            _ => {
                return Err(Error::InvalidCorrelation(format!(
                    "root {z} has no conjugate-reciprocal partner"
                )))
            }
        }
    }

    let poly = expand_monic(inside);
    let energy: f64 = poly.iter().map(|v| v.norm_sqr()).sum();
    let scale = (r0 / energy).sqrt();
    for (dst, c) in x.iter_mut().zip(&poly) {
        *dst = c * scale;
    }
    ComplexSignal::new(x)
}

/// Descending coefficients of `prod_i (z - roots_i)`.
pub fn expand_monic(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &z in roots {
        c.push(Complex64::new(0.0, 0.0));
        for i in (1..c.len()).rev() {
            let prev = c[i - 1];
            c[i] -= z * prev;
        }
    }
    c
}

/// All roots of the polynomial with descending coefficients `coeffs`.
///
/// Aberth-Ehrlich simultaneous iteration started from a Newton-polygon
/// estimate of the root moduli, followed by Newton polishing. Exact zero
/// roots (trailing zero coefficients) are returned as exact zeros.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    if coeffs.is_empty() || coeffs.len() == 1 {
        return Ok(Vec::new());
    }
    if coeffs[0].norm() == 0.0 {
        return Err(Error::LeadingZero);
    }
    let mut trailing = 0;
    while trailing < coeffs.len() - 1 && coeffs[coeffs.len() - 1 - trailing].norm() == 0.0 {
        trailing += 1;
    }
    let core: Vec<Complex64> = {
        let lead = coeffs[0];
        coeffs[..coeffs.len() - trailing].iter().map(|c| c / lead).collect()
    };
    let deg = core.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); trailing];
    match deg {
        0 => return Ok(roots),
        1 => {
            roots.push(-core[1]);
            return Ok(roots);
        }
        _ => {}
    }

    let mut z = initial_guesses(&core);
    let reversed: Vec<Complex64> = core.iter().rev().cloned().collect();
    let mut done = vec![false; deg];
    for _ in 0..1000 {
        let mut all_done = true;
        for i in 0..deg {
            if done[i] {
                continue;
            }
            let ratio = newton_ratio(&core, &reversed, z[i]);
            let mut repulsion = Complex64::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 0.0 {
                        repulsion += d.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() > 0.0 { ratio / denom } else { ratio };
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
            }
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(f64::MIN_POSITIVE) {
                done[i] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let step = newton_ratio(&core, &reversed, *zi);
            if !(step.re.is_finite() && step.im.is_finite()) {
                break;
            }
            let cand = *zi - step;
            if horner(&core, cand).0.norm() <= horner(&core, *zi).0.norm() {
                *zi = cand;
            } else {
                break;
            }
        }
    }
    roots.extend(z);
    Ok(roots)
}

/// `(p(z), p'(z))` by Horner's rule on descending coefficients.
fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = c[0];
    let mut dp = Complex64::new(0.0, 0.0);
    for &ci in &c[1..] {
        dp = dp * z + p;
        p = p * z + ci;
    }
    (p, dp)
}

/// `p(z) / p'(z)`, evaluated on the reversed polynomial outside the unit disk.
fn newton_ratio(c: &[Complex64], reversed: &[Complex64], z: Complex64) -> Complex64 {
    let deg = (c.len() - 1) as f64;
    if z.norm() <= 1.0 {
        let (p, dp) = horner(c, z);
        p / dp
    } else {
        let w = z.inv();
        let (q, dq) = horner(reversed, w);
        z * q / (deg * q - w * dq)
    }
}

/// Starting points on circles whose radii come from the upper convex hull of
/// `(k, log|c_k|)` (ascending powers).
fn initial_guesses(core: &[Complex64]) -> Vec<Complex64> {
    let deg = core.len() - 1;
    // ascending powers: a_k = core[deg - k]
    let logs: Vec<f64> = (0..=deg)
        .map(|k| {
            let a = core[deg - k].norm();
            if a > 0.0 {
                a.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut hull: Vec<usize> = Vec::new();
    for k in 0..=deg {
        if logs[k] == f64::NEG_INFINITY {
            continue;
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b as f64 - a as f64) * (logs[k] - logs[a])
                - (k as f64 - a as f64) * (logs[b] - logs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let mut out = Vec::with_capacity(deg);
    let offset = 0.7;
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let count = b - a;
        let radius = ((logs[a] - logs[b]) / count as f64).exp();
        for i in 0..count {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / count as f64
                + offset
                + 1.3 * out.len() as f64 / deg as f64;
            out.push(Complex64::from_polar(radius, angle));
        }
    }
    out
}

/// Whether every zero of `X(z) = sum_n x_n z^{-n}` has modulus `<= 1 + tol`.
/// Returns the verdict together with the largest zero modulus.
pub fn is_min_phase(x: &ComplexSignal, tol: f64) -> Result<(bool, f64)> {
    let v = x.values();
    if v[0].norm() == 0.0 {
        return Err(Error::LeadingZero);
    }
    if v.len() == 1 {
        return Ok((true, 0.0));
    }
    let roots = polynomial_roots(v)?;
    let max = roots.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    Ok((max <= 1.0 + tol, max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{augment_min_phase, AugmentationSpec, ImpulsePolicy, Side};
    use crate::sampling::{random_signal, rel_l2};
    use crate::signal::{autocorrelation, global_phase_distance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn min_phase_signal(rng: &mut ChaCha8Rng, n: usize) -> ComplexSignal {
        let s = random_signal(rng, n);
        let spec = AugmentationSpec::for_signal(&s, ImpulsePolicy::L1Margin, Side::Prefix);
        augment_min_phase(&s, spec).unwrap().signal
    }

    #[test]
    fn roots_of_simple_polynomials() {
        let mut r = polynomial_roots(&[c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]).unwrap();
        r.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((r[1] - c(1.0, 0.0)).norm() < 1e-14);

        let mut r = polynomial_roots(&[c(2.0, 0.0), c(1.0, 0.0), c(-0.5, 0.0)]).unwrap();
        r.sort_by(|a, b| a.re.total_cmp(&b.re));
        let sq5 = 5f64.sqrt();
        assert!((r[0] - c((-1.0 - sq5) / 4.0, 0.0)).norm() < 1e-14);
        assert!((r[1] - c((-1.0 + sq5) / 4.0, 0.0)).norm() < 1e-14);

        assert!(polynomial_roots(&[c(3.0, 0.0)]).unwrap().is_empty());
        assert!(matches!(polynomial_roots(&[c(0.0, 0.0), c(1.0, 0.0)]), Err(Error::LeadingZero)));
    }

    #[test]
    fn roots_handle_zero_roots() {
        // z^3 - z^2 = z^2 (z - 1)
        let r = polynomial_roots(&[c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
        assert!(r.iter().any(|z| (z - c(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn random_degree_twenty_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let coeffs = random_signal(&mut rng, 21).into_vec();
            let roots = polynomial_roots(&coeffs).unwrap();
            assert_eq!(roots.len(), 20);
            let rebuilt: Vec<Complex64> = expand_monic(&roots).iter().map(|v| v * coeffs[0]).collect();
            assert!(rel_l2(&rebuilt, &coeffs) <= 1e-6);
            let scale: f64 = coeffs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for z in &roots {
                if z.norm() <= 1.0 {
                    assert!(horner(&coeffs, *z).0.norm() <= 1e-8 * scale);
                }
            }
        }
    }

    #[test]
    fn min_phase_examples() {
        let (ok, m) = is_min_phase(&ComplexSignal::from_real(&[1.0, 0.5]).unwrap(), 1e-9).unwrap();
        assert!(ok);
        assert!((m - 0.5).abs() < 1e-14);
        let (ok, m) = is_min_phase(&ComplexSignal::from_real(&[0.5, 1.0]).unwrap(), 1e-9).unwrap();
        assert!(!ok);
        assert!((m - 2.0).abs() < 1e-14);
        assert!(matches!(
            is_min_phase(&ComplexSignal::from_real(&[0.0, 1.0]).unwrap(), 1e-9),
            Err(Error::LeadingZero)
        ));
        assert!(is_min_phase(&ComplexSignal::from_real(&[3.0]).unwrap(), 0.0).unwrap().0);
    }

    #[test]
    fn kolmogorov_impulse() {
        let r = AutoCorrelation::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let x = kolmogorov_sf(&r, SfOptions::for_len(3)).unwrap();
        assert!((x.values()[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(x.values()[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn kolmogorov_two_tap() {
        let r = AutoCorrelation::new(vec![c(5.0, 0.0), c(2.0, 0.0)]).unwrap();
        let x = kolmogorov_sf(&r, SfOptions::for_len(2).with_l(4096)).unwrap();
        let want = [c(2.0, 0.0), c(1.0, 0.0)];
        assert!(rel_l2(x.values(), &want) <= 1e-6);
    }

    #[test]
    fn kolmogorov_round_trip_min_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = min_phase_signal(&mut rng, 63);
        let r = autocorrelation(&x);
        let y = kolmogorov_sf(&r, SfOptions::for_len(64)).unwrap();
        let ry = autocorrelation(&y);
        assert!(rel_l2(ry.values(), r.values()) <= 1e-8);
        assert!(global_phase_distance(&x, &y).unwrap() <= 1e-12 * x.energy());
        assert!((y.energy() - r.r0()).abs() <= 1e-10 * r.r0());
    }

    #[test]
    fn kolmogorov_real_input_gives_real_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = ComplexSignal::from_real(&v).unwrap();
        let y = kolmogorov_sf(&autocorrelation(&x), SfOptions::for_len(20)).unwrap();
        assert!(y.max_abs_imag() <= 1e-10 * y.energy().sqrt());
    }

    #[test]
    fn kolmogorov_output_is_min_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in [2usize, 8, 24, 40] {
            // direct (non min-phase) signals: factor must flip the outside zeros
            let x = random_signal(&mut rng, n);
            let y = kolmogorov_sf(&autocorrelation(&x), SfOptions::for_len(n)).unwrap();
            let (ok, m) = is_min_phase(&y, 1e-6).unwrap();
            assert!(ok, "n = {n}, max modulus {m}");
        }
    }

    #[test]
    fn kolmogorov_rejects_bad_config_and_dead_spectrum() {
        let r = AutoCorrelation::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(kolmogorov_sf(&r, SfOptions::for_len(2).with_l(100)), Err(Error::Config(_))));
        assert!(matches!(kolmogorov_sf(&r, SfOptions::for_len(2).with_l(2)), Err(Error::Config(_))));
        let zero = AutoCorrelation::new(vec![c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(kolmogorov_sf(&zero, SfOptions::for_len(2)), Err(Error::InvalidCorrelation(_))));
    }

    #[test]
    fn root_sf_examples() {
        let x = root_sf(&AutoCorrelation::new(vec![c(1.0, 0.0)]).unwrap()).unwrap();
        assert_eq!(x.values(), &[c(1.0, 0.0)]);
        let x = root_sf(&AutoCorrelation::new(vec![c(5.0, 0.0), c(2.0, 0.0)]).unwrap()).unwrap();
        assert!(rel_l2(x.values(), &[c(2.0, 0.0), c(1.0, 0.0)]) < 1e-12);
    }

    #[test]
    fn root_sf_size_guard_and_invalid_input() {
        let r = AutoCorrelation::new(vec![c(1.0, 0.0); 49]).unwrap();
        assert!(matches!(root_sf(&r), Err(Error::Size(_))));
        // 1 + 1.8 cos w has simple zeros on the circle with no partners
        let r = AutoCorrelation::new(vec![c(1.0, 0.0), c(0.9, 0.0), c(0.0, 0.0), c(0.4, 0.3)]).unwrap();
        assert!(matches!(root_sf(&r), Err(Error::InvalidCorrelation(_))));
    }

    #[test]
    fn root_sf_agrees_with_kolmogorov() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [2usize, 5, 12, 24, 32] {
            let x = min_phase_signal(&mut rng, n);
            let r = autocorrelation(&x);
            let a = root_sf(&r).unwrap();
            let b = kolmogorov_sf(&r, SfOptions::for_len(n)).unwrap();
            let d = global_phase_distance(&a, &b).unwrap();
            assert!(d.sqrt() <= 1e-6 * a.energy().sqrt(), "n = {n}, d = {d}");
            assert!(a.values()[0].im == 0.0 && a.values()[0].re > 0.0);
        }
    }

    #[test]
    fn root_sf_trailing_zero_lags() {
        let x = ComplexSignal::from_real(&[2.0, 1.0, 0.0]).unwrap();
        let y = root_sf(&autocorrelation(&x)).unwrap();
        assert!(rel_l2(y.values(), x.values()) < 1e-12);
    }
}
