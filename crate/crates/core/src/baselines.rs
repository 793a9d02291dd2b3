//! Classical alternating-projection baselines.
//!
//! Both work in the zero-padded length-`M` domain, projecting between the
//! magnitude set `{w : |F w| = sqrt(b)}` and the support set (first `N`
//! samples, real when the measurement is flagged real).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{is_min_phase, kolmogorov_sf, SfOptions, ROOT_SF_MAX_LEN};
use crate::fft;
use crate::signal::{autocorrelation, signal_fit, ComplexSignal, MeasurementSet};

/// Settings for the alternating-projection baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterativeOptions {
    /// GS iteration cap, or the number of Fienup iterations.
    pub max_iters: usize,
    /// GS refinement cap after the Fienup phase.
    pub refine_iters: usize,
    pub support_length: usize,
    /// Relative cost decrease over `window` iterations below which GS stops.
    pub tol: f64,
    pub window: usize,
    /// Seed of the random-phase initialization.
    pub seed: u64,
    /// Feedback constant of the Fienup update.
    pub beta: f64,
}

impl IterativeOptions {
    pub fn gs(n: usize, seed: u64) -> Self {
        Self {
            max_iters: 5000,
            refine_iters: 5000,
            support_length: n,
            tol: 1e-10,
            window: 10,
            seed,
            beta: 1.0,
        }
    }

    pub fn fienup(n: usize, seed: u64) -> Self {
        Self {
            max_iters: 1000,
            ..Self::gs(n, seed)
        }
    }

    fn validate(&self, b: &MeasurementSet) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.support_length == 0 || self.support_length > b.m() {
            return Err(Error::Config(format!(
                "support length {} must lie in 1..={}",
                self.support_length,
                b.m()
            )));
        }
        if b.m() < b.n {
            return Err(Error::Dimension(format!("M = {} below N = {}", b.m(), b.n)));
        }
        Ok(())
    }
}

/// Output of [`gs_solve`].
#[derive(Debug, Clone)]
pub struct GsOutput {
    pub x: ComplexSignal,
    /// `sum_m (sqrt(b_m) - |f_m^H x|)^2`; entry 0 is the initial point.
    pub cost_history: Vec<f64>,
    pub converged: bool,
    pub hit_cap: bool,
}

struct Projector {
    mag: Vec<f64>,
    m: usize,
    n: usize,
    real: bool,
}

impl Projector {
    fn new(b: &MeasurementSet, n: usize) -> Self {
        Self {
            mag: b.b.iter().map(|v| v.max(0.0).sqrt()).collect(),
            m: b.m(),
            n,
            real: b.real_signal,
        }
    }

    /// `P_A(w)` on a full length-`M` buffer, in place; returns the GS cost of `w`.
    fn magnitude(&self, w: &mut [Complex64]) -> f64 {
        fft::forward_in_place(w);
        let mut cost = 0.0;
        for (v, &a) in w.iter_mut().zip(&self.mag) {
            let r = v.norm();
            cost += (a - r) * (a - r);
            *v = if r > 0.0 { *v * (a / r) } else { Complex64::new(a, 0.0) };
        }
        fft::inverse_in_place(w);
        let s = 1.0 / self.m as f64;
        w.iter_mut().for_each(|v| *v *= s);
        cost
    }

    fn support(&self, w: &mut [Complex64]) {
        for (i, v) in w.iter_mut().enumerate() {
            if i >= self.n {
                *v = Complex64::new(0.0, 0.0);
            } else if self.real {
                v.im = 0.0;
            }
        }
    }

    fn padded(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); self.m];
        w[..x.len()].copy_from_slice(x);
        w
    }

    fn cost(&self, x: &[Complex64]) -> f64 {
        let mut w = self.padded(x);
        self.magnitude(&mut w)
    }

    /// Random phases on the measured magnitudes, mapped back and restricted to the support.
    fn random_start(&self, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w: Vec<Complex64> = self
            .mag
            .iter()
            .map(|&a| Complex64::from_polar(a, 2.0 * std::f64::consts::PI * rng.random::<f64>()))
            .collect();
        fft::inverse_in_place(&mut w);
        let s = 1.0 / self.m as f64;
        w.iter_mut().for_each(|v| *v *= s);
        self.support(&mut w);
        w.truncate(self.n);
        w
    }
}

fn gs_loop(p: &Projector, x0: Vec<Complex64>, cap: usize, tol: f64, window: usize) -> GsOutput {
    let mut x = x0;
    let mut history = vec![p.cost(&x)];
    let mut converged = false;
    let mut w = p.padded(&x);
    for _ in 0..cap {
        w[..x.len()].copy_from_slice(&x);
        w[x.len()..].iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        p.magnitude(&mut w);
        p.support(&mut w);
        let cand = w[..p.n].to_vec();
        let c = p.cost(&cand);
        let last = *history.last().expect("non-empty");
        if !(c < last) {
            converged = true;
            break;
        }
        x = cand;
        history.push(c);
        let k = history.len();
        if k > window {
            let old = history[k - 1 - window];
            if old - c <= tol * old {
                converged = true;
                break;
            }
        }
    }
    let hit_cap = !converged;
    GsOutput {
        x: ComplexSignal::new(x).expect("finite iterate"),
        cost_history: history,
        converged,
        hit_cap,
    }
}

/// Gerchberg-Saxton from a seeded random-phase start.
///
/// An update that fails to lower the cost ends the run and is discarded, so
/// the reported history is non-increasing.
pub fn gs_solve(b: &MeasurementSet, opts: &IterativeOptions) -> Result<GsOutput> {
    opts.validate(b)?;
    let p = Projector::new(b, opts.support_length);
    let x0 = p.random_start(opts.seed);
    Ok(gs_loop(&p, x0, opts.max_iters, opts.tol, opts.window))
}

/// Gerchberg-Saxton from a given start.
pub fn gs_solve_from(b: &MeasurementSet, opts: &IterativeOptions, x0: &ComplexSignal) -> Result<GsOutput> {
    opts.validate(b)?;
    if x0.len() != opts.support_length {
        return Err(Error::Dimension(format!(
            "start has length {}, support is {}",
            x0.len(),
            opts.support_length
        )));
    }
    let p = Projector::new(b, opts.support_length);
    let mut x = x0.values().to_vec();
    if p.real {
        x.iter_mut().for_each(|v| v.im = 0.0);
    }
    Ok(gs_loop(&p, x, opts.max_iters, opts.tol, opts.window))
}

/// Output of [`fienup_solve`].
#[derive(Debug, Clone)]
pub struct FienupOutput {
    pub x: ComplexSignal,
    pub refine: GsOutput,
}

/// Fienup input-output iterations followed by GS refinement.
///
/// On the support the iterate is replaced by its magnitude projection; off the
/// support it moves by `-beta` times that projection.
pub fn fienup_solve(b: &MeasurementSet, opts: &IterativeOptions) -> Result<FienupOutput> {
    opts.validate(b)?;
    let p = Projector::new(b, opts.support_length);
    let start = p.random_start(opts.seed);
    let mut w = p.padded(&start);
    let mut pa = w.clone();
    for _ in 0..opts.max_iters {
        pa.copy_from_slice(&w);
        p.magnitude(&mut pa);
        for i in 0..p.m {
            if i < p.n {
                w[i] = if p.real { Complex64::new(pa[i].re, 0.0) } else { pa[i] };
                if p.real {
                    w[i] -= Complex64::new(0.0, opts.beta * pa[i].im);
                }
            } else {
                w[i] -= pa[i] * opts.beta;
            }
        }
    }
    pa.copy_from_slice(&w);
    p.magnitude(&mut pa);
    p.support(&mut pa);
    pa.truncate(p.n);
    let refine = gs_loop(&p, pa, opts.refine_iters, opts.tol, opts.window);
    Ok(FienupOutput {
        x: refine.x.clone(),
        refine,
    })
}

/// Relative tolerance at which [`fienup_sf`] accepts a factorization grid.
pub const FIENUP_SF_FIT_RTOL: f64 = 1e-10;

/// Fienup output pushed through its auto-correlation and Kolmogorov's
/// factorization.
///
/// The transform length starts at the default `32N` grid and is doubled
/// (up to `2^22`) until the factor's fit agrees with the Fienup fit to
/// [`FIENUP_SF_FIT_RTOL`], which guards against zeros close to the unit circle.
pub fn fienup_sf(b: &MeasurementSet, opts: &IterativeOptions) -> Result<ComplexSignal> {
    let f = fienup_solve(b, opts)?;
    factor_output(b, &f.x)
}

pub(crate) fn factor_output(b: &MeasurementSet, x: &ComplexSignal) -> Result<ComplexSignal> {
    let n = x.len();
    let r = autocorrelation(x);
    let target = signal_fit(b, x)?;
    let scale = target.max(FIENUP_SF_FIT_RTOL * b.norm_sqr());
    let mut opts = SfOptions::for_len(n);
    let mut best: Option<(bool, f64, ComplexSignal)> = None;
    loop {
        let y = kolmogorov_sf(&r, opts)?;
        let y = if b.real_signal {
            ComplexSignal::new(y.values().iter().map(|v| Complex64::new(v.re, 0.0)).collect())?
        } else {
            y
        };
        let dev = (signal_fit(b, &y)? - target).abs();
        let minp = n > ROOT_SF_MAX_LEN || is_min_phase(&y, 1e-6)?.0;
        if best.as_ref().is_none_or(|(bm, d, _)| (minp, -dev) > (*bm, -*d)) {
            best = Some((minp, dev, y));
        }
        if (minp && dev <= FIENUP_SF_FIT_RTOL * scale) || opts.l >= 1 << 22 {
            break;
        }
        opts.l *= 2;
    }
    Ok(best.expect("at least one grid").2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{augment_min_phase, AugmentationSpec, ImpulsePolicy, Side};
    use crate::sampling::random_signal;
    use crate::signal::global_phase_distance;

    fn uniform_b(seed: u64, n: usize, m: usize) -> MeasurementSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MeasurementSet::new((0..m).map(|_| rng.random::<f64>()).collect(), n).unwrap()
    }

    #[test]
    fn gs_history_is_non_increasing() {
        for seed in 0..20 {
            let n = 4 + (seed as usize * 7) % 60;
            let b = uniform_b(seed, n, 4 * n);
            let out = gs_solve(&b, &IterativeOptions::gs(n, seed)).unwrap();
            assert!(out.cost_history.windows(2).all(|w| w[1] <= w[0]));
            assert!(out.cost_history.len() >= 2);
        }
    }

    #[test]
    fn gs_fixed_point_stays() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_signal(&mut rng, 8);
        let b = MeasurementSet::from_signal(&x, 32).unwrap();
        let out = gs_solve_from(&b, &IterativeOptions::gs(8, 0), &x).unwrap();
        assert!(out.cost_history[0] <= 1e-24);
        assert!(out.cost_history.iter().all(|&c| (c - out.cost_history[0]).abs() <= 1e-12));
        assert!(global_phase_distance(&x, &out.x).unwrap() <= 1e-20);
    }

    #[test]
    fn deterministic_given_seed() {
        let b = uniform_b(5, 10, 40);
        let a = gs_solve(&b, &IterativeOptions::gs(10, 9)).unwrap();
        let c = gs_solve(&b, &IterativeOptions::gs(10, 9)).unwrap();
        assert_eq!(a.x, c.x);
        assert_eq!(a.cost_history, c.cost_history);
        let f1 = fienup_solve(&b, &IterativeOptions::fienup(10, 2)).unwrap();
        let f2 = fienup_solve(&b, &IterativeOptions::fienup(10, 2)).unwrap();
        assert_eq!(f1.x, f2.x);
    }

    #[test]
    fn impulse_measurement() {
        let b = MeasurementSet::new(vec![1.0; 16], 4).unwrap();
        let out = fienup_solve(&b, &IterativeOptions::fienup(4, 1)).unwrap();
        // the impulse may land anywhere in the support; convergence near it is sublinear
        let mags: Vec<f64> = out.x.values().iter().map(|v| v.norm()).collect();
        let peak = mags.iter().cloned().fold(0.0, f64::max);
        let rest: f64 = mags.iter().map(|m| m * m).sum::<f64>() - peak * peak;
        assert!(peak > 0.95 && rest < 0.05, "{mags:?}");
        assert!(*out.refine.cost_history.last().unwrap() <= 1e-6 * b.m() as f64);
        assert!((out.x.energy() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn noiseless_fienup_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_signal(&mut rng, 12);
        let x = augment_min_phase(&s, AugmentationSpec::for_signal(&s, ImpulsePolicy::L1Margin, Side::Prefix))
            .unwrap()
            .signal;
        let b = MeasurementSet::from_signal(&x, 4 * x.len()).unwrap();
        let out = fienup_solve(&b, &IterativeOptions::fienup(x.len(), 7)).unwrap();
        assert!(out.refine.cost_history.last().unwrap() <= &(1e-3 * b.norm_sqr()));
    }

    #[test]
    fn fienup_fixed_point_matches_gs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_signal(&mut rng, 6);
        let b = MeasurementSet::from_signal(&x, 24).unwrap();
        let p = Projector::new(&b, 6);
        let mut w = p.padded(x.values());
        p.magnitude(&mut w);
        let on: f64 = w[..6].iter().zip(x.values()).map(|(a, b)| (a - b).norm()).sum();
        let off: f64 = w[6..].iter().map(|v| v.norm()).sum();
        assert!(on < 1e-12 && off < 1e-12);
    }

    #[test]
    fn fienup_sf_keeps_fit_and_is_min_phase() {
        for seed in 0..5 {
            let n = 6 + seed as usize * 5;
            let b = uniform_b(100 + seed, n, 3 * n);
            let o = IterativeOptions::fienup(n, seed);
            let f = fienup_solve(&b, &o).unwrap();
            let sf = fienup_sf(&b, &o).unwrap();
            let a = signal_fit(&b, &f.x).unwrap();
            let c = signal_fit(&b, &sf).unwrap();
            assert!((a - c).abs() <= 1e-8 * a, "{a} {c}");
            assert!(is_min_phase(&sf, 1e-6).unwrap().0);
        }
    }

    #[test]
    fn real_measurements_give_real_output() {
        let b = uniform_b(8, 6, 24).with_real_signal(true);
        let out = fienup_solve(&b, &IterativeOptions::fienup(6, 1)).unwrap();
        assert_eq!(out.x.max_abs_imag(), 0.0);
        assert!(out.refine.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_bad_options() {
        let b = uniform_b(1, 4, 16);
        let mut o = IterativeOptions::gs(4, 0);
        o.max_iters = 0;
        assert!(gs_solve(&b, &o).is_err());
        o = IterativeOptions::gs(20, 0);
        assert!(gs_solve(&b, &o).is_err());
    }
}
