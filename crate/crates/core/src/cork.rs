//! FFT-structured ADMM for the sampled-nonnegativity correlation fit
//!
//! ```text
//! minimize_r  || b - Re{F_M I~ r} ||^2   subject to  Re{F_L I~ r} >= 0
//! ```
//!
//! split as `Re{F_L I~ r} = z`, `z >= 0`. Because `F_M^H F_M = M I` and
//! `F_M^H conj(F_M) = M E_00` whenever `M >= 2N - 1`, the `r`-subproblem has
//! the closed form `r = (F_M^H b + rho F_L^H (z - u)) / (M + rho L)`, so every
//! iteration is two length-`L` FFTs plus element-wise work.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{kolmogorov_sf, SfOptions};
use crate::fft;
use crate::signal::{fit_error, signal_fit, AutoCorrelation, ComplexSignal, MeasurementSet};

/// Deviation between signal and correlation fit, relative to `||b||^2`, at
/// which [`cork_recover`] stops refining the factorization grid.
pub const SF_FIT_RTOL: f64 = 1e-12;
const SF_MAX_L: usize = 1 << 20;

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    /// Number of frequency samples of the nonnegativity constraint (power of two, `>= 2N`).
    pub l: usize,
    /// Penalty constant.
    pub rho: f64,
    pub max_iters: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Restrict `r` (and hence the signal) to be real.
    pub real_signal: bool,
}

impl AdmmOptions {
    /// Defaults for an `n`-lag correlation from `m` samples: `L` is the
    /// smallest power of two above `32n` and `rho = M / L`.
    pub fn for_problem(n: usize, m: usize) -> Self {
        let l = fft::next_pow2_above(32 * n);
        Self {
            l,
            rho: m as f64 / l as f64,
            max_iters: 10_000,
            tol_abs: 1e-10,
            tol_rel: 1e-8,
            real_signal: false,
        }
    }

    pub fn for_measurements(b: &MeasurementSet) -> Self {
        let mut o = Self::for_problem(b.n, b.m());
        o.real_signal = b.real_signal;
        o
    }

    /// Sets `L` to the smallest power of two above `factor * n` and resets `rho = M / L`.
    pub fn with_l_factor(mut self, n: usize, m: usize, factor: usize) -> Self {
        self.l = fft::next_pow2_above(factor * n);
        self.rho = m as f64 / self.l as f64;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !self.l.is_power_of_two() {
            return Err(Error::Config(format!("L = {} is not a power of two", self.l)));
        }
        if self.l < 2 * n {
            return Err(Error::Config(format!("L = {} is below 2N = {}", self.l, 2 * n)));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::Config(format!("rho = {} must be positive", self.rho)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Fixed data of one problem instance.
#[derive(Debug, Clone)]
pub struct AdmmProblem {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub rho: f64,
    pub real_signal: bool,
    b: Vec<f64>,
    /// `F_M^H b`, first `n` coefficients.
    fhb: Vec<Complex64>,
    /// `M >= 2N - 1`: the scalar-divisor `r`-update is exact.
    closed_form: bool,
}

impl AdmmProblem {
    pub fn new(b: &MeasurementSet, opts: &AdmmOptions) -> Result<Self> {
        let n = b.n;
        opts.validate(n)?;
        let m = b.m();
        Ok(Self {
            n,
            m,
            l: opts.l,
            rho: opts.rho,
            real_signal: opts.real_signal,
            b: b.b.clone(),
            fhb: fft::partial_adjoint_real(&b.b, n),
            closed_form: m + 1 >= 2 * n,
        })
    }

    /// `Re{F_L I~ r}`.
    pub fn constraint_map(&self, r: &[Complex64]) -> Vec<f64> {
        fft::weighted_spectrum(r, self.l)
    }

    /// `||b - Re{F_M I~ r}||^2`.
    pub fn fit(&self, r: &[Complex64]) -> f64 {
        fit_error(&self.b, &fft::weighted_spectrum(r, self.m))
    }

    /// `(I~ F_L^H y)` projected onto the variable space.
    fn constraint_adjoint(&self, y: &[f64]) -> Vec<Complex64> {
        let mut g = fft::partial_adjoint_real(y, self.n);
        for (k, v) in g.iter_mut().enumerate() {
            if k > 0 {
                *v *= 2.0;
            }
        }
        self.project(&mut g);
        g
    }

    fn project(&self, r: &mut [Complex64]) {
        if self.real_signal {
            r.iter_mut().for_each(|v| v.im = 0.0);
        } else {
            r[0].im = 0.0;
        }
    }

    /// `r`-update: exact minimizer of `||b - A_M r||^2 + rho ||A_L r - v||^2`.
    fn solve_r(&self, v: &[f64]) -> Vec<Complex64> {
        let fhv = fft::partial_adjoint_real(v, self.n);
        let denom = self.m as f64 + self.rho * self.l as f64;
        let mut r: Vec<Complex64> = self
            .fhb
            .iter()
            .zip(&fhv)
            .map(|(a, c)| (a + c * self.rho) / denom)
            .collect();
        self.project(&mut r);
        if self.closed_form {
            return r;
        }
        self.solve_r_cg(v, r)
    }

    /// Conjugate gradients on the normal equations for `M < 2N - 1`.
    fn solve_r_cg(&self, v: &[f64], x0: Vec<Complex64>) -> Vec<Complex64> {
        let weight = |r: &mut Vec<Complex64>| {
            for (k, c) in r.iter_mut().enumerate() {
                if k > 0 {
                    *c *= 2.0;
                }
            }
        };
        let apply = |r: &[Complex64]| -> Vec<Complex64> {
            let am = fft::weighted_spectrum(r, self.m);
            let mut g = fft::partial_adjoint_real(&am, self.n);
            weight(&mut g);
            for (k, gk) in g.iter_mut().enumerate() {
                *gk += r[k] * (self.rho * self.l as f64 * if k == 0 { 1.0 } else { 2.0 });
            }
            self.project(&mut g);
            g
        };
        let dot = |a: &[Complex64], b: &[Complex64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
        };
        let mut rhs = fft::partial_adjoint_real(&self.b, self.n);
        let fv = fft::partial_adjoint_real(v, self.n);
        for (a, c) in rhs.iter_mut().zip(&fv) {
            *a += c * self.rho;
        }
        weight(&mut rhs);
        self.project(&mut rhs);

        let mut x = x0;
        let ax = apply(&x);
        let mut res: Vec<Complex64> = rhs.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let mut p = res.clone();
        let mut rr = dot(&res, &res);
        let stop = 1e-28 * dot(&rhs, &rhs).max(f64::MIN_POSITIVE);
        for _ in 0..(4 * self.n + 20) {
            if rr <= stop {
                break;
            }
            let ap = apply(&p);
            let alpha = rr / dot(&p, &ap);
            for i in 0..x.len() {
                x[i] += p[i] * alpha;
                res[i] -= ap[i] * alpha;
            }
            let rr_new = dot(&res, &res);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..p.len() {
                p[i] = res[i] + p[i] * beta;
            }
        }
        x
    }

    /// Least-squares start `r = F_M^H b / M`, `z = max(0, A_L r)`, `u = 0`.
    pub fn initial_state(&self) -> AdmmState {
        let mut r: Vec<Complex64> = if self.closed_form {
            self.fhb.iter().map(|v| v / self.m as f64).collect()
        } else {
            self.solve_r_cg(&vec![0.0; self.l], vec![Complex64::new(0.0, 0.0); self.n])
        };
        self.project(&mut r);
        let z: Vec<f64> = self.constraint_map(&r).into_iter().map(|v| v.max(0.0)).collect();
        let mut state = AdmmState {
            r,
            z_prev: z.clone(),
            z,
            u: vec![0.0; self.l],
            iter: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
        };
        let (p, d) = residuals(&state, self);
        state.primal_residual = p;
        state.dual_residual = d;
        state
    }

    /// All-zero start.
    pub fn zero_state(&self) -> AdmmState {
        AdmmState {
            r: vec![Complex64::new(0.0, 0.0); self.n],
            z: vec![0.0; self.l],
            z_prev: vec![0.0; self.l],
            u: vec![0.0; self.l],
            iter: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
        }
    }
}

/// ADMM iterate: correlation, split variable, scaled multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub r: Vec<Complex64>,
    pub z: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub u: Vec<f64>,
    pub iter: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// One application of the three updates.
pub fn admm_iterate(mut state: AdmmState, problem: &AdmmProblem) -> AdmmState {
    let v: Vec<f64> = state.z.iter().zip(&state.u).map(|(z, u)| z - u).collect();
    state.r = problem.solve_r(&v);
    let ar = problem.constraint_map(&state.r);
    std::mem::swap(&mut state.z, &mut state.z_prev);
    for i in 0..ar.len() {
        state.z[i] = (ar[i] + state.u[i]).max(0.0);
        state.u[i] += ar[i] - state.z[i];
    }
    state.iter += 1;
    let primal = ar
        .iter()
        .zip(&state.z)
        .map(|(a, z)| (a - z) * (a - z))
        .sum::<f64>()
        .sqrt();
    state.primal_residual = primal;
    state.dual_residual = dual_residual(&state, problem);
    state
}

fn dual_residual(state: &AdmmState, problem: &AdmmProblem) -> f64 {
    let dz: Vec<f64> = state.z.iter().zip(&state.z_prev).map(|(a, b)| a - b).collect();
    let g = problem.constraint_adjoint(&dz);
    problem.rho * g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `(||Re{F_L I~ r} - z||, rho ||I~ F_L^H (z - z_prev)||)`.
pub fn residuals(state: &AdmmState, problem: &AdmmProblem) -> (f64, f64) {
    let ar = problem.constraint_map(&state.r);
    let primal = ar
        .iter()
        .zip(&state.z)
        .map(|(a, z)| (a - z) * (a - z))
        .sum::<f64>()
        .sqrt();
    (primal, dual_residual(state, problem))
}

/// Stopping thresholds `(eps_primal, eps_dual)` for the current iterate.
pub fn stopping_thresholds(state: &AdmmState, problem: &AdmmProblem, opts: &AdmmOptions) -> (f64, f64) {
    let ar = problem.constraint_map(&state.r);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = norm(&ar).max(norm(&state.z));
    let eps = opts.tol_abs * (problem.l as f64).sqrt() + opts.tol_rel * scale;
    (eps, eps)
}

/// Solver report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmDiagnostics {
    pub iters: usize,
    pub primal: f64,
    pub dual: f64,
    pub fit: f64,
    pub l: usize,
    pub rho: f64,
    pub converged: bool,
    /// `M < 2N`: the correlation is not identifiable from `b` alone.
    pub underdetermined: bool,
    /// `M < 2N - 1`: the `r`-update used the conjugate-gradient path.
    pub cg_fallback: bool,
    /// Amount added to `r_0` at exit to make the sampled spectrum nonnegative.
    pub feasibility_shift: f64,
}

/// Correlation estimate and solver report.
#[derive(Debug, Clone)]
pub struct CorkSolution {
    pub r: AutoCorrelation,
    pub diagnostics: AdmmDiagnostics,
}

/// Solves the sampled correlation fit with ADMM.
///
/// At exit `r_0` is raised by `max(0, -min Re{F_L I~ r})`; since the first
/// column of `F_L` is all ones this shifts the sampled spectrum uniformly and
/// makes it exactly nonnegative.
pub fn solve_cork(b: &MeasurementSet, opts: &AdmmOptions) -> Result<CorkSolution> {
    let problem = AdmmProblem::new(b, opts)?;
    let mut state = problem.initial_state();
    let mut converged = false;
    let mut last_good = state.clone();
    for _ in 0..opts.max_iters {
        state = admm_iterate(state, &problem);
        let finite = state.r.iter().all(|v| v.re.is_finite() && v.im.is_finite())
            && state.primal_residual.is_finite()
            && state.dual_residual.is_finite();
        if !finite {
            return Err(Error::Divergence {
                iters: state.iter,
                reason: format!(
                    "non-finite iterate; last finite state at iteration {} had residuals ({:.3e}, {:.3e})",
                    last_good.iter, last_good.primal_residual, last_good.dual_residual
                ),
            });
        }
        let (ep, ed) = stopping_thresholds(&state, &problem, opts);
        if state.primal_residual <= ep && state.dual_residual <= ed {
            converged = true;
            break;
        }
        last_good.clone_from(&state);
    }

    let mut r = state.r.clone();
    let min = problem
        .constraint_map(&r)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    r[0].re += shift;
    r[0].im = 0.0;
    if r[0].re < 0.0 {
        r[0].re = 0.0;
    }
    let fit = problem.fit(&r);
    let diagnostics = AdmmDiagnostics {
        iters: state.iter,
        primal: state.primal_residual,
        dual: state.dual_residual,
        fit,
        l: problem.l,
        rho: problem.rho,
        converged,
        underdetermined: problem.m < 2 * problem.n,
        cg_fallback: !problem.closed_form,
        feasibility_shift: shift,
    };
    Ok(CorkSolution {
        r: AutoCorrelation::new(r)?,
        diagnostics,
    })
}

/// Full correlation-retrieval pipeline: [`solve_cork`] followed by
/// [`kolmogorov_sf`], starting on the ADMM grid and doubling it while the
/// signal's fit keeps moving towards the correlation fit.
pub fn cork_recover(b: &MeasurementSet, opts: &AdmmOptions) -> Result<(ComplexSignal, CorkSolution)> {
    let sol = solve_cork(b, opts)?;
    let goal = SF_FIT_RTOL * b.norm_sqr();
    let mut sf = SfOptions::for_len(b.n).with_l(opts.l);
    let mut best: Option<(f64, ComplexSignal)> = None;
    loop {
        let mut x = kolmogorov_sf(&sol.r, sf)?;
        if opts.real_signal {
            x = ComplexSignal::new(x.values().iter().map(|v| Complex64::new(v.re, 0.0)).collect())?;
        }
        let dev = (signal_fit(b, &x)? - sol.diagnostics.fit).abs();
        let prev = best.as_ref().map_or(f64::INFINITY, |(d, _)| *d);
        if dev < prev {
            best = Some((dev, x));
        }
        if dev <= goal || dev > 0.5 * prev || sf.l >= SF_MAX_L {
            break;
        }
        sf.l *= 2;
    }
    Ok((best.expect("at least one grid").1, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{augment_min_phase, AugmentationSpec, ImpulsePolicy, Side};
    use crate::sampling::{random_real_signal, random_signal, rel_l2};
    use crate::signal::{autocorrelation, correlation_psd_check};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn min_phase(rng: &mut ChaCha8Rng, n: usize) -> ComplexSignal {
        let s = random_signal(rng, n);
        augment_min_phase(&s, AugmentationSpec::for_signal(&s, ImpulsePolicy::L1Margin, Side::Prefix))
            .unwrap()
            .signal
    }

    fn uniform_b(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MeasurementSet {
        MeasurementSet::new((0..m).map(|_| rng.random::<f64>()).collect(), n).unwrap()
    }

    #[test]
    fn defaults_follow_pipeline_rule() {
        let o = AdmmOptions::for_problem(32, 128);
        assert_eq!(o.l, 2048);
        assert!((o.rho - 128.0 / 2048.0).abs() < 1e-15);
        assert_eq!(AdmmOptions::for_problem(33, 10).l, 2048);
    }

    #[test]
    fn rejects_bad_configuration() {
        let b = MeasurementSet::new(vec![1.0; 8], 2).unwrap();
        let mut o = AdmmOptions::for_problem(2, 8);
        o.l = 100;
        assert!(matches!(solve_cork(&b, &o), Err(Error::Config(_))));
        o.l = 2;
        assert!(matches!(solve_cork(&b, &o), Err(Error::Config(_))));
        let mut o = AdmmOptions::for_problem(2, 8);
        o.rho = 0.0;
        assert!(matches!(solve_cork(&b, &o), Err(Error::Config(_))));
    }

    #[test]
    fn noiseless_min_phase_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = min_phase(&mut rng, 15);
        let b = MeasurementSet::from_signal(&x, 64).unwrap();
        let sol = solve_cork(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        assert!(sol.diagnostics.fit <= 1e-8 * b.norm_sqr());
        let r = autocorrelation(&x);
        assert!(rel_l2(sol.r.values(), r.values()) <= 1e-5);
    }

    #[test]
    fn scalar_case() {
        let b = MeasurementSet::new(vec![1.0; 4], 1).unwrap();
        let sol = solve_cork(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        assert!((sol.r.values()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn all_zero_start_has_zero_residuals() {
        let b = MeasurementSet::new(vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        let p = AdmmProblem::new(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        let s = p.zero_state();
        assert_eq!(residuals(&s, &p), (0.0, 0.0));
    }

    #[test]
    fn single_step_matches_hand_evaluation() {
        // N = 1, L = 2, M = 2: A_M r = [r, r], A_L r = [r, r]
        let b = MeasurementSet::new(vec![3.0, 1.0], 1).unwrap();
        let mut o = AdmmOptions::for_problem(1, 2);
        o.l = 2;
        o.rho = 0.5;
        let p = AdmmProblem::new(&b, &o).unwrap();
        let mut s = p.zero_state();
        s.z = vec![1.0, 0.5];
        s.u = vec![0.25, -0.5];
        let s1 = admm_iterate(s, &p);
        // r = (4 + 0.5 (0.75 + 1.0)) / (2 + 0.5 * 2) = 4.875 / 3
        let r = 4.875 / 3.0;
        assert!((s1.r[0].re - r).abs() < 1e-15);
        let z = [(r + 0.25f64).max(0.0), (r - 0.5f64).max(0.0)];
        assert!((s1.z[0] - z[0]).abs() < 1e-15 && (s1.z[1] - z[1]).abs() < 1e-15);
        assert!((s1.u[0] - (0.25 + r - z[0])).abs() < 1e-15);
        assert!((s1.u[1] - (-0.5 + r - z[1])).abs() < 1e-15);
        // dual: rho * |dz_0 + dz_1| for N = 1
        let dual = 0.5 * ((z[0] - 1.0) + (z[1] - 0.5)).abs();
        assert!((s1.dual_residual - dual).abs() < 1e-15);
    }

    #[test]
    fn residuals_match_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = uniform_b(&mut rng, 6, 20);
        let p = AdmmProblem::new(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        let mut s = p.initial_state();
        for _ in 0..5 {
            s = admm_iterate(s, &p);
        }
        // oracle: naive matrices
        let n = 6;
        let l = p.l;
        let omega = |k: usize, j: usize| {
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * ((k * j) % l) as f64 / l as f64)
        };
        let ar: Vec<f64> = (0..l)
            .map(|j| {
                (0..n)
                    .map(|k| (omega(k, j) * s.r[k] * if k == 0 { 1.0 } else { 2.0 }).re)
                    .sum()
            })
            .collect();
        let primal: f64 = ar.iter().zip(&s.z).map(|(a, z)| (a - z).powi(2)).sum::<f64>().sqrt();
        let dual: f64 = (0..n)
            .map(|k| {
                let w = if k == 0 { 1.0 } else { 2.0 };
                let mut g: Complex64 = (0..l).map(|j| omega(k, j).conj() * (s.z[j] - s.z_prev[j])).sum();
                if k == 0 {
                    g.im = 0.0;
                }
                (g * w).norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
            * p.rho;
        let (pr, du) = residuals(&s, &p);
        assert!((pr - primal).abs() <= 1e-12 * primal.max(1.0));
        assert!((du - dual).abs() <= 1e-12 * dual.max(1.0));
        assert!((s.primal_residual - pr).abs() <= 1e-14 * pr.max(1.0));
    }

    #[test]
    fn fixed_point_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = min_phase(&mut rng, 9);
        let b = MeasurementSet::from_signal(&x, 40).unwrap();
        let p = AdmmProblem::new(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        let s = admm_iterate(p.initial_state(), &p);
        let s2 = admm_iterate(s.clone(), &p);
        assert!((s2.primal_residual - s.primal_residual).abs() <= 1e-14 * (1.0 + b.norm_sqr().sqrt()));
        assert!(s2.dual_residual <= 1e-14 * (1.0 + b.norm_sqr().sqrt()));
    }

    #[test]
    fn z_is_nonnegative_every_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = uniform_b(&mut rng, 12, 50);
        let p = AdmmProblem::new(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        let mut s = p.initial_state();
        for _ in 0..30 {
            s = admm_iterate(s, &p);
            assert!(s.z.iter().all(|&v| v >= 0.0));
            assert!(s.primal_residual >= 0.0 && s.dual_residual >= 0.0);
        }
    }

    #[test]
    fn converges_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = uniform_b(&mut rng, 16, 64);
        let p = AdmmProblem::new(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        let mut s = p.initial_state();
        for _ in 0..200 {
            s = admm_iterate(s, &p);
        }
        assert!(s.primal_residual < 1e-6, "primal {}", s.primal_residual);
    }

    #[test]
    fn exit_is_feasible_and_real_mode_is_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = uniform_b(&mut rng, 10, 37).with_real_signal(true);
        let o = AdmmOptions::for_measurements(&b);
        let sol = solve_cork(&b, &o).unwrap();
        assert!(sol.r.values().iter().all(|v| v.im == 0.0));
        let (min, _) = correlation_psd_check(&sol.r, o.l);
        assert!(min >= -10.0 * o.tol_abs);
        assert!(sol.diagnostics.converged);
    }

    #[test]
    fn real_signal_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let s = random_real_signal(&mut rng, 12);
        let aug = augment_min_phase(&s, AugmentationSpec::for_signal(&s, ImpulsePolicy::L1Margin, Side::Prefix))
            .unwrap()
            .signal;
        let b = MeasurementSet::from_signal(&aug, 52).unwrap().with_real_signal(true);
        let (x, _) = cork_recover(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        assert_eq!(x.max_abs_imag(), 0.0);
        assert!(rel_l2(x.values(), aug.values()) < 1e-6);
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = uniform_b(&mut rng, 8, 30);
        let o = AdmmOptions::for_measurements(&b);
        let r1 = solve_cork(&b, &o).unwrap().r;
        let alpha = 3.7;
        let scaled = MeasurementSet::new(b.b.iter().map(|v| v * alpha).collect(), 8).unwrap();
        let r2 = solve_cork(&scaled, &o).unwrap().r;
        let want: Vec<Complex64> = r1.values().iter().map(|v| v * alpha).collect();
        assert!(rel_l2(r2.values(), &want) <= 1e-8);
    }

    #[test]
    fn short_measurements_use_cg_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = min_phase(&mut rng, 9);
        let b = MeasurementSet::from_signal(&x, 15).unwrap();
        let sol = solve_cork(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        assert!(sol.diagnostics.cg_fallback);
        assert!(sol.diagnostics.underdetermined);
        assert!(sol.diagnostics.fit <= 1e-6 * b.norm_sqr());
    }

    #[test]
    fn cg_path_matches_closed_form_when_both_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let b = uniform_b(&mut rng, 7, 30);
        let p = AdmmProblem::new(&b, &AdmmOptions::for_measurements(&b)).unwrap();
        let v: Vec<f64> = (0..p.l).map(|_| rng.random::<f64>() - 0.3).collect();
        let closed = p.solve_r(&v);
        let cg = p.solve_r_cg(&v, vec![Complex64::new(0.0, 0.0); 7]);
        assert!(rel_l2(&cg, &closed) < 1e-10);
    }
}
