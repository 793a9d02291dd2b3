//! Lifted semidefinite solvers for small problems.
//!
//! Everything here works on an `N x N` Hermitian PSD matrix `X` whose
//! diagonal sums `r_k = sum_j X[j+k, j]` play the role of the correlation. The
//! objectives only see `X` through these sums, so one accelerated projected
//! gradient engine serves the PhaseLift bound, the `-lambda X_00` rank-one
//! variant and the constrained `max X_00` factorization.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{is_min_phase, ROOT_SF_MAX_LEN};
use crate::fft;
use crate::signal::{
    correlation_psd_check, default_psd_grid, fit_error, psd_tolerance, signal_fit, AutoCorrelation,
    ComplexSignal, MeasurementSet,
};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Dense Hermitian matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

fn symmetrize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

impl HermitianMatrix {
    pub fn new(mut m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        symmetrize(&mut m);
        Ok(Self(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::from_element(n, n, ZERO))
    }

    /// `x x^H`.
    pub fn rank_one(x: &ComplexSignal) -> Self {
        let v = x.values();
        let n = v.len();
        Self(DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    /// `r_k = tr(T_k X) = sum_j X[j+k, j]`, `k = 0..N-1`.
    pub fn trace_map(&self) -> Vec<Complex64> {
        trace_map(&self.0)
    }

    /// Eigenvalues in descending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<Complex64>) {
        let e = SymmetricEigen::new(self.0.clone());
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
        let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(self.n(), self.n(), |r, c| e.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Leading eigenvector scaled by the root of its eigenvalue, rotated so
    /// that the first entry is real and nonnegative.
    pub fn leading_factor(&self) -> ComplexSignal {
        let (vals, vecs) = self.eigen();
        let s = vals[0].max(0.0).sqrt();
        let mut x: Vec<Complex64> = vecs.column(0).iter().map(|v| v * s).collect();
        let pivot = x[0];
        if pivot.norm() > 0.0 {
            let rot = pivot.conj() / pivot.norm();
            x.iter_mut().for_each(|v| *v *= rot);
            x[0].im = 0.0;
        }
        ComplexSignal::new(x).expect("finite eigenvector")
    }

    pub fn frobenius_distance(&self, other: &HermitianMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

fn trace_map(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    let mut r: Vec<Complex64> = (0..n)
        .map(|k| (0..n - k).map(|j| m[(j + k, j)]).sum())
        .collect();
    r[0].im = 0.0;
    r
}

/// Adjoint of [`trace_map`] under `<a, b> = Re sum conj(a) b`: diagonal `c_0`,
/// `k`-th lower diagonal `c_k / 2`, upper diagonal the conjugate.
fn trace_adjoint(c: &[Complex64]) -> DMatrix<Complex64> {
    let n = c.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(c[0].re, 0.0)
        } else if i > j {
            c[i - j] * 0.5
        } else {
            c[j - i].conj() * 0.5
        }
    })
}

fn inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clamped to zero.
pub fn psd_project(h: &HermitianMatrix) -> HermitianMatrix {
    let e = SymmetricEigen::new(h.0.clone());
    let n = h.n();
    let mut scaled = e.eigenvectors.clone();
    for (c, &lam) in e.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0);
        scaled.column_mut(c).iter_mut().for_each(|v| *v *= s);
    }
    let mut m = scaled * e.eigenvectors.adjoint();
    debug_assert_eq!(m.nrows(), n);
    symmetrize(&mut m);
    HermitianMatrix(m)
}

/// Solver settings shared by the lifted solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Iteration cap of one projected-gradient solve.
    pub max_iters: usize,
    /// Relative gradient-mapping norm at which a solve stops.
    pub tol: f64,
    /// Step-size safety factor applied to the power-iteration Lipschitz estimate.
    pub lipschitz_margin: f64,
    /// Step shrink factor used by backtracking.
    pub backtrack: f64,
    pub power_iters: usize,
    /// Eigenvalue-ratio threshold `lambda_2 / lambda_1` for rank one.
    pub rank_tol: f64,
    /// Relative fit excess over the lower bound accepted at the bisection exit.
    pub fit_slack: f64,
    /// Absolute fit excess, relative to `||b||^2`, accepted on top of `fit_slack`.
    pub fit_floor: f64,
    /// `(low, high)`; `None` starts from `0` and `10 (LB + ||b||^2)`.
    pub lambda_bracket: Option<(f64, f64)>,
    pub max_bisections: usize,
    pub max_doublings: usize,
    /// Largest accepted `N`.
    pub max_n: usize,
    /// Outer augmented-Lagrangian rounds of [`sdp_sf`].
    pub al_rounds: usize,
    /// Penalty of [`sdp_sf`] in units of `1 / r_0`.
    pub al_penalty: f64,
    /// Constraint residual `||T(X) - r|| / r_0` at which [`sdp_sf`] stops.
    pub al_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-7,
            lipschitz_margin: 1.05,
            backtrack: 2.0,
            power_iters: 60,
            rank_tol: 1e-6,
            fit_slack: 1e-6,
            fit_floor: 1e-9,
            lambda_bracket: None,
            max_bisections: 40,
            max_doublings: 30,
            max_n: 64,
            al_rounds: 200,
            al_penalty: 10.0,
            al_tol: 1e-9,
        }
    }
}

impl SdpOptions {
    fn validate(&self, n: usize) -> Result<()> {
        if n > self.max_n {
            return Err(Error::Size(format!(
                "N = {n} exceeds the lifted-solver limit {}",
                self.max_n
            )));
        }
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.rank_tol) || !unit(self.fit_slack) {
            return Err(Error::Config(format!(
                "rank_tol = {} and fit_slack = {} must lie in (0, 1)",
                self.rank_tol, self.fit_slack
            )));
        }
        if self.max_iters == 0 || !(self.tol > 0.0) || !(self.backtrack > 1.0) {
            return Err(Error::Config("invalid projected-gradient settings".into()));
        }
        if let Some((lo, hi)) = self.lambda_bracket {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::Config(format!("invalid lambda bracket ({lo}, {hi})")));
            }
        }
        Ok(())
    }
}

/// Smooth quadratic of `r = T(X)`; `eval` returns the value and the
/// coefficient vector `c` with `grad_X = T^*(c)`.
trait LagObjective {
    fn eval(&self, r: &[Complex64]) -> (f64, Vec<Complex64>);
}

struct Fit<'a> {
    b: &'a [f64],
    n: usize,
}

impl LagObjective for Fit<'_> {
    fn eval(&self, r: &[Complex64]) -> (f64, Vec<Complex64>) {
        let h = fft::weighted_spectrum(r, self.b.len());
        let res: Vec<f64> = self.b.iter().zip(&h).map(|(b, h)| b - h).collect();
        let value = res.iter().map(|v| v * v).sum();
        let mut c = fft::partial_adjoint_real(&res, self.n);
        for (k, v) in c.iter_mut().enumerate() {
            *v *= if k == 0 { -2.0 } else { -4.0 };
        }
        c[0].im = 0.0;
        (value, c)
    }
}

struct Penalty<'a> {
    target: &'a [Complex64],
    mu: Vec<Complex64>,
    beta: f64,
}

impl LagObjective for Penalty<'_> {
    fn eval(&self, r: &[Complex64]) -> (f64, Vec<Complex64>) {
        let mut value = 0.0;
        let mut c = Vec::with_capacity(r.len());
        for k in 0..r.len() {
            let d = r[k] - self.target[k];
            value += self.mu[k].re * d.re + self.mu[k].im * d.im + 0.5 * self.beta * d.norm_sqr();
            c.push(self.mu[k] + d * self.beta);
        }
        c[0].im = 0.0;
        (value, c)
    }
}

struct EngineOutput {
    x: HermitianMatrix,
    iters: usize,
    converged: bool,
}

/// Largest eigenvalue of `X -> T^*(c(T X) - c(0))` by power iteration.
fn lipschitz<O: LagObjective>(obj: &O, n: usize, iters: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let c0 = obj.eval(&vec![ZERO; n]).1;
    let mut v = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    symmetrize(&mut v);
    let mut est = 0.0;
    for _ in 0..iters {
        let norm = v.norm();
        if norm == 0.0 {
            break;
        }
        v /= Complex64::new(norm, 0.0);
        let c = obj.eval(&trace_map(&v)).1;
        let dc: Vec<Complex64> = c.iter().zip(&c0).map(|(a, b)| a - b).collect();
        let w = trace_adjoint(&dc);
        est = inner(&v, &w).abs();
        v = w;
    }
    est.max(f64::MIN_POSITIVE)
}

/// FISTA with adaptive restart on `q(T X) - reward Re X_00` over the PSD cone.
fn minimize_psd<O: LagObjective>(
    obj: &O,
    reward: f64,
    x0: HermitianMatrix,
    lip: f64,
    opts: &SdpOptions,
) -> EngineOutput {
    let n = x0.n();
    let total = |m: &DMatrix<Complex64>| -> (f64, DMatrix<Complex64>) {
        let (v, c) = obj.eval(&trace_map(m));
        let mut g = trace_adjoint(&c);
        g[(0, 0)].re -= reward;
        (v - reward * m[(0, 0)].re, g)
    };
    let (_, g0) = total(&DMatrix::from_element(n, n, ZERO));
    let scale = g0.norm().max(f64::MIN_POSITIVE);

    let mut x = psd_project(&x0).0;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut step_l = lip;
    let mut best = x.clone();
    let mut best_val = total(&x).0;
    let mut iters = 0;
    let mut converged = false;
    while iters < opts.max_iters {
        iters += 1;
        let (fy, gy) = total(&y);
        let (xn, fxn) = loop {
            let mut trial = &y - &gy * Complex64::new(1.0 / step_l, 0.0);
            symmetrize(&mut trial);
            let xn = psd_project(&HermitianMatrix(trial)).0;
            let d = &xn - &y;
            let fxn = total(&xn).0;
            let model = fy + inner(&gy, &d) + 0.5 * step_l * d.norm_squared();
            if fxn <= model + 1e-12 * fy.abs().max(1.0) || step_l > 1e30 {
                break (xn, fxn);
            }
            step_l *= opts.backtrack;
        };
        if fxn < best_val {
            best_val = fxn;
            best.clone_from(&xn);
        }
        let mapping = step_l * (&xn - &y).norm();
        if mapping <= opts.tol * scale {
            converged = true;
            best = xn;
            break;
        }
        let restart = inner(&(&y - &xn), &(&xn - &x)) > 0.0;
        if restart {
            t = 1.0;
            y = xn.clone();
        } else {
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &xn + (&xn - &x) * Complex64::new((t - 1.0) / tn, 0.0);
            t = tn;
        }
        x = xn;
    }
    EngineOutput {
        x: HermitianMatrix(best),
        iters,
        converged,
    }
}

/// Result of one PhaseLift solve.
#[derive(Debug, Clone)]
pub struct PhaseLiftValue {
    pub x: HermitianMatrix,
    /// `sum_m (b_m - tr(f_m f_m^H X))^2`, without the regularizer.
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
}

/// `min_{X >= 0} sum_m (b_m - tr(f_m f_m^H X))^2 - lambda X_00` with default settings.
pub fn phaselift_value(b: &MeasurementSet, lambda: f64) -> Result<PhaseLiftValue> {
    phaselift_value_with(b, lambda, &SdpOptions::default(), None)
}

/// As [`phaselift_value`], with explicit settings and an optional warm start.
pub fn phaselift_value_with(
    b: &MeasurementSet,
    lambda: f64,
    opts: &SdpOptions,
    warm: Option<&HermitianMatrix>,
) -> Result<PhaseLiftValue> {
    opts.validate(b.n)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must be nonnegative")));
    }
    let fit = Fit { b: &b.b, n: b.n };
    let lip = opts.lipschitz_margin * lipschitz(&fit, b.n, opts.power_iters);
    Ok(solve_fit(&fit, b, lambda, lip, opts, warm))
}

fn solve_fit(
    fit: &Fit,
    b: &MeasurementSet,
    lambda: f64,
    lip: f64,
    opts: &SdpOptions,
    warm: Option<&HermitianMatrix>,
) -> PhaseLiftValue {
    let n = b.n;
    let x0 = match warm {
        Some(w) if w.n() == n => w.clone(),
        _ => {
            let level = b.b.iter().sum::<f64>() / b.m() as f64 / n as f64;
            HermitianMatrix(DMatrix::from_fn(n, n, |i, j| {
                Complex64::new(if i == j { level.max(0.0) } else { 0.0 }, 0.0)
            }))
        }
    };
    let out = minimize_psd(fit, lambda, x0, lip, opts);
    let objective = fit.eval(&out.x.trace_map()).0;
    PhaseLiftValue {
        x: out.x,
        objective,
        iters: out.iters,
        converged: out.converged,
    }
}

/// Bookkeeping of a PhaseLift-SF run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLiftSfReport {
    pub lambda_star: f64,
    pub rank_ratio: f64,
    pub fit: f64,
    pub lower_bound: f64,
    /// Bracket doublings plus bisection rounds.
    pub rounds: usize,
    pub solves: usize,
    pub total_iters: usize,
    /// Eigenvalues of the accepted `X`, descending.
    pub eigenvalues: Vec<f64>,
    /// Minimum-phase certificate of the output for `N <= 48`.
    pub min_phase: Option<bool>,
}

struct Candidate {
    lambda: f64,
    x: ComplexSignal,
    eigenvalues: Vec<f64>,
    ratio: f64,
    fit: f64,
}

/// Rank-one recovery through `-lambda X_00` with a bisection on `lambda`.
///
/// A solve is accepted once `lambda_2 / lambda_1 <= rank_tol` and the fit of
/// its rank-one factor is at most `(1 + fit_slack) LB + fit_floor ||b||^2`,
/// where `LB` is the `lambda = 0` optimum.
pub fn phaselift_sf(b: &MeasurementSet, opts: &SdpOptions) -> Result<(ComplexSignal, PhaseLiftSfReport)> {
    opts.validate(b.n)?;
    let fit = Fit { b: &b.b, n: b.n };
    let lip = opts.lipschitz_margin * lipschitz(&fit, b.n, opts.power_iters);
    let base = solve_fit(&fit, b, 0.0, lip, opts, None);
    let lower_bound = base.objective;
    let bnorm = b.norm_sqr();
    let allowed = (1.0 + opts.fit_slack) * lower_bound + opts.fit_floor * bnorm;

    let mut solves = 1;
    let mut total_iters = base.iters;
    let mut warm = base.x.clone();
    let mut nearest: Option<Candidate> = None;
    let mut rounds = 0;

    let mut evaluate = |lambda: f64, warm: &mut HermitianMatrix| -> Result<Candidate> {
        let v = solve_fit(&fit, b, lambda, lip, opts, Some(warm));
        solves += 1;
        total_iters += v.iters;
        let eigenvalues = v.x.eigenvalues();
        let ratio = if eigenvalues[0] > 0.0 {
            eigenvalues.get(1).copied().unwrap_or(0.0).max(0.0) / eigenvalues[0]
        } else {
            f64::INFINITY
        };
        let x = v.x.leading_factor();
        let fit = signal_fit(b, &x)?;
        *warm = v.x;
        Ok(Candidate { lambda, x, eigenvalues, ratio, fit })
    };
    let miss = |c: &Candidate| (c.ratio / opts.rank_tol).max((c.fit - lower_bound) / (allowed - lower_bound).max(f64::MIN_POSITIVE));
    let track = |c: &Candidate, nearest: &mut Option<Candidate>| {
        if nearest.as_ref().is_none_or(|n| miss(c) < miss(n)) {
            *nearest = Some(Candidate {
                lambda: c.lambda,
                x: c.x.clone(),
                eigenvalues: c.eigenvalues.clone(),
                ratio: c.ratio,
                fit: c.fit,
            });
        }
    };

    let (mut lo, mut hi) = opts
        .lambda_bracket
        .unwrap_or((0.0, 10.0 * (lower_bound + bnorm)));
    let mut accepted: Option<Candidate> = None;
    let mut top = evaluate(hi, &mut warm)?;
    track(&top, &mut nearest);
    while top.ratio > opts.rank_tol && rounds < opts.max_doublings {
        rounds += 1;
        lo = hi;
        hi *= 2.0;
        top = evaluate(hi, &mut warm)?;
        track(&top, &mut nearest);
    }
    if top.ratio <= opts.rank_tol && top.fit <= allowed {
        accepted = Some(top);
    } else if top.ratio <= opts.rank_tol {
        for _ in 0..opts.max_bisections {
            rounds += 1;
            let mid = 0.5 * (lo + hi);
            let c = evaluate(mid, &mut warm)?;
            track(&c, &mut nearest);
            let rank_ok = c.ratio <= opts.rank_tol;
            if rank_ok && c.fit <= allowed {
                accepted = Some(c);
                break;
            }
            if rank_ok {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    let Some(c) = accepted else {
        let n = nearest.expect("at least one solve");
        return Err(Error::BracketExhausted {
            lambda: n.lambda,
            rank_ratio: n.ratio,
            fit: n.fit,
            lower_bound,
        });
    };
    let min_phase = if b.n <= ROOT_SF_MAX_LEN {
        Some(is_min_phase(&c.x, 1e-6)?.0)
    } else {
        None
    };
    let report = PhaseLiftSfReport {
        lambda_star: c.lambda,
        rank_ratio: c.ratio,
        fit: c.fit,
        lower_bound,
        rounds,
        solves,
        total_iters,
        eigenvalues: c.eigenvalues,
        min_phase,
    };
    Ok((c.x, report))
}

/// `max X_00` subject to `T(X) = r`, `X >= 0`, by an augmented Lagrangian
/// around the projected-gradient engine; returns the rank-one factor.
pub fn sdp_sf(r: &AutoCorrelation, opts: &SdpOptions) -> Result<ComplexSignal> {
    let n = r.len();
    opts.validate(n)?;
    let (min, at) = correlation_psd_check(r, default_psd_grid(n));
    if min < -psd_tolerance(r) {
        return Err(Error::InvalidCorrelation(format!(
            "spectrum reaches {min:.3e} at grid index {at}"
        )));
    }
    let r0 = r.r0();
    if r0 == 0.0 {
        return ComplexSignal::zeros(n);
    }
    let target = r.values();
    let mut pen = Penalty {
        target,
        mu: vec![ZERO; n],
        beta: opts.al_penalty / r0,
    };
    let mut lip = opts.lipschitz_margin * lipschitz(&pen, n, opts.power_iters);
    let mut x = HermitianMatrix(DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(if i == j { r0 / n as f64 } else { 0.0 }, 0.0)
    }));
    let resid = |x: &HermitianMatrix| -> (Vec<Complex64>, f64) {
        let d: Vec<Complex64> = x.trace_map().iter().zip(target).map(|(a, b)| a - b).collect();
        let norm = d.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        (d, norm)
    };
    let mut prev = f64::INFINITY;
    for _ in 0..opts.al_rounds {
        x = minimize_psd(&pen, 1.0, x, lip, opts).x;
        let (d, norm) = resid(&x);
        if norm <= opts.al_tol * r0 {
            break;
        }
        for (m, dk) in pen.mu.iter_mut().zip(&d) {
            *m += dk * pen.beta;
        }
        pen.mu[0].im = 0.0;
        if norm > 0.25 * prev && pen.beta < 1e10 / r0 {
            pen.beta *= 2.0;
            lip *= 2.0;
        }
        prev = norm;
    }
    let (_, norm) = resid(&x);
    if norm > 1e-6 * r0 {
        return Err(Error::InvalidCorrelation(format!(
            "trace constraints violated by {:.3e} relative",
            norm / r0
        )));
    }
    Ok(x.leading_factor())
}

/// Outcome of [`lift_equivalence_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftCheck {
    pub max_abs_diff: f64,
    /// `max_k |r_k - tr(T_k X)|`.
    pub trace_mismatch: f64,
    pub precondition_ok: bool,
}

/// Compares `Re{f_m^H I~ r}` with `tr(f_m f_m^H X)` on an `m`-point grid by
/// direct summation.
pub fn lift_equivalence_check(r: &AutoCorrelation, x: &HermitianMatrix, m: usize) -> Result<LiftCheck> {
    let n = x.n();
    if r.len() != n {
        return Err(Error::Dimension(format!(
            "correlation has {} lags, matrix is {n}x{n}",
            r.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    let t = x.trace_map();
    let trace_mismatch = t
        .iter()
        .zip(r.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let lhs = fft::weighted_spectrum(r.values(), m);
    let mut max_abs_diff = 0.0f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    for (mm, &l) in lhs.iter().enumerate() {
        let mut acc = ZERO;
        for a in 0..n {
            for c in 0..n {
                let lag = a as i64 - c as i64;
                let ph = -two_pi * ((lag * mm as i64).rem_euclid(m as i64)) as f64 / m as f64;
                acc += x.get(a, c) * Complex64::from_polar(1.0, ph);
            }
        }
        max_abs_diff = max_abs_diff.max((l - acc.re).abs());
    }
    Ok(LiftCheck {
        max_abs_diff,
        trace_mismatch,
        precondition_ok: trace_mismatch <= 1e-10 * r.r0().max(1.0),
    })
}

/// Fit of `X` against `b` through the lifted intensities.
pub fn lifted_fit(b: &MeasurementSet, x: &HermitianMatrix) -> f64 {
    fit_error(&b.b, &fft::weighted_spectrum(&x.trace_map(), b.m()))
}
