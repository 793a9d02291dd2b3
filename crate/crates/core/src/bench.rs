//! Monte-Carlo experiment harness: optimality gaps against the lifted lower
//! bound, recovery with and without the reference impulse, and MSE against
//! the Cramér-Rao bound, plus persistence of the per-trial records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{factor_output, fienup_solve, gs_solve, IterativeOptions};
use crate::cork::{cork_recover, AdmmOptions};
use crate::error::{Error, Result};
use crate::fft;
use crate::io::{read_text, to_json, write_atomic};
use crate::measurement::{
    add_noise, augment_min_phase, deaugment, sigma2_for_snr, AugmentationSpec, ImpulsePolicy, Side,
};
use crate::sampling::{random_signal, trial_seed};
use crate::sdp::{phaselift_sf, phaselift_value_with, SdpOptions};
use crate::signal::{global_phase_distance, signal_fit, ComplexSignal, MeasurementSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Gap,
    Recovery,
    Crb,
}

/// How `M` is derived from `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MRule {
    /// `M ~ U[m_min_factor N, m_max_factor N]`.
    Uniform,
    /// `M = round(m_factor N)`.
    Multiplier,
    /// Smallest power of two `>= m_factor N`.
    Pow2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Lifted `lambda = 0` lower bound.
    Phaselift,
    PhaseliftSf,
    Cork,
    /// Fienup iterations refined by GS.
    FienupGs,
    /// Fienup-GS followed by spectral factorization.
    FienupSf,
    Gs,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Phaselift => "phaselift",
            SolverKind::PhaseliftSf => "phaselift-sf",
            SolverKind::Cork => "cork",
            SolverKind::FienupGs => "fienup-gs",
            SolverKind::FienupSf => "fienup-sf",
            SolverKind::Gs => "gs",
        }
    }

    fn is_lifted(self) -> bool {
        matches!(self, SolverKind::Phaselift | SolverKind::PhaseliftSf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpulseChoice {
    L1,
    ThreeSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sweep {
    Snr,
    M,
}

fn d_n_min() -> usize {
    8
}
fn d_n_max() -> usize {
    8
}
fn d_m_rule() -> MRule {
    MRule::Multiplier
}
fn d_m_factor() -> f64 {
    4.0
}
fn d_m_min() -> usize {
    2
}
fn d_m_max() -> usize {
    8
}
fn d_m_factors() -> Vec<usize> {
    vec![2, 4, 8, 16]
}
fn d_sweep() -> Sweep {
    Sweep::Snr
}
fn d_impulse() -> ImpulseChoice {
    ImpulseChoice::L1
}
fn d_sigma() -> f64 {
    1.0
}
fn d_l_factor() -> usize {
    32
}
fn d_fienup_iters() -> usize {
    1000
}
fn d_solvers() -> Vec<SolverKind> {
    vec![SolverKind::Cork]
}

/// Flat experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "d_n_min")]
    pub n_min: usize,
    #[serde(default = "d_n_max")]
    pub n_max: usize,
    #[serde(default = "d_m_rule")]
    pub m_rule: MRule,
    #[serde(default = "d_m_factor")]
    pub m_factor: f64,
    #[serde(default = "d_m_min")]
    pub m_min_factor: usize,
    #[serde(default = "d_m_max")]
    pub m_max_factor: usize,
    /// `M / N` values of an `M` sweep.
    #[serde(default = "d_m_factors")]
    pub m_factors: Vec<usize>,
    #[serde(default = "d_sweep")]
    pub sweep: Sweep,
    pub trials: usize,
    /// Noise levels; recovery trials cycle through them, an SNR sweep visits
    /// each, an `M` sweep uses the first. Empty means noiseless.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default = "d_solvers")]
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "d_impulse")]
    pub impulse: ImpulseChoice,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_l_factor")]
    pub l_factor: usize,
    #[serde(default)]
    pub admm_max_iters: Option<usize>,
    #[serde(default)]
    pub admm_tol: Option<f64>,
    #[serde(default = "d_fienup_iters")]
    pub fienup_iters: usize,
    #[serde(default)]
    pub sdp_rank_tol: Option<f64>,
    #[serde(default)]
    pub sdp_fit_slack: Option<f64>,
    /// Largest accepted CoRK gap, relative to `||b||^2`.
    #[serde(default)]
    pub max_cork_gap: Option<f64>,
    /// Largest accepted PhaseLift-SF gap, relative to `||b||^2`.
    #[serde(default)]
    pub max_sf_gap: Option<f64>,
    #[serde(default)]
    pub max_sf_rank_ratio: Option<f64>,
    /// Required fraction of trials where the Fienup-GS gap is at least the CoRK gap.
    #[serde(default)]
    pub min_fienup_worse_rate: Option<f64>,
    /// Largest accepted normalized error of the minimum-phase CoRK arm (all trials).
    #[serde(default)]
    pub max_min_phase_error: Option<f64>,
    /// Required fraction of direct-arm CoRK trials with normalized error `>= 0.1`.
    #[serde(default)]
    pub min_direct_failure_rate: Option<f64>,
    #[serde(default)]
    pub max_crb_ratio: Option<f64>,
}

/// Normalized error above which a direct-arm trial counts as a failure.
pub const DIRECT_FAILURE_ERROR: f64 = 0.1;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "experiment config".into(),
            message: format!("line {} column {}: {e}", e.line(), e.column()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                context: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return bad(format!("invalid N range [{}, {}]", self.n_min, self.n_max));
        }
        if self.solvers.is_empty() {
            return bad("no solvers selected".into());
        }
        let lifted = self.solvers.iter().any(|s| s.is_lifted());
        if lifted && self.kind == ExperimentKind::Gap && self.n_max > SdpOptions::default().max_n {
            return bad(format!(
                "lifted solvers need N <= {}, got n_max = {}",
                SdpOptions::default().max_n,
                self.n_max
            ));
        }
        match self.m_rule {
            MRule::Uniform if self.m_min_factor == 0 || self.m_min_factor > self.m_max_factor => {
                return bad(format!(
                    "invalid M factor range [{}, {}]",
                    self.m_min_factor, self.m_max_factor
                ))
            }
            MRule::Multiplier | MRule::Pow2 if !(self.m_factor >= 1.0) => {
                return bad(format!("m_factor = {} must be >= 1", self.m_factor))
            }
            _ => {}
        }
        if self.kind == ExperimentKind::Crb {
            if self.sweep == Sweep::Snr && self.snr_db.is_empty() {
                return bad("an SNR sweep needs at least one snr_db value".into());
            }
            if self.sweep == Sweep::M && (self.m_factors.is_empty() || self.snr_db.is_empty()) {
                return bad("an M sweep needs m_factors and an snr_db value".into());
            }
            if self.n_min != self.n_max {
                return bad("the CRB study uses one fixed signal; set n_min = n_max".into());
            }
        }
        if !self.l_factor.is_power_of_two() && self.l_factor < 2 {
            return bad(format!("l_factor = {} too small", self.l_factor));
        }
        Ok(())
    }

    fn draw_m(&self, n: usize, rng: &mut ChaCha8Rng) -> usize {
        match self.m_rule {
            MRule::Uniform => rng.random_range(self.m_min_factor * n..=self.m_max_factor * n),
            MRule::Multiplier => (self.m_factor * n as f64).round() as usize,
            MRule::Pow2 => fft::next_pow2_at_least((self.m_factor * n as f64).ceil() as usize),
        }
    }

    fn policy(&self) -> ImpulsePolicy {
        match self.impulse {
            ImpulseChoice::L1 => ImpulsePolicy::L1Margin,
            ImpulseChoice::ThreeSigma => ImpulsePolicy::ThreeSigma { sigma: self.sigma },
        }
    }

    fn admm(&self, b: &MeasurementSet) -> AdmmOptions {
        let mut o = AdmmOptions::for_measurements(b).with_l_factor(b.n, b.m(), self.l_factor);
        if let Some(k) = self.admm_max_iters {
            o.max_iters = k;
        }
        if let Some(t) = self.admm_tol {
            o.tol_rel = t;
        }
        o
    }

    fn sdp(&self) -> SdpOptions {
        let d = SdpOptions::default();
        SdpOptions {
            rank_tol: self.sdp_rank_tol.unwrap_or(d.rank_tol),
            fit_slack: self.sdp_fit_slack.unwrap_or(d.fit_slack),
            ..d
        }
    }

    /// Number of trials the experiment runs (sweep points times trials for CRB).
    pub fn total_trials(&self) -> usize {
        match self.kind {
            ExperimentKind::Crb => self.sweep_points().len() * self.trials,
            _ => self.trials,
        }
    }

    fn sweep_points(&self) -> Vec<f64> {
        match self.sweep {
            Sweep::Snr => self.snr_db.clone(),
            Sweep::M => self.m_factors.iter().map(|&f| f as f64).collect(),
        }
    }
}

/// Outcome of one solver on one measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub solver: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub arm: Option<String>,
    /// Intensity fit; for CoRK the fit of the correlation estimate.
    pub fit: Option<f64>,
    /// Fit of the returned signal's intensities.
    pub signal_fit: Option<f64>,
    /// `signal_fit / ||b||^2` of the arm's own measurements (recovery trials).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rel_signal_fit: Option<f64>,
    pub gap: Option<f64>,
    /// `gap / ||b||^2`.
    pub rel_gap: Option<f64>,
    /// `min_psi ||s - psi s_hat||^2 / ||s||^2`.
    pub error: Option<f64>,
    pub iters: Option<usize>,
    pub rank_ratio: Option<f64>,
    pub converged: Option<bool>,
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

impl SolverRecord {
    fn new(solver: SolverKind, arm: Option<&str>) -> Self {
        Self {
            solver: solver.name().into(),
            arm: arm.map(str::to_string),
            fit: None,
            signal_fit: None,
            rel_signal_fit: None,
            gap: None,
            rel_gap: None,
            error: None,
            iters: None,
            rank_ratio: None,
            converged: None,
            failure: None,
            wall_time_s: 0.0,
        }
    }

    fn key(&self) -> String {
        match &self.arm {
            Some(a) => format!("{}/{}", self.solver, a),
            None => self.solver.clone(),
        }
    }
}

/// Everything recorded for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub snr_db: Option<f64>,
    pub sigma2: f64,
    pub b_norm2: f64,
    /// Sweep coordinate of a CRB trial (SNR in dB or `M / N`).
    pub point: Option<f64>,
    pub lower_bound: Option<f64>,
    /// Bound on `E ||s - s_hat||^2 / ||s||^2`.
    pub crb: Option<f64>,
    pub records: Vec<SolverRecord>,
}

impl TrialResult {
    pub fn record(&self, key: &str) -> Option<&SolverRecord> {
        self.records.iter().find(|r| r.key() == key)
    }

    /// The record without its wall-time fields, for reproducibility checks.
    pub fn without_timing(&self) -> TrialResult {
        let mut t = self.clone();
        t.records.iter_mut().for_each(|r| r.wall_time_s = 0.0);
        t
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn uniform_b(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Result<MeasurementSet> {
    MeasurementSet::new((0..m).map(|_| rng.random::<f64>()).collect(), n)
}

/// Optimality-gap trial: `M ~` rule, `b ~ U[0,1]^M`, every enabled solver
/// compared with the lifted `lambda = 0` bound.
pub fn run_gap_trial(config: &ExperimentConfig, trial: usize) -> TrialResult {
    let seed = trial_seed(config.master_seed, trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(config.n_min..=config.n_max);
    let m = config.draw_m(n, &mut rng).max(1);
    let b = uniform_b(&mut rng, n, m).expect("positive sizes");
    let bnorm = b.norm_sqr();
    let sdp = config.sdp();
    let mut records = Vec::new();
    let mut lower_bound = None;

    if config.solvers.iter().any(|s| s.is_lifted()) {
        let mut rec = SolverRecord::new(SolverKind::Phaselift, None);
        let (out, t) = timed(|| phaselift_value_with(&b, 0.0, &sdp, None));
        rec.wall_time_s = t;
        match out {
            Ok(v) => {
                lower_bound = Some(v.objective);
                rec.fit = Some(v.objective);
                rec.iters = Some(v.iters);
                rec.converged = Some(v.converged);
            }
            Err(e) => rec.failure = Some(e.to_string()),
        }
        if config.solvers.contains(&SolverKind::Phaselift) {
            records.push(rec);
        }
    }

    let mut solvers = config.solvers.clone();
    solvers.sort();
    solvers.dedup();
    for solver in solvers {
        let mut rec = SolverRecord::new(solver, None);
        let result: Result<()> = (|| {
            match solver {
                SolverKind::Phaselift => return Ok(()),
                SolverKind::PhaseliftSf => {
                    let (out, t) = timed(|| phaselift_sf(&b, &sdp));
                    rec.wall_time_s = t;
                    let (x, rep) = out?;
                    rec.fit = Some(rep.fit);
                    rec.signal_fit = Some(signal_fit(&b, &x)?);
                    rec.rank_ratio = Some(rep.rank_ratio);
                    rec.iters = Some(rep.total_iters);
                    rec.converged = Some(true);
                }
                SolverKind::Cork => {
                    let (out, t) = timed(|| cork_recover(&b, &config.admm(&b)));
                    rec.wall_time_s = t;
                    let (x, sol) = out?;
                    rec.fit = Some(sol.diagnostics.fit);
                    rec.signal_fit = Some(signal_fit(&b, &x)?);
                    rec.iters = Some(sol.diagnostics.iters);
                    rec.converged = Some(sol.diagnostics.converged);
                }
                SolverKind::FienupGs | SolverKind::FienupSf | SolverKind::Gs => {
                    let opts = IterativeOptions {
                        max_iters: if solver == SolverKind::Gs { 5000 } else { config.fienup_iters },
                        ..IterativeOptions::fienup(n, seed ^ 0x9e37_79b9)
                    };
                    let (out, t) = timed(|| -> Result<(ComplexSignal, usize, bool)> {
                        if solver == SolverKind::Gs {
                            let g = gs_solve(&b, &opts)?;
                            Ok((g.x, g.cost_history.len() - 1, g.converged))
                        } else {
                            let f = fienup_solve(&b, &opts)?;
                            let it = opts.max_iters + f.refine.cost_history.len() - 1;
                            let x = if solver == SolverKind::FienupSf {
                                factor_output(&b, &f.x)?
                            } else {
                                f.x
                            };
                            Ok((x, it, f.refine.converged))
                        }
                    });
                    rec.wall_time_s = t;
                    let (x, it, conv) = out?;
                    let fit = signal_fit(&b, &x)?;
                    rec.fit = Some(fit);
                    rec.signal_fit = Some(fit);
                    rec.iters = Some(it);
                    rec.converged = Some(conv);
                }
            }
            Ok(())
        })();
        if solver == SolverKind::Phaselift {
            continue;
        }
        if let Err(e) = result {
            rec.failure = Some(e.to_string());
        }
        if let (Some(f), Some(lb)) = (rec.fit, lower_bound) {
            rec.gap = Some(f - lb);
            rec.rel_gap = Some((f - lb) / bnorm);
        }
        records.push(rec);
    }
    if let Some(lb) = lower_bound {
        if let Some(r) = records.iter_mut().find(|r| r.solver == "phaselift") {
            r.gap = Some(0.0);
            r.rel_gap = Some(0.0);
            r.fit = Some(lb);
        }
    }
    TrialResult {
        trial,
        seed,
        n,
        m,
        snr_db: None,
        sigma2: 0.0,
        b_norm2: bnorm,
        point: None,
        lower_bound,
        crb: None,
        records,
    }
}

fn normalized_error(s: &ComplexSignal, est: &ComplexSignal) -> Result<f64> {
    Ok(global_phase_distance(s, est)? / s.energy().max(f64::MIN_POSITIVE))
}

/// Runs `solver` on one measurement arm, undoing the augmentation when given.
fn recover_arm(
    config: &ExperimentConfig,
    solver: SolverKind,
    b: &MeasurementSet,
    s: &ComplexSignal,
    spec: Option<&AugmentationSpec>,
    seed: u64,
    arm: &str,
) -> SolverRecord {
    let mut rec = SolverRecord::new(solver, Some(arm));
    let result: Result<()> = (|| {
        let (out, t) = timed(|| -> Result<(ComplexSignal, Option<f64>, usize, bool)> {
            match solver {
                SolverKind::Cork => {
                    let (x, sol) = cork_recover(b, &config.admm(b))?;
                    Ok((x, Some(sol.diagnostics.fit), sol.diagnostics.iters, sol.diagnostics.converged))
                }
                SolverKind::FienupGs | SolverKind::FienupSf | SolverKind::Gs => {
                    let opts = IterativeOptions {
                        max_iters: if solver == SolverKind::Gs { 5000 } else { config.fienup_iters },
                        ..IterativeOptions::fienup(b.n, seed)
                    };
                    if solver == SolverKind::Gs {
                        let g = gs_solve(b, &opts)?;
                        let it = g.cost_history.len() - 1;
                        return Ok((g.x, None, it, g.converged));
                    }
                    let f = fienup_solve(b, &opts)?;
                    let it = opts.max_iters + f.refine.cost_history.len() - 1;
                    let x = if solver == SolverKind::FienupSf { factor_output(b, &f.x)? } else { f.x };
                    Ok((x, None, it, f.refine.converged))
                }
                SolverKind::PhaseliftSf => {
                    let (x, rep) = phaselift_sf(b, &config.sdp())?;
                    Ok((x, Some(rep.fit), rep.total_iters, true))
                }
                SolverKind::Phaselift => Err(Error::Config("the lifted bound returns no signal".into())),
            }
        });
        rec.wall_time_s = t;
        let (x, fit, iters, conv) = out?;
        let sfit = signal_fit(b, &x)?;
        rec.fit = Some(fit.unwrap_or(sfit));
        rec.signal_fit = Some(sfit);
        rec.rel_signal_fit = Some(sfit / b.norm_sqr());
        rec.iters = Some(iters);
        rec.converged = Some(conv);
        let est = match spec {
            Some(sp) => deaugment(&x, sp)?,
            None => x,
        };
        rec.error = Some(normalized_error(s, &est)?);
        Ok(())
    })();
    if let Err(e) = result {
        rec.failure = Some(e.to_string());
    }
    rec
}

/// Recovery trial: a random `s ~ CN(0, I)` measured directly and through
/// the minimum-phase augmentation, each arm solved by every enabled solver.
pub fn run_recovery_trial(config: &ExperimentConfig, trial: usize) -> TrialResult {
    let seed = trial_seed(config.master_seed, trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(config.n_min..=config.n_max);
    let m = config.draw_m(n, &mut rng).max(1);
    let s = random_signal(&mut rng, n);
    let noise_seed = rng.random::<u64>();
    let solver_seed = rng.random::<u64>();
    let snr = if config.snr_db.is_empty() {
        None
    } else {
        Some(config.snr_db[trial % config.snr_db.len()])
    };
    let spec = AugmentationSpec::for_signal(&s, config.policy(), Side::Prefix);
    let aug = augment_min_phase(&s, spec).expect("prefix spec");

    let measure = |x: &ComplexSignal, salt: u64| -> Result<MeasurementSet> {
        let clean = MeasurementSet::from_signal(x, m)?;
        match snr {
            Some(db) => add_noise(&clean, sigma2_for_snr(&clean, db), noise_seed ^ salt),
            None => Ok(clean),
        }
    };
    let direct = measure(&s, 1).expect("valid sizes");
    let minp = measure(&aug.signal, 2).expect("valid sizes");

    let mut solvers = config.solvers.clone();
    solvers.sort();
    solvers.dedup();
    let mut records = Vec::new();
    for &solver in solvers.iter().filter(|s| **s != SolverKind::Phaselift) {
        records.push(recover_arm(config, solver, &direct, &s, None, solver_seed, "direct"));
        records.push(recover_arm(config, solver, &minp, &s, Some(&spec), solver_seed, "min-phase"));
    }
    TrialResult {
        trial,
        seed,
        n,
        m,
        snr_db: snr,
        sigma2: minp.sigma2,
        b_norm2: minp.norm_sqr(),
        point: None,
        lower_bound: None,
        crb: None,
        records,
    }
}

/// Jacobian of `m -> |f_m^H x|^2` with respect to `[Re x; Im x]`, `M x 2N`.
pub fn intensity_jacobian(x: &ComplexSignal, m: usize) -> Result<DMatrix<f64>> {
    let n = x.len();
    if m == 0 {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    let y = fft::partial_forward(x.values(), m);
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(DMatrix::from_fn(m, 2 * n, |row, col| {
        let k = col % n;
        let ph = -two_pi * ((k * row) % m) as f64 / m as f64;
        let w = y[row].conj() * num_complex::Complex64::from_polar(1.0, ph);
        if col < n {
            2.0 * w.re
        } else {
            -2.0 * w.im
        }
    }))
}

/// Trace of `pinv(G^T G / sigma2)` over every coordinate except `exclude`.
pub fn crb_excluding(x: &ComplexSignal, m: usize, sigma2: f64, exclude: &[usize]) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidInput(format!("sigma2 = {sigma2} must be positive")));
    }
    let g = intensity_jacobian(x, m)?;
    let info = g.transpose() * &g;
    let e = SymmetricEigen::new(info);
    let max = e.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cut = 1e-10 * max;
    let dim = e.eigenvalues.len();
    let mut trace = 0.0;
    for i in (0..dim).filter(|i| !exclude.contains(i)) {
        let mut acc = 0.0;
        for (j, &lam) in e.eigenvalues.iter().enumerate() {
            if lam > cut {
                acc += e.eigenvectors[(i, j)] * e.eigenvectors[(i, j)] / lam;
            }
        }
        trace += acc;
    }
    Ok(sigma2 * trace)
}

/// Cramér-Rao bound on the signal part of a prefix-augmented `smin`: the
/// pseudo-inverse Fisher trace excluding `Re delta` and `Im delta`.
pub fn compute_crb(smin: &ComplexSignal, m: usize, sigma2: f64) -> Result<f64> {
    if m < 2 * smin.len() {
        return Err(Error::InvalidInput(format!(
            "M = {m} is below 2N = {}",
            2 * smin.len()
        )));
    }
    crb_excluding(smin, m, sigma2, &[0, smin.len()])
}

/// The fixed signal of a CRB study.
pub fn crb_signal(config: &ExperimentConfig) -> ComplexSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.master_seed, u64::MAX));
    random_signal(&mut rng, config.n_min)
}

/// One noise draw of a CRB study at sweep point `trial / trials`.
pub fn run_crb_trial(config: &ExperimentConfig, trial: usize) -> TrialResult {
    let points = config.sweep_points();
    let point = points[trial / config.trials];
    let s = crb_signal(config);
    let n = s.len();
    let (m, snr) = match config.sweep {
        Sweep::Snr => ((config.m_factor * n as f64).round() as usize, point),
        Sweep::M => (point as usize * n, config.snr_db[0]),
    };
    let seed = trial_seed(config.master_seed, trial as u64);
    let spec = AugmentationSpec::for_signal(&s, config.policy(), Side::Prefix);
    let aug = augment_min_phase(&s, spec).expect("prefix spec");
    let clean = MeasurementSet::from_signal(&aug.signal, m).expect("valid sizes");
    let sigma2 = sigma2_for_snr(&clean, snr);
    let b = add_noise(&clean, sigma2, seed).expect("finite variance");
    let crb = compute_crb(&aug.signal, m, sigma2).ok().map(|c| c / s.energy());
    let rec = recover_arm(config, SolverKind::Cork, &b, &s, Some(&spec), seed, "min-phase");
    TrialResult {
        trial,
        seed,
        n,
        m,
        snr_db: Some(snr),
        sigma2,
        b_norm2: b.norm_sqr(),
        point: Some(point),
        lower_bound: None,
        crb,
        records: vec![rec],
    }
}

/// How trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    /// Data-parallel over trials; sequential when built without `parallel`.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

fn map_trials<F>(count: usize, exec: Execution, f: F) -> Vec<TrialResult>
where
    F: Fn(usize) -> TrialResult + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
        _ => (0..count).map(f).collect(),
    }
}

/// Runs every trial of `config`, ordered by trial index.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let count = config.total_trials();
    Ok(match config.kind {
        ExperimentKind::Gap => map_trials(count, exec, |i| run_gap_trial(config, i)),
        ExperimentKind::Recovery => map_trials(count, exec, |i| run_recovery_trial(config, i)),
        ExperimentKind::Crb => map_trials(count, exec, |i| run_crb_trial(config, i)),
    })
}

/// Per-point average of a CRB study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbPoint {
    pub x: f64,
    pub m: usize,
    pub snr_db: f64,
    pub trials: usize,
    pub failures: usize,
    /// Mean normalized squared error.
    pub mse: f64,
    pub crb: f64,
    pub ratio: f64,
}

/// Runs a CRB study and averages it per sweep point.
pub fn run_crb_study(config: &ExperimentConfig, exec: Execution) -> Result<(Vec<TrialResult>, Vec<CrbPoint>)> {
    if config.kind != ExperimentKind::Crb {
        return Err(Error::Config("run_crb_study needs kind = crb".into()));
    }
    let results = run_experiment(config, exec)?;
    let points = crb_points(&results);
    Ok((results, points))
}

fn crb_points(results: &[TrialResult]) -> Vec<CrbPoint> {
    let mut groups: Vec<(f64, Vec<&TrialResult>)> = Vec::new();
    for r in results {
        let x = r.point.unwrap_or(f64::NAN);
        match groups.iter_mut().find(|(gx, _)| gx.to_bits() == x.to_bits()) {
            Some((_, g)) => g.push(r),
            None => groups.push((x, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(x, g)| {
            let errs: Vec<f64> = g
                .iter()
                .filter_map(|t| t.records.first().and_then(|r| r.error))
                .collect();
            let mse = errs.iter().sum::<f64>() / errs.len().max(1) as f64;
            let crb = g[0].crb.unwrap_or(f64::NAN);
            CrbPoint {
                x,
                m: g[0].m,
                snr_db: g[0].snr_db.unwrap_or(f64::NAN),
                trials: g.len(),
                failures: g.len() - errs.len(),
                mse: if errs.is_empty() { f64::NAN } else { mse },
                crb,
                ratio: mse / crb,
            }
        })
        .collect()
}

/// Order statistics of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q10: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q90: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles of the finite entries; `None` if there are none.
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q10: q(0.1),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q90: q(0.9),
            max: v[v.len() - 1],
        })
    }
}

/// One pass/fail threshold evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub trials: usize,
    pub failures: BTreeMap<String, usize>,
    pub series: BTreeMap<String, Quantiles>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub crb_points: Vec<CrbPoint>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn series_values(results: &[TrialResult], key: &str, field: fn(&SolverRecord) -> Option<f64>) -> Vec<f64> {
    results
        .iter()
        .map(|t| t.record(key).and_then(field).unwrap_or(f64::NAN))
        .collect()
}

fn at_most(name: &str, value: Option<f64>, threshold: f64) -> Check {
    Check {
        name: name.into(),
        value,
        threshold,
        pass: value.is_some_and(|v| v <= threshold),
    }
}

fn at_least(name: &str, value: Option<f64>, threshold: f64) -> Check {
    Check {
        name: name.into(),
        value,
        threshold,
        pass: value.is_some_and(|v| v >= threshold),
    }
}

/// Worst value over trials; `None` if any trial lacks it.
fn worst(values: &[f64]) -> Option<f64> {
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    values.iter().copied().reduce(f64::max)
}

/// Aggregates per-trial records into quantiles, CRB curves and threshold checks.
pub fn summarize(config: &ExperimentConfig, results: &[TrialResult]) -> Summary {
    let mut keys: Vec<String> = Vec::new();
    for t in results {
        for r in &t.records {
            if !keys.contains(&r.key()) {
                keys.push(r.key());
            }
        }
    }
    let mut series = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let fields: [(&str, fn(&SolverRecord) -> Option<f64>); 6] = [
        ("fit", |r| r.fit),
        ("gap", |r| r.gap),
        ("rel_gap", |r| r.rel_gap),
        ("error", |r| r.error),
        ("iters", |r| r.iters.map(|v| v as f64)),
        ("wall_time_s", |r| Some(r.wall_time_s)),
    ];
    for key in &keys {
        for (name, f) in fields {
            if let Some(q) = Quantiles::of(&series_values(results, key, f)) {
                series.insert(format!("{key}.{name}"), q);
            }
        }
        let failed = results
            .iter()
            .filter(|t| t.record(key).is_none_or(|r| r.failure.is_some()))
            .count();
        failures.insert(key.clone(), failed);
    }
    if results.iter().any(|t| t.crb.is_some()) {
        let crb: Vec<f64> = results.iter().map(|t| t.crb.unwrap_or(f64::NAN)).collect();
        if let Some(q) = Quantiles::of(&crb) {
            series.insert("crb".into(), q);
        }
    }
    let crb_points = if config.kind == ExperimentKind::Crb {
        crb_points(results)
    } else {
        Vec::new()
    };

    let mut checks = Vec::new();
    let rel = |key: &str| series_values(results, key, |r| r.rel_gap);
    if let Some(t) = config.max_cork_gap {
        checks.push(at_most("cork_gap", worst(&rel("cork")), t));
    }
    if let Some(t) = config.max_sf_gap {
        checks.push(at_most("phaselift_sf_gap", worst(&rel("phaselift-sf")), t));
    }
    if let Some(t) = config.max_sf_rank_ratio {
        checks.push(at_most(
            "phaselift_sf_rank_ratio",
            worst(&series_values(results, "phaselift-sf", |r| r.rank_ratio)),
            t,
        ));
    }
    if let Some(t) = config.min_fienup_worse_rate {
        let c = rel("cork");
        let f = rel("fienup-gs");
        let worse = c.iter().zip(&f).filter(|(c, f)| f >= c).count();
        checks.push(at_least("fienup_gs_worse_rate", Some(worse as f64 / results.len() as f64), t));
    }
    if let Some(t) = config.max_min_phase_error {
        checks.push(at_most(
            "min_phase_error",
            worst(&series_values(results, "cork/min-phase", |r| r.error)),
            t,
        ));
    }
    if let Some(t) = config.min_direct_failure_rate {
        let e = series_values(results, "cork/direct", |r| r.error);
        let failed = e.iter().filter(|v| **v >= DIRECT_FAILURE_ERROR).count();
        checks.push(at_least("direct_failure_rate", Some(failed as f64 / results.len() as f64), t));
    }
    if let Some(t) = config.max_crb_ratio {
        let w = worst(&crb_points.iter().map(|p| p.ratio).collect::<Vec<_>>());
        checks.push(at_most("crb_ratio", w, t));
    }

    let mut notes = vec![format!(
        "N in [{}, {}], {} trials, master seed {}",
        config.n_min,
        config.n_max,
        results.len(),
        config.master_seed
    )];
    if config.solvers.iter().any(|s| s.is_lifted()) {
        notes.push(format!(
            "lifted solvers are limited to N <= {} at this scale",
            SdpOptions::default().max_n
        ));
    }
    if config.kind == ExperimentKind::Crb {
        notes.push("CRB study at desk scale (N <= 128); errors normalized by ||s||^2".into());
    }

    Summary {
        kind: config.kind,
        trials: results.len(),
        failures,
        series,
        crb_points,
        checks,
        notes,
    }
}

/// `x,y,series` rows for plotting.
pub fn curves_csv(config: &ExperimentConfig, results: &[TrialResult]) -> String {
    let mut out = String::from("x,y,series\n");
    let fmt = |v: f64| format!("{v:.16e}");
    match config.kind {
        ExperimentKind::Gap => {
            for t in results {
                for r in &t.records {
                    if let Some(g) = r.gap {
                        out += &format!("{},{},{}\n", t.trial, fmt(g), r.key());
                    }
                }
            }
        }
        ExperimentKind::Recovery => {
            for t in results {
                for r in &t.records {
                    if let Some(e) = r.error {
                        out += &format!("{},{},{}\n", t.trial, fmt(e), r.key());
                    }
                }
            }
        }
        ExperimentKind::Crb => {
            for p in crb_points(results) {
                out += &format!("{},{},mse\n", fmt(p.x), fmt(p.mse));
                out += &format!("{},{},crb\n", fmt(p.x), fmt(p.crb));
            }
        }
    }
    out
}

/// Files written by [`aggregate_and_persist`].
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: Summary,
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
    pub curves_path: PathBuf,
}

pub fn results_jsonl(results: &[TrialResult]) -> Result<String> {
    let mut out = String::new();
    for r in results {
        out += &to_json(r)?;
        out.push('\n');
    }
    Ok(out)
}

/// Writes `results.jsonl`, `summary.json` and `curves.csv` into `dir`.
pub fn aggregate_and_persist(config: &ExperimentConfig, results: &[TrialResult], dir: &Path) -> Result<Report> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no trial results to aggregate".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = summarize(config, results);
    let results_path = dir.join("results.jsonl");
    let summary_path = dir.join("summary.json");
    let curves_path = dir.join("curves.csv");
    write_atomic(&results_path, results_jsonl(results)?.as_bytes())?;
    write_atomic(&summary_path, (to_json(&summary)? + "\n").as_bytes())?;
    write_atomic(&curves_path, curves_csv(config, results).as_bytes())?;
    Ok(Report {
        summary,
        results_path,
        summary_path,
        curves_path,
    })
}

pub fn read_results_jsonl(path: &Path) -> Result<Vec<TrialResult>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                context: path.display().to_string(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}
