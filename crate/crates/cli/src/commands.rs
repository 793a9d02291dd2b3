use std::path::Path;
use std::process::ExitCode;

use phaseret::baselines::{fienup_solve, gs_solve, IterativeOptions};
use phaseret::bench::{aggregate_and_persist, run_experiment, Execution, ExperimentConfig};
use phaseret::cork::{cork_recover, solve_cork, AdmmDiagnostics, AdmmOptions};
use phaseret::factor::{is_min_phase, kolmogorov_sf, root_sf, SfOptions, ROOT_SF_MAX_LEN};
use phaseret::io::{
    read_correlation, read_measurement, read_signal, to_json, write_correlation, write_json,
    write_measurement, write_signal, MeasurementFile,
};
use phaseret::measurement::{add_noise, augment, deaugment, AugmentationSpec, ImpulsePolicy, Side};
use phaseret::sdp::{phaselift_sf, SdpOptions};
use phaseret::fft::next_pow2_above;
use phaseret::signal::{
    correlation_psd_check, default_psd_grid, global_phase_distance, psd_tolerance, signal_fit, MeasurementSet,
};
use phaseret::{ComplexSignal, Error, Result};
use serde::Serialize;

use crate::{BenchArgs, FactorizeArgs, Impulse, MeasureArgs, RecoverArgs, SideArg, SolveArgs, Solver, SolverArgs};

pub fn exit_code(e: &Error) -> ExitCode {
    ExitCode::from(match e {
        Error::Io { .. } => 4,
        Error::Divergence { .. } | Error::NonConvergence(_) | Error::BracketExhausted { .. } => 3,
        _ => 2,
    })
}

const NON_CONVERGED: u8 = 3;
const CHECKS_FAILED: u8 = 1;

pub fn measure(a: MeasureArgs) -> Result<ExitCode> {
    let s = read_signal(&a.input)?;
    if !(a.oversampling > 0.0) || !a.oversampling.is_finite() {
        return Err(Error::InvalidInput(format!("--oversampling {} must be positive", a.oversampling)));
    }
    let m = (a.oversampling * s.len() as f64).round() as usize;
    let side = match a.side {
        SideArg::Prefix => Side::Prefix,
        SideArg::Suffix => Side::Suffix,
    };
    let policy = match a.impulse {
        Impulse::L1 => Some(ImpulsePolicy::L1Margin),
        Impulse::ThreeSigma => Some(ImpulsePolicy::ThreeSigma { sigma: a.sigma }),
        Impulse::None => None,
    };
    let mut warnings = Vec::new();
    let (x, spec) = match policy {
        Some(p) => {
            let spec = AugmentationSpec::for_signal(&s, p, side).with_gap(a.gap);
            let aug = augment(&s, spec)?;
            if !aug.certified {
                warnings.push(format!(
                    "impulse magnitude {:.6e} is below ||s||_1 = {:.6e}; the phase property is not guaranteed",
                    spec.delta.norm(),
                    aug.l1_norm
                ));
            }
            (aug.signal, Some(spec))
        }
        None => (s, None),
    };
    if m < x.len() {
        return Err(Error::InvalidInput(format!(
            "M = {m} is below the measured length {}",
            x.len()
        )));
    }
    let clean = MeasurementSet::from_signal(&x, m)?.with_real_signal(a.real);
    let b = add_noise(&clean, a.noise_sigma2, a.seed)?;
    let mut file = MeasurementFile::new(&b, spec);
    file.warnings = warnings;
    write_measurement(&a.output, &file)?;
    Ok(ExitCode::SUCCESS)
}

fn check_identifiable(b: &MeasurementSet) -> Result<()> {
    if b.m() < 2 * b.n {
        return Err(Error::InvalidInput(format!(
            "M = {} is below 2N = {}: the auto-correlation of an N-sample signal has 2N - 1 real degrees of freedom and is not identifiable",
            b.m(),
            2 * b.n
        )));
    }
    Ok(())
}

fn admm_options(b: &MeasurementSet, o: &SolverArgs) -> AdmmOptions {
    let mut opts = AdmmOptions::for_measurements(b).with_l_factor(b.n, b.m(), o.l_factor);
    opts.real_signal |= o.real;
    if let Some(k) = o.max_iters {
        opts.max_iters = k;
    }
    if let Some(t) = o.tol {
        opts.tol_rel = t;
    }
    opts
}

fn emit<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", to_json(value)?);
            Ok(())
        }
    }
}

pub fn solve(a: SolveArgs) -> Result<ExitCode> {
    let file = read_measurement(&a.input)?;
    let mut b = file.measurement()?;
    b.real_signal |= a.solver.real;
    check_identifiable(&b)?;
    let sol = solve_cork(&b, &admm_options(&b, &a.solver))?;
    write_correlation(&a.output, &sol.r)?;
    emit(a.diagnostics.as_deref(), &sol.diagnostics)?;
    Ok(if sol.diagnostics.converged {
        ExitCode::SUCCESS
    } else {
        eprintln!("warning: ADMM stopped at the iteration cap");
        ExitCode::from(NON_CONVERGED)
    })
}

#[derive(Serialize)]
struct RecoverDiagnostics {
    solver: &'static str,
    mode: &'static str,
    fit: f64,
    iters: usize,
    converged: bool,
    min_phase: Option<bool>,
    max_root_modulus: Option<f64>,
    error: Option<f64>,
    relative_error: Option<f64>,
    admm: Option<AdmmDiagnostics>,
    warnings: Vec<String>,
}

pub fn recover(a: RecoverArgs) -> Result<ExitCode> {
    let file = read_measurement(&a.input)?;
    let mut b = file.measurement()?;
    b.real_signal |= a.opts.real;
    check_identifiable(&b)?;
    let spec = file.spec();
    let mut warnings = file.warnings.clone();
    if spec.is_none() {
        warnings.push(
            "no augmentation metadata: running in direct mode; the estimate is the minimum-phase signal with these intensities and need not equal the measured one".into(),
        );
    }

    let (x, iters, converged, admm, name) = match a.solver {
        Solver::Cork => {
            let (x, sol) = cork_recover(&b, &admm_options(&b, &a.opts))?;
            let d = sol.diagnostics;
            (x, d.iters, d.converged, Some(d), "cork")
        }
        Solver::PhaseliftSf => {
            let (x, rep) = phaselift_sf(&b, &SdpOptions::default())?;
            (x, rep.total_iters, true, None, "phaselift-sf")
        }
        Solver::Fienup | Solver::Gs => {
            let mut o = if a.solver == Solver::Gs {
                IterativeOptions::gs(b.n, a.opts.seed)
            } else {
                IterativeOptions::fienup(b.n, a.opts.seed)
            };
            if let Some(k) = a.opts.max_iters {
                o.max_iters = k;
            }
            if let Some(t) = a.opts.tol {
                o.tol = t;
            }
            if a.solver == Solver::Gs {
                let g = gs_solve(&b, &o)?;
                let it = g.cost_history.len() - 1;
                (g.x, it, g.converged, None, "gs")
            } else {
                let f = fienup_solve(&b, &o)?;
                let it = o.max_iters + f.refine.cost_history.len() - 1;
                (f.x, it, f.refine.converged, None, "fienup")
            }
        }
    };
    let x = if b.real_signal {
        ComplexSignal::new(x.values().iter().map(|v| phaseret::Complex64::new(v.re, 0.0)).collect())?
    } else {
        x
    };
    let fit = signal_fit(&b, &x)?;
    let (min_phase, max_root_modulus) = match is_min_phase(&x, 1e-6) {
        Ok((ok, r)) => (Some(ok), Some(r)),
        Err(_) => (None, None),
    };
    let estimate = match &spec {
        Some(sp) => deaugment(&x, sp)?,
        None => x,
    };
    let (error, relative_error) = match &a.reference {
        Some(p) => {
            let s = read_signal(p)?;
            let d = global_phase_distance(&s, &estimate)?;
            (Some(d), Some(d / s.energy().max(f64::MIN_POSITIVE)))
        }
        None => (None, None),
    };
    write_signal(&a.output, &estimate)?;
    let diag = RecoverDiagnostics {
        solver: name,
        mode: if spec.is_some() { "augmented" } else { "direct" },
        fit,
        iters,
        converged,
        min_phase,
        max_root_modulus,
        error,
        relative_error,
        admm,
        warnings,
    };
    emit(a.diagnostics.as_deref(), &diag)?;
    Ok(if converged {
        ExitCode::SUCCESS
    } else {
        eprintln!("warning: {name} stopped at its iteration cap");
        ExitCode::from(NON_CONVERGED)
    })
}

pub fn factorize(a: FactorizeArgs) -> Result<ExitCode> {
    let r = read_correlation(&a.input)?;
    let x = if a.exact {
        if r.len() > ROOT_SF_MAX_LEN {
            return Err(Error::Size(format!(
                "--exact supports at most {ROOT_SF_MAX_LEN} lags, got {}",
                r.len()
            )));
        }
        root_sf(&r)?
    } else {
        let (min, at) = correlation_psd_check(&r, default_psd_grid(r.len()));
        if min < -psd_tolerance(&r) {
            return Err(Error::InvalidCorrelation(format!(
                "spectrum reaches {min:.3e} at grid index {at}"
            )));
        }
        let l = next_pow2_above(a.l_factor * r.len()).max(2 * r.len());
        kolmogorov_sf(&r, SfOptions::for_len(r.len()).with_l(l))?
    };
    write_signal(&a.output, &x)?;
    Ok(ExitCode::SUCCESS)
}

pub fn bench(a: BenchArgs) -> Result<ExitCode> {
    let mut config = ExperimentConfig::load(&a.input)?;
    if let Some(s) = a.seed {
        config.master_seed = s;
    }
    let dir = a
        .output
        .clone()
        .or_else(|| config.output.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --output or set \"output\"".into()))?;
    let exec = if a.sequential { Execution::Sequential } else { Execution::default() };
    let results = run_experiment(&config, exec)?;
    let report = aggregate_and_persist(&config, &results, &dir)?;
    let failed: Vec<_> = report.summary.checks.iter().filter(|c| !c.pass).collect();
    for c in &report.summary.checks {
        eprintln!(
            "{} {}: value {} threshold {:e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value.map_or("missing".to_string(), |v| format!("{v:e}")),
            c.threshold
        );
    }
    Ok(if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(CHECKS_FAILED)
    })
}
