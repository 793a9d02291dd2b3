use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phaseret::baselines::{fienup_solve, fienup_sf, gs_solve, IterativeOptions};
use phaseret::bench::{
    aggregate_and_persist, compute_crb, run_crb_study, run_experiment, Execution, ExperimentConfig, Quantiles,
};
use phaseret::cork::{solve_cork, AdmmOptions};
use phaseret::factor::{is_min_phase, kolmogorov_sf, root_sf, SfOptions};
use phaseret::fft;
use phaseret::measurement::{augment_min_phase, AugmentationSpec, ImpulsePolicy, Side};
use phaseret::sampling::{random_signal, rel_linf};
use phaseret::signal::{autocorrelation, correlation_to_intensity, global_phase_distance, intensity_measure, signal_fit};
use phaseret::{ComplexSignal, MeasurementSet};

struct Outcome {
    pass: bool,
    detail: String,
}

fn uniform_b(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MeasurementSet {
    MeasurementSet::new((0..m).map(|_| rng.random::<f64>()).collect(), n).unwrap()
}

fn random_min_phase(rng: &mut ChaCha8Rng, n: usize) -> ComplexSignal {
    let s = random_signal(rng, n - 1);
    let spec = AugmentationSpec::for_signal(&s, ImpulsePolicy::ThreeSigma { sigma: 1.0 }, Side::Prefix);
    augment_min_phase(&s, spec).unwrap().signal
}

fn normalized_distance(a: &ComplexSignal, b: &ComplexSignal) -> f64 {
    (global_phase_distance(a, b).unwrap() / a.energy()).sqrt()
}

fn identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=256);
        let x = random_signal(&mut rng, n);
        let r = autocorrelation(&x);
        for f in [2, 4, 8] {
            let m = f * n;
            let lhs = intensity_measure(&x, m).unwrap();
            let rhs = correlation_to_intensity(&r, m);
            worst = worst.max(rel_linf(&lhs, &rhs));
            cases += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("worst relative l-inf {worst:.2e} over {cases} cases"),
    }
}

fn factorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_k = 0.0f64;
    let mut worst_root = 0.0f64;
    let mut roots = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=128);
        let x = random_min_phase(&mut rng, n);
        let r = autocorrelation(&x);
        let xk = kolmogorov_sf(&r, SfOptions::for_len(n)).unwrap();
        worst_k = worst_k.max(normalized_distance(&x, &xk));
        if n <= 32 {
            let xr = root_sf(&r).unwrap();
            worst_root = worst_root.max(normalized_distance(&x, &xr));
            roots += 1;
        }
    }
    Outcome {
        pass: worst_k <= 1e-6 && worst_root <= 1e-6,
        detail: format!(
            "kolmogorov worst {worst_k:.2e} over 200 signals, root worst {worst_root:.2e} over {roots}"
        ),
    }
}

fn hidden_convexity() -> Outcome {
    let config = ExperimentConfig::from_json(
        r#"{"kind":"gap","n_min":32,"n_max":32,"m_rule":"uniform","trials":50,
            "solvers":["phaselift","phaselift-sf","cork"],"master_seed":3,
            "sdp_rank_tol":1e-4,"sdp_fit_slack":1e-3}"#,
    )
    .unwrap();
    let results = run_experiment(&config, Execution::default()).unwrap();
    let mut bad = 0;
    let mut worst_cork = f64::NEG_INFINITY;
    let mut worst_sf = f64::NEG_INFINITY;
    let mut worst_ratio = 0.0f64;
    for t in &results {
        let (Some(lb), Some(cork), Some(sf)) = (t.lower_bound, t.record("cork"), t.record("phaselift-sf")) else {
            bad += 1;
            continue;
        };
        let slack = 1e-3 * t.b_norm2;
        let cork_fits = [cork.fit, cork.signal_fit];
        let mut ok = sf.failure.is_none() && cork.failure.is_none();
        for f in cork_fits.iter().flatten() {
            worst_cork = worst_cork.max((f - lb) / t.b_norm2);
            ok &= *f <= lb + slack;
        }
        match (sf.fit, sf.rank_ratio) {
            (Some(f), Some(ratio)) => {
                worst_sf = worst_sf.max((f - lb) / t.b_norm2);
                worst_ratio = worst_ratio.max(ratio);
                ok &= f <= lb + slack && ratio <= 1e-4;
            }
            _ => ok = false,
        }
        if !ok {
            bad += 1;
        }
    }
    Outcome {
        pass: bad == 0 && results.len() == 50,
        detail: format!(
            "{bad} of {} trials out of bounds; worst cork gap {worst_cork:.2e}, worst sf gap {worst_sf:.2e}, worst ratio {worst_ratio:.2e} (relative to ||b||^2)",
            results.len()
        ),
    }
}

fn perfect_recovery() -> Outcome {
    let config = ExperimentConfig::from_json(
        r#"{"kind":"recovery","n_min":8,"n_max":128,"m_rule":"multiplier","m_factor":4,
            "trials":100,"solvers":["cork"],"master_seed":4,"impulse":"three-sigma"}"#,
    )
    .unwrap();
    let results = run_experiment(&config, Execution::default()).unwrap();
    let mut minp_worst = 0.0f64;
    let mut minp_bad = 0;
    let mut direct_fail = 0;
    let mut direct_fit_bad = 0;
    let mut worst_fit = 0.0f64;
    for t in &results {
        match t.record("cork/min-phase").and_then(|r| r.error) {
            Some(e) => {
                minp_worst = minp_worst.max(e);
                if e > 1e-6 {
                    minp_bad += 1;
                }
            }
            None => minp_bad += 1,
        }
        let d = t.record("cork/direct");
        if d.and_then(|r| r.error).is_some_and(|e| e >= 0.1) {
            direct_fail += 1;
        }
        let fit = d.and_then(|r| r.rel_signal_fit).unwrap_or(f64::INFINITY);
        worst_fit = worst_fit.max(fit);
        if fit > 1e-6 {
            direct_fit_bad += 1;
        }
    }
    let rate = direct_fail as f64 / results.len() as f64;
    Outcome {
        pass: minp_bad == 0 && rate >= 0.95 && direct_fit_bad == 0,
        detail: format!(
            "min-phase worst error {minp_worst:.2e} ({minp_bad} above 1e-6); direct failure rate {rate:.2}; {direct_fit_bad} direct fits above 1e-6 ||b||^2 (worst {worst_fit:.1e})"
        ),
    }
}

fn crb_efficiency() -> Outcome {
    let config = ExperimentConfig::from_json(
        r#"{"kind":"crb","n_min":64,"n_max":64,"m_factor":8,"sweep":"snr","snr_db":[50],
            "trials":100,"master_seed":5,"impulse":"three-sigma"}"#,
    )
    .unwrap();
    let (_, points) = run_crb_study(&config, Execution::default()).unwrap();
    let p = &points[0];

    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let s = random_signal(&mut rng, 64);
    let spec = AugmentationSpec::for_signal(&s, ImpulsePolicy::ThreeSigma { sigma: 1.0 }, Side::Prefix);
    let x = augment_min_phase(&s, spec).unwrap().signal;
    let c1 = compute_crb(&x, 512, 1e-3).unwrap();
    let c2 = compute_crb(&x, 512, 7e-3).unwrap();
    let lin = (c2 / c1 - 7.0).abs() / 7.0;
    Outcome {
        pass: p.failures == 0 && p.ratio <= 2.0 && lin <= 1e-12,
        detail: format!(
            "mse {:.3e}, crb {:.3e}, ratio {:.3} with {} failures; sigma^2 linearity deviation {lin:.1e}",
            p.mse, p.crb, p.ratio, p.failures
        ),
    }
}

fn admm_convergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 128;
    let mut iters = Vec::new();
    let mut worst_min = f64::INFINITY;
    let mut unconverged = 0;
    for _ in 0..100 {
        let m = rng.random_range(2 * n..=8 * n);
        let b = uniform_b(&mut rng, n, m);
        let opts = AdmmOptions {
            tol_rel: 1e-4,
            tol_abs: 0.0,
            ..AdmmOptions::for_measurements(&b)
        };
        let sol = solve_cork(&b, &opts).unwrap();
        iters.push(sol.diagnostics.iters as f64);
        if !sol.diagnostics.converged {
            unconverged += 1;
        }
        let spec = fft::weighted_spectrum(sol.r.values(), opts.l);
        worst_min = worst_min.min(spec.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let q = Quantiles::of(&iters).unwrap();
    Outcome {
        pass: q.median <= 200.0 && worst_min >= -1e-8,
        detail: format!(
            "median iterations {:.0} (q90 {:.0}, max {:.0}, {unconverged} unconverged); worst min of A r {worst_min:.2e}",
            q.median, q.q90, q.max
        ),
    }
}

fn baseline_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut gs_bad = 0;
    let mut sf_bad = 0;
    let mut worst_rel = 0.0f64;
    let mut worst_root = 0.0f64;
    for i in 0..40 {
        let n = rng.random_range(4..=32);
        let m = rng.random_range(2 * n..=8 * n);
        let b = if i % 2 == 0 {
            uniform_b(&mut rng, n, m)
        } else {
            MeasurementSet::from_signal(&random_min_phase(&mut rng, n), m).unwrap()
        };
        let seed = rng.random::<u64>();
        let gs = gs_solve(&b, &IterativeOptions::gs(n, seed)).unwrap();
        if gs.cost_history.windows(2).any(|w| w[1] > w[0]) {
            gs_bad += 1;
        }
        if i % 2 == 0 {
            let opts = IterativeOptions::fienup(n, seed);
            let plain = signal_fit(&b, &fienup_solve(&b, &opts).unwrap().x).unwrap();
            let x = fienup_sf(&b, &opts).unwrap();
            let fit = signal_fit(&b, &x).unwrap();
            let rel = (fit - plain).abs() / plain;
            let (minp, root) = is_min_phase(&x, 1e-6).unwrap();
            worst_rel = worst_rel.max(rel);
            worst_root = worst_root.max(root);
            if rel > 1e-8 || !minp {
                sf_bad += 1;
            }
        }
    }
    Outcome {
        pass: gs_bad == 0 && sf_bad == 0,
        detail: format!(
            "{gs_bad} of 40 GS histories increase; {sf_bad} of 20 Fienup-SF outputs off (worst fit deviation {worst_rel:.1e}, largest zero modulus {worst_root:.6})"
        ),
    }
}

fn mask_timing(text: &str) -> String {
    let key = "\"wall_time_s\":";
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(key) {
        out.push_str(&rest[..pos + key.len()]);
        rest = &rest[pos + key.len()..];
        let end = rest.find([',', '}']).unwrap_or(rest.len());
        out.push('_');
        rest = &rest[end..];
    }
    out.push_str(rest);
    out
}

fn determinism() -> Outcome {
    let configs = [
        r#"{"kind":"gap","n_min":4,"n_max":12,"m_rule":"uniform","trials":8,
            "solvers":["phaselift","phaselift-sf","cork","fienup-gs","fienup-sf","gs"],
            "master_seed":8,"fienup_iters":200}"#,
        r#"{"kind":"recovery","n_min":4,"n_max":24,"trials":8,"snr_db":[20,40],
            "solvers":["cork","fienup-sf"],"master_seed":9,"fienup_iters":200}"#,
        r#"{"kind":"crb","n_min":8,"n_max":8,"sweep":"m","m_factors":[4,8],"snr_db":[30],
            "trials":4,"master_seed":10}"#,
    ];
    let mut mismatched = 0;
    let mut bytes = 0;
    for text in configs {
        let config = ExperimentConfig::from_json(text).unwrap();
        let mut files = Vec::new();
        for exec in [Execution::Sequential, Execution::default(), Execution::Sequential] {
            let dir = tempfile::tempdir().unwrap();
            let results = run_experiment(&config, exec).unwrap();
            let report = aggregate_and_persist(&config, &results, dir.path()).unwrap();
            files.push(mask_timing(&std::fs::read_to_string(report.results_path).unwrap()));
        }
        bytes += files[0].len();
        if files.iter().any(|f| *f != files[0]) {
            mismatched += 1;
        }
    }
    Outcome {
        pass: mismatched == 0,
        detail: format!("{mismatched} of 3 configurations differ across 3 runs ({bytes} bytes compared per run)"),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, f64, fn() -> Outcome); 8] = [
        ("intensity and correlation identity", 10.0, identity),
        ("spectral factorization round trip", 30.0, factorization),
        ("hidden convexity at N = 32", 600.0, hidden_convexity),
        ("perfect recovery through augmentation", 120.0, perfect_recovery),
        ("CRB efficiency at 50 dB", 300.0, crb_efficiency),
        ("ADMM convergence and feasibility", 120.0, admm_convergence),
        ("baseline contracts", 300.0, baseline_contract),
        ("bench determinism", 300.0, determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{}: {label}: {} [{secs:.1} s of {budget:.0} s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
