//! Seeded random draws shared by tests, benchmarks and the experiment harness.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::signal::ComplexSignal;

/// i.i.d. circular complex Gaussian entries with unit variance, `CN(0, 1)`.
pub fn random_signal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexSignal {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let v = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    ComplexSignal::new(v).expect("n must be positive")
}

/// i.i.d. real standard normal entries.
pub fn random_real_signal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexSignal {
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    ComplexSignal::from_real(&v).expect("n must be positive")
}

/// Mixes a master seed and a trial index into an independent per-trial seed
/// (SplitMix64 finalizer).
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `max_i |a_i - b_i| / max_i |b_i|` (plain difference when `b` is all zero).
pub fn rel_linf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Relative l2 distance between complex vectors.
pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}
