//! Seeded random instance generators used by the verification campaigns.
//!
//! Draws are stratified toward the boundary of the parameter cube
//! (parameters near 0, near 1, near 1/2, and uniform) to probe the regimes
//! where margins degenerate. Each instance derives its generator from
//! `(seed, index)` so campaigns are order-independent and reproducible.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::{BernoulliSystem, Pmf};

/// Generator for instance `idx` of a campaign with master `seed`.
pub fn rng_for(seed: u64, idx: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ idx.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// One probability, stratified: near 0, near 1, near 1/2, or uniform.
pub fn stratified_prob<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..4u8) {
        0 => rng.random_range(0.0..0.02),
        1 => 1.0 - rng.random_range(0.0..0.02),
        2 => 0.5 + rng.random_range(-0.02..0.02),
        _ => rng.random_range(0.0..=1.0),
    }
}

/// A stratified parameter vector for an `m`-factor Bernoulli sum.
pub fn random_params<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    (0..m).map(|_| stratified_prob(rng)).collect()
}

/// A random monotone system: each parameter line runs from the smaller to
/// the larger of two stratified draws.
pub fn random_monotone_system<R: Rng>(n: usize, rng: &mut R) -> BernoulliSystem {
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for _ in 0..n {
        let a = stratified_prob(rng);
        let b = stratified_prob(rng);
        lo.push(a.min(b));
        hi.push(a.max(b));
    }
    BernoulliSystem::new(lo, hi).expect("draws are probabilities")
}

/// A random strictly positive log-concave mass function on `{0,…,n}`,
/// built from a concave log-mass sequence (decreasing increments).
pub fn random_log_concave_pmf<R: Rng>(n: usize, rng: &mut R) -> Pmf {
    let mut slopes: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    slopes.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut log_mass = vec![0.0f64];
    for s in &slopes {
        log_mass.push(log_mass.last().unwrap() + s);
    }
    let peak = log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut masses: Vec<f64> = log_mass.iter().map(|&l| (l - peak).exp()).collect();
    let total: f64 = masses.iter().sum();
    for m in &mut masses {
        *m /= total;
    }
    Pmf::new(masses).expect("normalized positive masses")
}
