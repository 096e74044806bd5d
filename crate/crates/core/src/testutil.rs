//! Test-only oracles and generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{hermitian_part, identity, CMat, CVec, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

pub fn rand_hpd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> CMat {
    let x = rand_mat(rng, n);
    hermitian_part(&(&x * x.adjoint())) + identity(n) * C64::new(shift, 0.0)
}

/// Monte-Carlo extremum of a scale-invariant objective over nonzero vectors:
/// `samples` evaluations split between random starts and a stochastic
/// hill climb with shrinking step from the best start.
pub fn mc_extremum(
    rng: &mut ChaCha8Rng,
    dim: usize,
    samples: usize,
    maximize: bool,
    objective: impl Fn(&CVec) -> f64,
) -> f64 {
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let starts = samples / 10;
    let mut best_x = rand_vec(rng, dim);
    let mut best = objective(&best_x);
    for _ in 1..starts {
        let x = rand_vec(rng, dim);
        let v = objective(&x);
        if better(v, best) {
            best = v;
            best_x = x;
        }
    }
    let mut step = 0.5;
    for k in 0..samples - starts {
        let scale = best_x.norm();
        let trial = &best_x + rand_vec(rng, dim) * C64::new(step * scale, 0.0);
        let v = objective(&trial);
        if better(v, best) {
            best = v;
            best_x = trial;
        }
        if k % 200 == 199 {
            step *= 0.6;
        }
    }
    best
}
