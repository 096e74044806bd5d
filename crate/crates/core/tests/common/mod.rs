//! Oracles and problem sets shared by the integration tests. The oracles
//! deliberately avoid the propagator and the eigen-based norms.

#![allow(dead_code)]

use evofam::examples::{build_robin, build_schrodinger, random_problem, stock_form, RobinProblem, SchrodingerProblem, Smoothness};
use evofam::linalg::{self, c, CMat, CVec, C64};
use evofam::NonautonomousForm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

/// The Robin problem of the acceptance suite.
pub fn robin64() -> NonautonomousForm {
    build_robin(&RobinProblem {
        n_elems: 64,
        beta_base: 1.0,
        beta_amp: 1.0,
        holder: 0.75,
        horizon: 1.0,
        r0: None,
    })
    .unwrap()
    .form
}

pub fn schrodinger32() -> NonautonomousForm {
    build_schrodinger(&SchrodingerProblem::default()).unwrap().form
}

/// Named stock problems: both applications and the small random stock form.
pub fn stock_problems() -> Vec<(&'static str, NonautonomousForm)> {
    vec![
        ("robin", robin64()),
        ("schrodinger", schrodinger32()),
        ("stock", stock_form()),
    ]
}

/// Twenty random nonsymmetric problems, n = 2..=10, alternating smoothness.
pub fn random_problems() -> Vec<NonautonomousForm> {
    (0..20u64)
        .map(|k| {
            let smooth = if k % 2 == 0 {
                Smoothness::Lipschitz
            } else {
                Smoothness::Holder { alpha: 0.6 }
            };
            random_problem(2 + (k as usize % 9), 100 + k, smooth).unwrap().form
        })
        .collect()
}

pub fn random_pairs(rng: &mut ChaCha8Rng, horizon: f64, count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|_| {
            let (a, b) = (horizon * rng.random::<f64>(), horizon * rng.random::<f64>());
            (a.max(b), a.min(b))
        })
        .collect()
}

#[allow(clippy::needless_range_loop)]
/// Two-stage Gauss collocation step for `M u′ = −A(t) u` applied to the
/// columns of `u`.
fn gauss_step(form: &NonautonomousForm, u: &CMat, t: f64, h: f64) -> CMat {
    let n = form.dim();
    let r3 = 3f64.sqrt() / 6.0;
    let nodes = [0.5 - r3, 0.5 + r3];
    let a = [[0.25, 0.25 - r3], [0.25 + r3, 0.25]];
    let mass = form.triple().mass();
    let ai: Vec<CMat> = nodes.iter().map(|cn| form.matrix_at(t + cn * h).unwrap()).collect();
    let mut big = CMat::zeros(2 * n, 2 * n);
    let mut rhs = CMat::zeros(2 * n, u.ncols());
    for i in 0..2 {
        for j in 0..2 {
            let mut block = &ai[i] * c(h * a[i][j]);
            if i == j {
                block += mass;
            }
            big.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
        rhs.view_mut((i * n, 0), (n, u.ncols())).copy_from(&(-linalg::matmul(&ai[i], u)));
    }
    let k = linalg::solve(&big, &rhs).unwrap();
    let k1 = k.view((0, 0), (n, u.ncols()));
    let k2 = k.view((n, 0), (n, u.ncols()));
    u + (k1 + k2) * c(0.5 * h)
}

/// `U(t, s)` of the continuous-in-time Galerkin system by adaptive Gauss
/// collocation (order 4) with step-doubling error control. The accepted
/// value is the two-half-step result; no extrapolation.
pub fn ode_propagator(form: &NonautonomousForm, t: f64, s: f64, tol: f64) -> CMat {
    let n = form.dim();
    let mut u = linalg::identity(n);
    let mut x = s;
    let mut h = ((t - s) * 1e-4).max(1e-12);
    let span = t - s;
    while x < t {
        let hh = h.min(t - x);
        let one = gauss_step(form, &u, x, hh);
        let half = gauss_step(form, &u, x, 0.5 * hh);
        let two = gauss_step(form, &half, x + 0.5 * hh, 0.5 * hh);
        let err = (&two - &one).norm() / 15.0;
        let allowed = tol * hh / span;
        if err <= allowed || hh < 1e-14 {
            u = two;
            x += hh;
        }
        let factor = if err == 0.0 { 2.0 } else { 0.9 * (allowed / err).powf(0.2) };
        h = hh * factor.clamp(0.2, 2.0);
    }
    u
}

/// Extremum of a scale-invariant objective over nonzero complex vectors:
/// random starts, then a stochastic hill climb with shrinking steps.
pub fn mc_extremum(rng: &mut ChaCha8Rng, dim: usize, samples: usize, maximize: bool, objective: impl Fn(&CVec) -> f64) -> f64 {
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
    let mut step = 0.3;
    for k in 0..samples - starts {
        let scale = best_x.norm();
        let x = &best_x + rand_vec(rng, dim) * c(step * scale);
        let v = objective(&x);
        if better(v, best) {
            best = v;
            best_x = x;
        }
        if (k + 1) % 200 == 0 {
            step *= 0.6;
        }
    }
    best
}

/// `‖u‖_H` and `‖u‖_V` straight from the Gram matrices.
pub fn gram_norm(g: &CMat, u: &CVec) -> f64 {
    (u.adjoint() * g * u)[(0, 0)].re.max(0.0).sqrt()
}
