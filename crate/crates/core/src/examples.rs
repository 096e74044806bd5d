//! Galerkin discretisations of two parabolic model problems and a random
//! problem generator.
//!
//! * Robin: `−u″` on (0,1) with `∂_ν u + β(t)u = 0` at both ends,
//!   `β(t) = b₀ + b₁·t^{α_H}`. The time dependence sits entirely in the two
//!   boundary nodes and is Hölder-`α_H` at `t = 0`.
//! * Schrödinger: `−u″ + μ(t)(1 + x²)u` on (−L, L) with Dirichlet
//!   truncation, `μ(t) = μ₀ + μ₁ sin(νt)`, in the weighted energy space.
//!
//! Both use P1 elements on a uniform mesh. The random generator produces
//! `A(t) = A₀ + φ(t)·B` with rigorous declared constants.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{Descriptors, Evaluator, Modulus, NonautonomousForm};
use crate::gelfand::GelfandTriple;
use crate::linalg::{self, c, CMat, C64};
use crate::quadrature::GaussLegendre;

/// An assembled problem plus what the builder learned along the way.
#[derive(Debug, Clone)]
pub struct Built {
    pub form: NonautonomousForm,
    /// H-shift `ω_s` after which the form is coercive with constant ≥ 1/2;
    /// `None` when the raw form is already coercive.
    pub required_shift: Option<f64>,
    /// Constant `c` in `∫ m₁|u|² ≤ c‖u‖²_{H^s}` (Schrödinger only).
    pub lower_order_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobinProblem {
    pub n_elems: usize,
    pub beta_base: f64,
    pub beta_amp: f64,
    pub holder: f64,
    pub horizon: f64,
    /// Trace regularity index; `γ = r₀ + 1/2`. Defaults to
    /// `min(0.4, α_H − 1/4)`.
    #[serde(default)]
    pub r0: Option<f64>,
}

impl Default for RobinProblem {
    fn default() -> Self {
        Self {
            n_elems: 64,
            beta_base: 1.0,
            beta_amp: 1.0,
            holder: 0.75,
            horizon: 1.0,
            r0: None,
        }
    }
}

impl RobinProblem {
    pub fn beta(&self, t: f64) -> f64 {
        self.beta_base + self.beta_amp * t.powf(self.holder)
    }

    pub fn gamma(&self) -> f64 {
        self.r0.unwrap_or_else(|| (self.holder - 0.25).min(0.4)) + 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerProblem {
    pub n_elems: usize,
    pub half_width: f64,
    /// `μ(t) = mu_base + mu_amp·sin(mu_freq·t)`.
    pub mu_base: f64,
    pub mu_amp: f64,
    pub mu_freq: f64,
    pub horizon: f64,
    pub sobolev_index: f64,
}

impl Default for SchrodingerProblem {
    fn default() -> Self {
        Self {
            n_elems: 32,
            half_width: 1.0,
            mu_base: 1.0,
            mu_amp: 0.5,
            mu_freq: 1.0,
            horizon: 1.0,
            sobolev_index: 0.5,
        }
    }
}

impl SchrodingerProblem {
    pub fn mu(&self, t: f64) -> f64 {
        self.mu_base + self.mu_amp * (self.mu_freq * t).sin()
    }

    /// `(α₁, α₂)` with `α₁ ≤ μ(t) ≤ α₂`.
    pub fn mu_bounds(&self) -> (f64, f64) {
        (self.mu_base - self.mu_amp.abs(), self.mu_base + self.mu_amp.abs())
    }

    /// Lipschitz constant κ of μ.
    pub fn kappa(&self) -> f64 {
        self.mu_amp.abs() * self.mu_freq.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothness {
    /// `φ(t) = sin(2πt)`.
    Lipschitz,
    /// `φ(t) = t^alpha`.
    Holder { alpha: f64 },
}

/// Element matrices of P1 on a uniform mesh of `[x0, x1]` with `n` cells:
/// stiffness, mass and the mass weighted by `weight`, over all `n + 1` nodes.
pub fn p1_matrices(
    x0: f64,
    x1: f64,
    n: usize,
    weight: impl Fn(f64) -> f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let h = (x1 - x0) / n as f64;
    let mut k = DMatrix::zeros(n + 1, n + 1);
    let mut m = DMatrix::zeros(n + 1, n + 1);
    let mut w = DMatrix::zeros(n + 1, n + 1);
    let rule = GaussLegendre::new(3);
    for e in 0..n {
        let (a, b) = (x0 + h * e as f64, x0 + h * (e + 1) as f64);
        let idx = [e, e + 1];
        for (p, &i) in idx.iter().enumerate() {
            for (q, &j) in idx.iter().enumerate() {
                let same = p == q;
                k[(i, j)] += if same { 1.0 / h } else { -1.0 / h };
                m[(i, j)] += if same { h / 3.0 } else { h / 6.0 };
                let shape = |x: f64, r: usize| if r == 0 { (b - x) / h } else { (x - a) / h };
                w[(i, j)] += rule.integrate(a, b, |x| weight(x) * shape(x, p) * shape(x, q));
            }
        }
    }
    (k, m, w)
}

fn complexify(a: &DMatrix<f64>) -> CMat {
    a.map(c)
}

fn check_elems(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::OutOfRange {
            name: "n_elems",
            value: n as f64,
            range: "[2, inf)".into(),
        });
    }
    Ok(())
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: v,
            range: "(0, inf)".into(),
        })
    }
}

/// Smallest shift `ω` with `A + ωM ⪰ K/2` for every matrix in `mats`.
fn half_coercive_shift(triple: &GelfandTriple, mats: &[CMat]) -> f64 {
    mats.iter()
        .map(|a| {
            let x = linalg::hermitian_part(&(a - triple.vgram() * c(0.5)));
            -linalg::min_hermitian_eigenvalue(&triple.form_in_eigenbasis(&x))
        })
        .fold(0.0, f64::max)
}

/// Declared α and M for an affine family: exact over the extreme members.
fn affine_constants(triple: &GelfandTriple, extremes: &[CMat]) -> Result<(f64, f64)> {
    let alpha = extremes
        .iter()
        .map(|a| triple.min_rayleigh_v(a))
        .fold(f64::INFINITY, f64::min);
    let mut bound: f64 = 0.0;
    for a in extremes {
        bound = bound.max(triple.form_norm(a, 1.0, 1.0)?);
    }
    Ok((alpha, bound))
}

pub fn build_robin(p: &RobinProblem) -> Result<Built> {
    check_elems(p.n_elems)?;
    check_positive("horizon", p.horizon)?;
    if !(p.holder > 0.25 && p.holder <= 1.0) {
        return Err(Error::OutOfRange {
            name: "holder",
            value: p.holder,
            range: "(1/4, 1]".into(),
        });
    }
    if !(p.beta_base.is_finite() && p.beta_amp.is_finite()) {
        return Err(Error::NonFinite("beta is not bounded below"));
    }
    let gamma = p.gamma();
    let r0 = gamma - 0.5;
    if !(r0 > 0.0 && r0 < 0.5 && gamma < 2.0 * p.holder) {
        return Err(Error::OutOfRange {
            name: "r0",
            value: r0,
            range: format!("(0, 1/2) with r0 + 1/2 < {}", 2.0 * p.holder),
        });
    }

    let n = p.n_elems;
    let (k, m, _) = p1_matrices(0.0, 1.0, n, |_| 1.0);
    let stiffness = complexify(&k);
    let mass = complexify(&m);
    let triple = Arc::new(GelfandTriple::new(mass.clone(), &stiffness + &mass)?);
    let mut boundary = CMat::zeros(n + 1, n + 1);
    boundary[(0, 0)] = c(1.0);
    boundary[(n, n)] = c(1.0);

    // β is monotone in t, so its range is spanned by the endpoint values.
    let betas = [p.beta(0.0), p.beta(p.horizon)];
    let extremes: Vec<CMat> = betas.iter().map(|b| &stiffness + &boundary * c(*b)).collect();
    let (alpha, bound) = affine_constants(&triple, &extremes)?;
    let scale = p.beta_amp.abs() * triple.form_norm(&boundary, gamma, gamma)?;
    let descriptors = Descriptors {
        bound,
        coercivity: alpha,
        quasi_shift: 0.0,
        modulus: Modulus::Power {
            scale,
            exponent: p.holder,
        },
        gamma,
    };
    let required_shift = (alpha <= 0.0).then(|| half_coercive_shift(&triple, &extremes));

    let params = p.clone();
    let evaluator: Evaluator = Arc::new(move |t| &stiffness + &boundary * c(params.beta(t)));
    Ok(Built {
        form: NonautonomousForm::new(triple, p.horizon, evaluator, descriptors)?,
        required_shift,
        lower_order_constant: None,
    })
}

pub fn build_schrodinger(p: &SchrodingerProblem) -> Result<Built> {
    check_elems(p.n_elems)?;
    check_positive("half_width", p.half_width)?;
    check_positive("horizon", p.horizon)?;
    if !(p.mu_base.is_finite() && p.mu_amp.is_finite() && p.mu_freq.is_finite()) {
        return Err(Error::NonFinite("modulation parameters"));
    }
    let gamma = p.sobolev_index;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::OutOfRange {
            name: "sobolev_index",
            value: gamma,
            range: "(0, 1)".into(),
        });
    }
    let (alpha1, alpha2) = p.mu_bounds();
    if !(alpha1 > 0.0) {
        return Err(Error::OutOfRange {
            name: "mu lower bound",
            value: alpha1,
            range: "(0, inf)".into(),
        });
    }

    let n = p.n_elems;
    let l = p.half_width;
    let (k, m, w) = p1_matrices(-l, l, n, |x| 1.0 + x * x);
    let interior = |a: &DMatrix<f64>| complexify(&a.view((1, 1), (n - 1, n - 1)).into_owned());
    let (stiffness, mass, weighted) = (interior(&k), interior(&m), interior(&w));
    let triple = Arc::new(GelfandTriple::new(mass, &stiffness + &weighted)?);

    let extremes: Vec<CMat> = [alpha1, alpha2]
        .iter()
        .map(|mu| &stiffness + &weighted * c(*mu))
        .collect();
    let (alpha, bound) = affine_constants(&triple, &extremes)?;
    let descriptors = Descriptors {
        bound,
        coercivity: alpha,
        quasi_shift: 0.0,
        modulus: Modulus::Power {
            scale: p.kappa() * triple.form_norm(&weighted, gamma, gamma)?,
            exponent: 1.0,
        },
        gamma,
    };

    let params = p.clone();
    let evaluator: Evaluator = Arc::new(move |t| &stiffness + &weighted * c(params.mu(t)));
    Ok(Built {
        form: NonautonomousForm::new(triple, p.horizon, evaluator, descriptors)?,
        required_shift: None,
        // m₁ = κ m₀ ≤ κ(1 + L²) on the truncated domain and ‖u‖_{L²} ≤ ‖u‖_{H^s}.
        lower_order_constant: Some(p.kappa() * (1.0 + l * l)),
    })
}

/// Reproducible random problem on [0, 1]: HPD Grams, a nonsymmetric
/// coercive `A₀` and a nonsymmetric perturbation `φ(t)·B`. `A₀ − K` and
/// `φ·B` each have V-form norm 0.3, so α = 0.4 and M = 1.6 are rigorous.
pub fn random_problem(n: usize, seed: u64, smoothness: Smoothness) -> Result<Built> {
    if n < 2 {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            range: "[2, inf)".into(),
        });
    }
    let (exponent, gamma, lipschitz) = match smoothness {
        Smoothness::Lipschitz => (1.0, 0.5, 2.0 * std::f64::consts::PI),
        Smoothness::Holder { alpha } => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::OutOfRange {
                    name: "alpha",
                    value: alpha,
                    range: "(0, 1]".into(),
                });
            }
            (alpha, if alpha < 1.0 { alpha } else { 0.5 }, 1.0)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entry = move || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let mut rand_mat = || CMat::from_fn(n, n, |_, _| entry());
    let mut hpd = |shift: f64| {
        let x = rand_mat();
        linalg::hermitian_part(&(&x * x.adjoint())) + linalg::identity(n) * c(shift)
    };
    let mass = hpd(0.5);
    let vgram = hpd(0.5) * c(4.0);
    let s_raw = rand_mat();
    let b_raw = rand_mat();

    let triple = Arc::new(GelfandTriple::new(mass, vgram)?);
    let s = &s_raw * c(0.3 / triple.form_norm(&s_raw, 1.0, 1.0)?);
    let b = &b_raw * c(0.3 / triple.form_norm(&b_raw, 1.0, 1.0)?);
    let a0 = triple.vgram() + &s;
    let descriptors = Descriptors {
        bound: 1.6,
        coercivity: 0.4,
        quasi_shift: 0.0,
        modulus: Modulus::Power {
            scale: lipschitz * triple.form_norm(&b, gamma, gamma)?,
            exponent,
        },
        gamma,
    };
    let phi = move |t: f64| match smoothness {
        Smoothness::Lipschitz => (2.0 * std::f64::consts::PI * t).sin(),
        Smoothness::Holder { alpha } => t.powf(alpha),
    };
    let evaluator: Evaluator = Arc::new(move |t| &a0 + &b * c(phi(t)));
    Ok(Built {
        form: NonautonomousForm::new(triple, 1.0, evaluator, descriptors)?,
        required_shift: None,
        lower_order_constant: None,
    })
}

/// Small nonsymmetric, strongly time-dependent form used as the default test
/// subject.
pub fn stock_form() -> NonautonomousForm {
    random_problem(4, 7, Smoothness::Lipschitz)
        .expect("stock parameters are valid")
        .form
}
