//! Time-dependent sesquilinear forms `a(t; u, v) = vᴴ·A(t)·u` on a Gelfand
//! triple, and the checks that certify their standing assumptions:
//! uniform boundedness and coercivity, Hölder/Dini continuity in the
//! interpolation norms, and the discrete square-root property.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::gelfand::GelfandTriple;
use crate::linalg::{self, c, CMat};
use crate::par;
use crate::quadrature;

pub type Evaluator = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// Continuity modulus ω of `t ↦ a(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulus {
    /// `ω(t) = scale · t^exponent`.
    Power { scale: f64, exponent: f64 },
    /// Linear interpolation through `(times[i], values[i])`, with `ω(0) = 0`
    /// when the table starts after zero and constant extension past the end.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl Modulus {
    pub fn zero() -> Self {
        Modulus::Power {
            scale: 0.0,
            exponent: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Modulus::Power { scale, exponent } => {
                check_range("modulus scale", *scale, 0.0, f64::MAX)?;
                check_range("modulus exponent", *exponent, f64::MIN_POSITIVE, f64::MAX)
            }
            Modulus::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::Invalid(
                        "modulus table needs matching, nonempty times and values".into(),
                    ));
                }
                if times[0] < 0.0 || times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Invalid(
                        "modulus table times must be nonnegative and strictly increasing".into(),
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Invalid("modulus values must be finite and >= 0".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Modulus::Power { scale, exponent } => {
                if *scale == 0.0 {
                    0.0
                } else {
                    scale * t.powf(*exponent)
                }
            }
            Modulus::Table { times, values } => {
                let (t0, v0) = if times[0] > 0.0 {
                    (0.0, 0.0)
                } else {
                    (times[0], values[0])
                };
                if t <= t0 {
                    return v0;
                }
                let k = times.partition_point(|&x| x <= t);
                if k == times.len() {
                    return values[k - 1];
                }
                let (ta, va) = if k == 0 { (t0, v0) } else { (times[k - 1], values[k - 1]) };
                let (tb, vb) = (times[k], values[k]);
                va + (vb - va) * (t - ta) / (tb - ta)
            }
        }
    }
}

/// Declared regularity of a form: `|a| ≤ M‖u‖_V‖v‖_V`,
/// `Re a(u,u) + ω₀‖u‖²_H ≥ α‖u‖²_V` and
/// `|a(t) − a(s)| ≤ ω(|t−s|)‖u‖_{V_γ}‖v‖_{V_γ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptors {
    pub bound: f64,
    pub coercivity: f64,
    /// H-shift `ω₀ ≥ 0` under which `coercivity` holds; zero for coercive forms.
    #[serde(default)]
    pub quasi_shift: f64,
    pub modulus: Modulus,
    pub gamma: f64,
}

#[derive(Clone)]
pub struct NonautonomousForm {
    triple: Arc<GelfandTriple>,
    horizon: f64,
    evaluator: Evaluator,
    descriptors: Descriptors,
}

impl fmt::Debug for NonautonomousForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonautonomousForm")
            .field("dim", &self.triple.dim())
            .field("horizon", &self.horizon)
            .field("descriptors", &self.descriptors)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub alpha_min: f64,
    pub m_max: f64,
    pub declared_coercivity: f64,
    pub declared_bound: f64,
    pub quasi_shift: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Outcome of the Dini test. `None` marks an unbounded ratio or a divergent
/// integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiniReport {
    pub sup_ratio: Option<f64>,
    pub integral_value: Option<f64>,
    pub samples_used: usize,
}

impl DiniReport {
    pub fn passes(&self) -> bool {
        self.sup_ratio.is_some() && self.integral_value.is_some()
    }
}

impl NonautonomousForm {
    pub fn new(
        triple: Arc<GelfandTriple>,
        horizon: f64,
        evaluator: Evaluator,
        descriptors: Descriptors,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::OutOfRange {
                name: "horizon",
                value: horizon,
                range: "(0, inf)".into(),
            });
        }
        descriptors.modulus.validate()?;
        check_range("gamma", descriptors.gamma, 0.0, 1.0)?;
        let probe = evaluator(0.0);
        linalg::ensure_dim(&probe, triple.dim())?;
        Ok(Self {
            triple,
            horizon,
            evaluator,
            descriptors,
        })
    }

    /// Autonomous form `A(t) = a0`.
    pub fn autonomous(triple: Arc<GelfandTriple>, horizon: f64, a0: CMat) -> Result<Self> {
        linalg::ensure_dim(&a0, triple.dim())?;
        let alpha = triple.min_rayleigh_v(&a0);
        let bound = triple.form_norm(&a0, 1.0, 1.0)?;
        let descriptors = Descriptors {
            bound,
            coercivity: alpha,
            modulus: Modulus::zero(),
            gamma: 0.5,
            quasi_shift: 0.0,
        };
        Self::new(triple, horizon, Arc::new(move |_| a0.clone()), descriptors)
    }

    /// Piecewise-linear interpolation between tabulated matrices.
    ///
    /// The first time must be 0 and the last one becomes the horizon. Since
    /// coercivity is concave and boundedness convex along each linear
    /// segment, the declared constants taken over the nodes are exact. The
    /// modulus is Lipschitz with the largest segment slope in the
    /// `V_γ` form norm.
    pub fn piecewise_linear(
        triple: Arc<GelfandTriple>,
        times: Vec<f64>,
        matrices: Vec<CMat>,
        gamma: f64,
    ) -> Result<Self> {
        if times.len() != matrices.len() || times.is_empty() {
            return Err(Error::Invalid(format!(
                "{} times but {} matrices",
                times.len(),
                matrices.len()
            )));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid(
                "tabulated times must start at 0 and increase strictly".into(),
            ));
        }
        for m in &matrices {
            linalg::ensure_dim(m, triple.dim())?;
            if !linalg::is_finite(m) {
                return Err(Error::NonFinite("tabulated form matrix"));
            }
        }
        check_range("gamma", gamma, 0.0, 1.0)?;
        let horizon = *times.last().expect("nonempty");
        if times.len() == 1 {
            return Self::autonomous(triple, 1.0, matrices[0].clone());
        }

        let coercivity = matrices
            .iter()
            .map(|m| triple.min_rayleigh_v(m))
            .fold(f64::INFINITY, f64::min);
        let bound = matrices
            .iter()
            .map(|m| triple.form_norm(m, 1.0, 1.0))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let mut slope: f64 = 0.0;
        for k in 0..times.len() - 1 {
            let d = triple.form_norm(&(&matrices[k + 1] - &matrices[k]), gamma, gamma)?;
            slope = slope.max(d / (times[k + 1] - times[k]));
        }
        let descriptors = Descriptors {
            bound,
            coercivity,
            modulus: Modulus::Power {
                scale: slope,
                exponent: 1.0,
            },
            gamma,
            quasi_shift: 0.0,
        };

        let table = Arc::new((times, matrices));
        let evaluator: Evaluator = Arc::new(move |t: f64| {
            let (times, mats) = &*table;
            let k = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
            let (ta, tb) = (times[k - 1], times[k]);
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            &mats[k - 1] * c(1.0 - w) + &mats[k] * c(w)
        });
        Self::new(triple, horizon, evaluator, descriptors)
    }

    pub fn triple(&self) -> &Arc<GelfandTriple> {
        &self.triple
    }

    pub fn dim(&self) -> usize {
        self.triple.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn descriptors(&self) -> &Descriptors {
        &self.descriptors
    }

    pub fn with_descriptors(mut self, descriptors: Descriptors) -> Result<Self> {
        descriptors.modulus.validate()?;
        check_range("gamma", descriptors.gamma, 0.0, 1.0)?;
        self.descriptors = descriptors;
        Ok(self)
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            })
        }
    }

    /// `A(t)` with `A(t)[i][j] = a(t; basis_j, basis_i)`.
    pub fn matrix_at(&self, t: f64) -> Result<CMat> {
        self.check_time(t)?;
        Ok((self.evaluator)(t))
    }

    pub(crate) fn eval(&self, t: f64) -> CMat {
        (self.evaluator)(t)
    }

    /// Largest α(t) with `Re a(t,u,u) ≥ α(t)‖u‖²_V`.
    pub fn coercivity_constant(&self, t: f64) -> Result<f64> {
        Ok(self.triple.min_rayleigh_v(&self.matrix_at(t)?))
    }

    /// Smallest M(t) with `|a(t,u,v)| ≤ M(t)‖u‖_V‖v‖_V`.
    pub fn boundedness_constant(&self, t: f64) -> Result<f64> {
        self.triple.form_norm(&self.matrix_at(t)?, 1.0, 1.0)
    }

    /// Certify the declared α and M on a grid of times. With a nonzero
    /// `quasi_shift` ω₀, α is measured for `a + ω₀(·|·)_H`.
    pub fn verify_uniformity(&self, grid: &[f64]) -> Result<UniformityReport> {
        if grid.is_empty() {
            return Err(Error::Invalid("empty certification grid".into()));
        }
        let omega0 = self.descriptors.quasi_shift;
        let values = par::try_map(grid, |&t| -> Result<(f64, f64)> {
            let mut a = self.matrix_at(t)?;
            if omega0 != 0.0 {
                a += self.triple.mass() * c(omega0);
            }
            Ok((self.triple.min_rayleigh_v(&a), self.boundedness_constant(t)?))
        })?;
        let alpha_min = values.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        let m_max = values.iter().map(|v| v.1).fold(0.0, f64::max);
        let d = &self.descriptors;
        Ok(UniformityReport {
            alpha_min,
            m_max,
            declared_coercivity: d.coercivity,
            declared_bound: d.bound,
            quasi_shift: omega0,
            samples: grid.len(),
            pass: alpha_min >= d.coercivity && m_max <= d.bound && d.coercivity > 0.0,
        })
    }

    /// Smallest C with `|a(t,u,v) − a(s,u,v)| ≤ C‖u‖_{V_{γ_u}}‖v‖_{V_{γ_v}}`.
    pub fn dini_deviation(&self, t: f64, s: f64, gamma_u: f64, gamma_v: f64) -> Result<f64> {
        check_range("gamma_u", gamma_u, 0.0, 1.0)?;
        check_range("gamma_v", gamma_v, 0.0, 1.0)?;
        let diff = self.matrix_at(t)? - self.matrix_at(s)?;
        self.triple.form_norm(&diff, gamma_u, gamma_v)
    }

    /// `a*(t; u, v) = conj(a(t; v, u))`.
    pub fn adjoint_form(&self) -> Self {
        let inner = self.evaluator.clone();
        Self {
            triple: self.triple.clone(),
            horizon: self.horizon,
            evaluator: Arc::new(move |t| inner(t).adjoint()),
            descriptors: self.descriptors.clone(),
        }
    }

    /// Returned adjoint `a*_r(t; u, v) = conj(a(T − t; v, u))`.
    pub fn returned_adjoint_form(&self) -> Self {
        let inner = self.evaluator.clone();
        let horizon = self.horizon;
        Self {
            triple: self.triple.clone(),
            horizon,
            evaluator: Arc::new(move |t| inner(horizon - t).adjoint()),
            descriptors: self.descriptors.clone(),
        }
    }

    /// Rescaled form `a(t) + ω_s (·|·)_H`; the bound grows by `|ω_s| c_H²`.
    ///
    /// Declared coercivity is carried over in the quasi-coercive sense: a
    /// coercive form shifted by a negative `ω_s` keeps its constant `α` with
    /// `quasi_shift` raised by `−ω_s`. A form that was not coercive to begin
    /// with gets its constant re-certified on a 65-point grid.
    pub fn shift(&self, omega_s: f64) -> Result<Self> {
        if !omega_s.is_finite() {
            return Err(Error::NonFinite("shift"));
        }
        if omega_s == 0.0 {
            return Ok(self.clone());
        }
        let inner = self.evaluator.clone();
        let mass = self.triple.mass().clone();
        let evaluator: Evaluator = Arc::new(move |t| inner(t) + &mass * c(omega_s));

        let lams = self.triple.eigenvalues();
        let lam_max = *lams.last().expect("nonempty");
        let ch2 = 1.0 / lams[0];
        let old = &self.descriptors;
        let remaining = old.quasi_shift - omega_s;
        let (coercivity, quasi_shift) = if remaining >= 0.0 {
            (old.coercivity, remaining)
        } else {
            (old.coercivity - remaining / lam_max, 0.0)
        };
        let mut shifted = Self {
            triple: self.triple.clone(),
            horizon: self.horizon,
            evaluator,
            descriptors: Descriptors {
                bound: old.bound + omega_s.abs() * ch2,
                coercivity,
                quasi_shift,
                modulus: old.modulus.clone(),
                gamma: old.gamma,
            },
        };
        if !(old.coercivity > 0.0) {
            let grid = uniform_grid(self.horizon, 64);
            let certified = par::try_map(&grid, |&t| shifted.coercivity_constant(t))?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            shifted.descriptors.coercivity = certified;
            shifted.descriptors.quasi_shift = 0.0;
        }
        Ok(shifted)
    }

    /// Extreme values of `‖A_H(t)^{1/2} u‖_H / ‖u‖_V`, where `A_H(t) = M⁻¹A(t)`
    /// and the square root is the principal one. A positive lower constant
    /// is the discrete square-root property.
    pub fn kato_constants(&self, t: f64) -> Result<(f64, f64)> {
        let g = self.triple.h_operator(&self.matrix_at(t)?)?;
        let root = linalg::sqrtm_principal(&g)?;
        let coords = self.triple.operator_in_eigenbasis(&root);
        let ones = vec![1.0; self.dim()];
        let w = linalg::scale_rows_cols(&coords, &ones, &self.triple.eigen_powers(-0.5));
        let sv = linalg::singular_values(&w);
        Ok((*sv.last().expect("nonempty"), sv[0]))
    }
}

/// `points + 1` equally spaced times covering [0, horizon].
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    let points = points.max(1);
    (0..=points)
        .map(|k| {
            if k == points {
                horizon
            } else {
                horizon * k as f64 / points as f64
            }
        })
        .collect()
}

/// Dini test for `ω`: `sup_{t ≤ T} ω(t)/t^{γ/2}` and `∫_0^T ω(t)/t^{1+γ/2} dt`.
///
/// Power moduli are handled in closed form. Tables use a geometric grid
/// `T·2^{-k}, k = 0..=60` for the ratio (reported unbounded when it is still
/// increasing and has at least doubled over the last 20 halvings) and the
/// substitution `t = τ^{2/γ}` with dyadic-panel adaptive quadrature for the
/// integral (reported divergent when the panels fail to decay).
pub fn check_dini(modulus: &Modulus, gamma: f64, horizon: f64) -> Result<DiniReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            range: "(0, 1)".into(),
        });
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::OutOfRange {
            name: "T",
            value: horizon,
            range: "(0, inf)".into(),
        });
    }
    modulus.validate()?;
    let half = gamma / 2.0;
    match modulus {
        Modulus::Power { scale, exponent } => {
            if *scale == 0.0 {
                return Ok(DiniReport {
                    sup_ratio: Some(0.0),
                    integral_value: Some(0.0),
                    samples_used: 0,
                });
            }
            let excess = exponent - half;
            let sup_ratio = (excess >= 0.0).then(|| scale * horizon.powf(excess));
            let integral_value = (excess > 0.0).then(|| scale * horizon.powf(excess) / excess);
            Ok(DiniReport {
                sup_ratio,
                integral_value,
                samples_used: 0,
            })
        }
        Modulus::Table { .. } => {
            let ratios: Vec<f64> = (0..=60)
                .map(|k| {
                    let t = horizon * 2f64.powi(-k);
                    modulus.eval(t) / t.powf(half)
                })
                .collect();
            let tail = &ratios[40..];
            let growing = tail.windows(2).all(|w| w[1] >= w[0]) && ratios[60] >= 2.0 * ratios[40];
            let sup_ratio = (!growing).then(|| ratios.iter().copied().fold(0.0, f64::max));

            let mut evaluations = ratios.len();
            let integral_value = dini_integral(modulus, gamma, horizon, &mut evaluations);
            Ok(DiniReport {
                sup_ratio,
                integral_value,
                samples_used: evaluations,
            })
        }
    }
}

fn dini_integral(modulus: &Modulus, gamma: f64, horizon: f64, evaluations: &mut usize) -> Option<f64> {
    // t = τ^{2/γ}: dt / t^{1+γ/2} = (2/γ) τ^{-2} dτ
    let p = 2.0 / gamma;
    let g = |tau: f64| p * modulus.eval(tau.powf(p)) / (tau * tau);
    let mut upper = horizon.powf(gamma / 2.0);
    let mut total: f64 = 0.0;
    let mut previous = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..4000 {
        let lower = 0.5 * upper;
        let rough = quadrature::GaussLegendre::new(10).integrate(lower, upper, g);
        let tol = 1e-14 * total.max(rough.abs()).max(f64::MIN_POSITIVE);
        let piece = quadrature::adaptive(&g, lower, upper, tol, 40, evaluations)?;
        total += piece;
        if piece <= 1e-17 * total {
            return Some(total);
        }
        if piece >= previous {
            stalled += 1;
            if stalled >= 32 {
                return None;
            }
        } else {
            stalled = 0;
        }
        previous = piece;
        upper = lower;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use crate::testutil::{mc_extremum, rand_hpd, rand_mat, rand_vec, rng};

    fn diag_triple(w: &[f64]) -> Arc<GelfandTriple> {
        Arc::new(GelfandTriple::diagonal(w).unwrap())
    }

    fn diag(v: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(v.len(), v.iter().map(|&x| c(x))))
    }

    fn random_triple(seed: u64, n: usize) -> Arc<GelfandTriple> {
        let mut r = rng(seed);
        let m = rand_hpd(&mut r, n, 0.5);
        let k = rand_hpd(&mut r, n, 0.3);
        Arc::new(GelfandTriple::new(m, k).unwrap())
    }

    fn affine_form(triple: Arc<GelfandTriple>, a0: CMat, b: CMat, phi: fn(f64) -> f64) -> NonautonomousForm {
        let d = Descriptors {
            bound: 10.0,
            coercivity: 0.01,
            modulus: Modulus::Power { scale: 1.0, exponent: 1.0 },
            gamma: 0.5,
            quasi_shift: 0.0,
        };
        NonautonomousForm::new(triple, 1.0, Arc::new(move |t| &a0 + &b * c(phi(t))), d).unwrap()
    }

    #[test]
    fn coercivity_and_bound_of_diagonal_form() {
        let t = diag_triple(&[1.0, 1.0]);
        let f = NonautonomousForm::autonomous(t.clone(), 1.0, diag(&[2.0, 3.0])).unwrap();
        assert!((f.coercivity_constant(0.3).unwrap() - 2.0).abs() < 1e-14);
        assert!((f.boundedness_constant(0.3).unwrap() - 3.0).abs() < 1e-14);

        let tr = random_triple(1, 4);
        let g = NonautonomousForm::autonomous(tr.clone(), 1.0, tr.vgram().clone()).unwrap();
        assert!((g.coercivity_constant(0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((g.boundedness_constant(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(g.coercivity_constant(1.5), Err(Error::TimeOutOfRange { .. })));
        assert!(g.boundedness_constant(-0.1).is_err());
    }

    #[test]
    fn coercivity_matches_monte_carlo_minimum() {
        let n = 5;
        let tr = random_triple(2, n);
        let mut r = rng(3);
        let a = rand_hpd(&mut r, n, 0.1) + rand_mat(&mut r, n) * c(0.3);
        let f = NonautonomousForm::autonomous(tr.clone(), 1.0, a.clone()).unwrap();
        let exact = f.coercivity_constant(0.5).unwrap();
        let mc = mc_extremum(&mut r, n, 10_000, false, |u| {
            let num = u.dotc(&(&a * u)).re;
            let den = u.dotc(&(tr.vgram() * u)).re;
            num / den
        });
        assert!(mc >= exact * (1.0 - 1e-10));
        assert!((mc - exact).abs() <= 0.02 * exact.abs(), "{mc} vs {exact}");
    }

    #[test]
    fn boundedness_matches_monte_carlo_supremum() {
        let n = 4;
        let tr = random_triple(4, n);
        let mut r = rng(5);
        let a = rand_mat(&mut r, n);
        let f = NonautonomousForm::autonomous(tr.clone(), 1.0, a.clone()).unwrap();
        let exact = f.boundedness_constant(0.0).unwrap();
        let vnorm = |x: &CVec| x.dotc(&(tr.vgram() * x)).re.sqrt();
        // pairs (u, v) stacked into one vector of length 2n
        let mc = mc_extremum(&mut r, 2 * n, 10_000, true, |w| {
            let u = w.rows(0, n).into_owned();
            let v = w.rows(n, n).into_owned();
            v.dotc(&(&a * &u)).norm() / (vnorm(&u) * vnorm(&v))
        });
        assert!(mc <= exact * (1.0 + 1e-10));
        assert!(mc >= 0.98 * exact, "{mc} vs {exact}");
    }

    #[test]
    fn coercivity_lower_bounds_rayleigh_quotient() {
        let n = 6;
        let tr = random_triple(6, n);
        let mut r = rng(7);
        let a0 = rand_hpd(&mut r, n, 0.5);
        let b = rand_mat(&mut r, n) * c(0.2);
        let f = affine_form(tr.clone(), a0, b, f64::sin);
        for k in 0..20 {
            let t = k as f64 / 19.0;
            let alpha = f.coercivity_constant(t).unwrap();
            let a = f.matrix_at(t).unwrap();
            for _ in 0..20 {
                let u = rand_vec(&mut r, n);
                let vn2 = u.dotc(&(tr.vgram() * &u)).re;
                assert!(u.dotc(&(&a * &u)).re >= alpha * vn2 - 1e-10 * vn2);
            }
        }
    }

    #[test]
    fn uniformity_of_autonomous_form_is_grid_independent() {
        let tr = random_triple(8, 4);
        let mut r = rng(9);
        let a0 = rand_hpd(&mut r, 4, 1.0);
        let f = NonautonomousForm::autonomous(tr, 2.0, a0).unwrap();
        let a0_alpha = f.coercivity_constant(0.0).unwrap();
        let a0_m = f.boundedness_constant(0.0).unwrap();
        for points in [1, 5, 33] {
            let rep = f.verify_uniformity(&uniform_grid(2.0, points)).unwrap();
            assert_eq!(rep.alpha_min, a0_alpha);
            assert_eq!(rep.m_max, a0_m);
        }
        assert!(f.verify_uniformity(&[]).is_err());
    }

    #[test]
    fn uniformity_fails_for_overstated_coercivity() {
        let t = diag_triple(&[1.0, 1.0]);
        let f = NonautonomousForm::autonomous(t, 1.0, diag(&[2.0, 3.0])).unwrap();
        assert!(f.verify_uniformity(&[0.0, 1.0]).unwrap().pass);
        let mut d = f.descriptors().clone();
        d.coercivity = 2.5;
        let f = f.with_descriptors(d).unwrap();
        assert!(!f.verify_uniformity(&[0.0, 0.5, 1.0]).unwrap().pass);
    }

    #[test]
    fn dini_deviation_cases() {
        let tr = random_triple(10, 4);
        let mut r = rng(11);
        let a0 = rand_hpd(&mut r, 4, 1.0);
        let auto = NonautonomousForm::autonomous(tr.clone(), 1.0, a0.clone()).unwrap();
        assert_eq!(auto.dini_deviation(0.2, 0.9, 0.5, 0.5).unwrap(), 0.0);

        // Euclidean triple: deviation is |φ(t) − φ(s)|·‖B‖₂ for any exponents
        let e = diag_triple(&[1.0; 4]);
        let b = rand_mat(&mut r, 4);
        let bn = linalg::spectral_norm(&b);
        let f = affine_form(e, a0.clone(), b, |t| t * t);
        for (t, s) in [(0.9f64, 0.1f64), (0.3, 0.7), (1.0, 0.0)] {
            let expected = (t * t - s * s).abs() * bn;
            for (gu, gv) in [(0.5, 0.5), (1.0, 0.3), (0.0, 1.0)] {
                let got = f.dini_deviation(t, s, gu, gv).unwrap();
                assert!((got - expected).abs() < 1e-12 * expected.max(1.0));
            }
        }
        assert!(f.dini_deviation(0.1, 0.2, 1.2, 0.5).is_err());
        assert!(f.dini_deviation(1.1, 0.2, 0.5, 0.5).is_err());
    }

    #[test]
    fn dini_deviation_symmetric_and_bounded() {
        let tr = random_triple(12, 5);
        let mut r = rng(13);
        let a0 = rand_hpd(&mut r, 5, 1.0);
        let b = rand_mat(&mut r, 5) * c(0.4);
        let f = affine_form(tr, a0, b, f64::cos);
        let grid = uniform_grid(1.0, 10);
        let m_max = f.verify_uniformity(&grid).unwrap().m_max;
        for &t in &grid {
            assert_eq!(f.dini_deviation(t, t, 0.7, 0.7).unwrap(), 0.0);
            for &s in &grid {
                let ts = f.dini_deviation(t, s, 1.0, 1.0).unwrap();
                let st = f.dini_deviation(s, t, 1.0, 1.0).unwrap();
                assert!((ts - st).abs() < 1e-13 * ts.max(1.0));
                assert!(ts <= 2.0 * m_max * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn dini_closed_form_cases() {
        let w = Modulus::Power { scale: 1.0, exponent: 0.75 };
        let rep = check_dini(&w, 0.9, 1.0).unwrap();
        assert!((rep.sup_ratio.unwrap() - 1.0).abs() < 1e-15);
        assert!((rep.integral_value.unwrap() - 10.0 / 3.0).abs() < 1e-12);
        assert!(rep.passes());

        let rough = Modulus::Power { scale: 1.0, exponent: 0.4 };
        let rep = check_dini(&rough, 0.9, 1.0).unwrap();
        assert!(rep.integral_value.is_none());
        assert!(rep.sup_ratio.is_none());

        let zero = check_dini(&Modulus::zero(), 0.5, 3.0).unwrap();
        assert_eq!(zero.sup_ratio, Some(0.0));
        assert_eq!(zero.integral_value, Some(0.0));

        assert!(check_dini(&w, 1.0, 1.0).is_err());
        assert!(check_dini(&w, 0.0, 1.0).is_err());
        assert!(check_dini(&w, 0.5, 0.0).is_err());
    }

    #[test]
    fn dini_table_matches_closed_form() {
        // a table sampling t^{0.75} finely is Lipschitz near 0 through the
        // origin segment, so the integral must exist and be close to 10/3
        let times: Vec<f64> = (0..=2000).map(|k| (k as f64 / 2000.0).powi(4)).collect();
        let values: Vec<f64> = times.iter().map(|t| t.powf(0.75)).collect();
        let table = Modulus::Table { times, values };
        let rep = check_dini(&table, 0.9, 1.0).unwrap();
        let integral = rep.integral_value.unwrap();
        assert!((integral - 10.0 / 3.0).abs() < 2e-3, "{integral}");
        assert!(rep.sup_ratio.unwrap() <= 1.0 + 1e-12);
        assert!(rep.samples_used > 61);

        // ω(0) > 0 is not a modulus of continuity: both tests fail
        let jump = Modulus::Table { times: vec![0.0, 1.0], values: vec![0.5, 1.0] };
        let rep = check_dini(&jump, 0.5, 1.0).unwrap();
        assert!(rep.sup_ratio.is_none());
        assert!(rep.integral_value.is_none());
    }

    #[test]
    fn adjoint_forms() {
        let tr = random_triple(14, 4);
        let mut r = rng(15);
        let a0 = rand_mat(&mut r, 4) + rand_hpd(&mut r, 4, 2.0);
        let b = rand_mat(&mut r, 4);
        let f = affine_form(tr.clone(), a0, b, |t| t.powf(0.75));
        let adj = f.adjoint_form();
        for _ in 0..10 {
            let t: f64 = rand::Rng::random(&mut r);
            let u = rand_vec(&mut r, 4);
            let v = rand_vec(&mut r, 4);
            let a_uv = v.dotc(&(f.matrix_at(t).unwrap() * &u));
            let astar_vu = u.dotc(&(adj.matrix_at(t).unwrap() * &v));
            assert!((astar_vu - a_uv.conj()).norm() < 1e-13);
        }
        let twice = adj.adjoint_form();
        let ret = f.returned_adjoint_form();
        let ret2 = ret.returned_adjoint_form();
        assert_eq!(ret.matrix_at(0.0).unwrap(), adj.matrix_at(1.0).unwrap());
        for t in uniform_grid(1.0, 16) {
            let a = f.matrix_at(t).unwrap();
            assert_eq!(twice.matrix_at(t).unwrap(), a);
            assert!((ret2.matrix_at(t).unwrap() - &a).norm() < 1e-13 * a.norm());
        }

        // Hermitian autonomous: both operations are the identity
        let h = rand_hpd(&mut r, 4, 1.0);
        let g = NonautonomousForm::autonomous(tr, 1.0, h.clone()).unwrap();
        assert!((g.adjoint_form().matrix_at(0.4).unwrap() - &h).norm() < 1e-15);
        assert!((g.returned_adjoint_form().matrix_at(0.4).unwrap() - &h).norm() < 1e-15);
    }

    #[test]
    fn shift_cases() {
        let t = diag_triple(&[1.0, 1.0]);
        let zero = NonautonomousForm::autonomous(t, 1.0, CMat::zeros(2, 2)).unwrap();
        let shifted = zero.shift(2.0).unwrap();
        assert_eq!(shifted.matrix_at(0.5).unwrap(), diag(&[2.0, 2.0]));
        assert!(shifted.descriptors().coercivity > 0.0);
        let same = zero.shift(0.0).unwrap();
        assert_eq!(same.matrix_at(0.5).unwrap(), CMat::zeros(2, 2));
    }

    #[test]
    fn shift_commutes_with_adjoint() {
        let tr = random_triple(16, 4);
        let mut r = rng(17);
        let a0 = rand_mat(&mut r, 4) + rand_hpd(&mut r, 4, 2.0);
        let b = rand_mat(&mut r, 4);
        let f = affine_form(tr, a0, b, f64::sin);
        for w in [-1.0, 0.0, 2.5] {
            let x = f.adjoint_form().shift(w).unwrap();
            let y = f.shift(w).unwrap().adjoint_form();
            for t in uniform_grid(1.0, 8) {
                let d = (x.matrix_at(t).unwrap() - y.matrix_at(t).unwrap()).norm();
                assert!(d < 1e-13, "{d}");
            }
        }
    }

    #[test]
    fn kato_constants_symmetric_cases() {
        let e = diag_triple(&[1.0, 1.0, 1.0]);
        let id = NonautonomousForm::autonomous(e, 1.0, linalg::identity(3)).unwrap();
        let (lo, hi) = id.kato_constants(0.0).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

        let mut r = rng(18);
        let k = rand_hpd(&mut r, 5, 0.5);
        let tr = Arc::new(GelfandTriple::new(linalg::identity(5), k.clone()).unwrap());
        let f = NonautonomousForm::autonomous(tr, 1.0, k).unwrap();
        let (lo, hi) = f.kato_constants(0.7).unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10, "{lo} {hi}");
    }

    #[test]
    fn kato_constants_match_monte_carlo() {
        let n = 5;
        let tr = random_triple(19, n);
        let mut r = rng(20);
        let a = rand_hpd(&mut r, n, 0.5) + rand_mat(&mut r, n) * c(0.8);
        let f = NonautonomousForm::autonomous(tr.clone(), 1.0, a.clone()).unwrap();
        let (lo, hi) = f.kato_constants(0.0).unwrap();
        assert!(lo > 0.0);
        let g = tr.h_operator(&a).unwrap();
        let s = linalg::sqrtm_principal(&g).unwrap();
        let ratio = |u: &CVec| {
            let su = &s * u;
            su.dotc(&(tr.mass() * &su)).re.sqrt() / u.dotc(&(tr.vgram() * u)).re.sqrt()
        };
        let mc_hi = mc_extremum(&mut r, n, 10_000, true, ratio);
        let mc_lo = mc_extremum(&mut r, n, 10_000, false, ratio);
        assert!((mc_hi - hi).abs() <= 0.02 * hi, "{mc_hi} {hi}");
        assert!((mc_lo - lo).abs() <= 0.02 * lo, "{mc_lo} {lo}");
    }

    #[test]
    fn kato_rejects_non_sectorial_generator() {
        let e = diag_triple(&[1.0, 1.0]);
        let f = NonautonomousForm::autonomous(e, 1.0, diag(&[1.0, -1.0])).unwrap();
        assert!(matches!(
            f.kato_constants(0.0),
            Err(Error::SpectrumNotSectorial { .. })
        ));
    }

    #[test]
    fn piecewise_linear_form_interpolates() {
        let tr = random_triple(21, 3);
        let mut r = rng(22);
        let m0 = rand_hpd(&mut r, 3, 1.0);
        let m1 = rand_hpd(&mut r, 3, 2.0);
        let f = NonautonomousForm::piecewise_linear(tr, vec![0.0, 2.0], vec![m0.clone(), m1.clone()], 0.5)
            .unwrap();
        assert_eq!(f.horizon(), 2.0);
        let mid = (&m0 + &m1) * c(0.5);
        assert!((f.matrix_at(1.0).unwrap() - mid).norm() < 1e-14);
        assert!(f.verify_uniformity(&uniform_grid(2.0, 20)).unwrap().pass);
        // declared Lipschitz modulus bounds the observed deviation
        let Modulus::Power { scale, .. } = f.descriptors().modulus else { panic!() };
        let d = f.dini_deviation(1.7, 0.2, 0.5, 0.5).unwrap();
        assert!(d <= scale * 1.5 * (1.0 + 1e-12));
    }
}
