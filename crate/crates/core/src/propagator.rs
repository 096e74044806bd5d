//! Frozen-coefficient approximation of the evolution family.
//!
//! Given a subdivision `0 = λ_0 < … < λ_{n+1} = T`, each cell `k` gets the
//! time-averaged form `A_k = (λ_{k+1} − λ_k)⁻¹ ∫ A(r) dr`, whose H operator
//! `G_k = M⁻¹ A_k` generates the semigroup `T_k(τ) = exp(−τ G_k)`. For
//! `λ_{m−1} ≤ s < λ_m < … < λ_{l−1} ≤ t < λ_l`,
//!
//! ```text
//! U_Λ(t,s) = T_{l−1}(t − λ_{l−1}) T_{l−2}(λ_{l−1} − λ_{l−2}) ⋯ T_{m−1}(λ_m − s)
//! ```
//!
//! and `U_Λ(t,s) = T_{l−1}(t − s)` when both ends lie in one cell.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::forms::NonautonomousForm;
use crate::gelfand::{GelfandTriple, Space};
use crate::linalg::{self, c, matmul, CMat};
use crate::par;
use crate::quadrature::GaussLegendre;

pub const DEFAULT_QUADRATURE_ORDER: usize = 8;
pub const DEFAULT_EXP_TOLERANCE: f64 = 1e-12;
/// Refinement cap for the reference propagator.
pub const MAX_REFERENCE_LEVEL: u32 = 20;

/// Ordered partition of [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct Subdivision {
    points: Vec<f64>,
    /// Points of the reversed partition `T − λ_{n+1−k}`, kept alongside so
    /// that reversal is an exact involution.
    mirror: Vec<f64>,
}

impl Subdivision {
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidSubdivision("need at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidSubdivision("first point must be 0".into()));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSubdivision(
                "points must be finite and strictly increasing".into(),
            ));
        }
        let horizon = *points.last().expect("len >= 2");
        let mut mirror: Vec<f64> = points.iter().rev().map(|p| horizon - p).collect();
        mirror[0] = 0.0;
        *mirror.last_mut().expect("len >= 2") = horizon;
        if mirror.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSubdivision(
                "points too close to be reflected exactly".into(),
            ));
        }
        Ok(Self { points, mirror })
    }

    pub fn uniform(horizon: f64, cells: usize) -> Result<Self> {
        if cells == 0 || !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidSubdivision(format!(
                "uniform subdivision of [0, {horizon}] into {cells} cells"
            )));
        }
        let points: Vec<f64> = (0..=cells)
            .map(|k| {
                if k == cells {
                    horizon
                } else {
                    horizon * k as f64 / cells as f64
                }
            })
            .collect();
        Ok(Self {
            mirror: points.clone(),
            points,
        })
    }

    /// Geometrically graded cells: each cell is `ratio` times the previous.
    pub fn graded(horizon: f64, cells: usize, ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) || cells == 0 {
            return Err(Error::InvalidSubdivision(format!(
                "graded subdivision with {cells} cells and ratio {ratio}"
            )));
        }
        let widths: Vec<f64> = (0..cells).map(|k| ratio.powi(k as i32)).collect();
        let total: f64 = widths.iter().sum();
        let mut points = vec![0.0];
        let mut acc = 0.0;
        for w in &widths[..cells - 1] {
            acc += w;
            points.push(horizon * acc / total);
        }
        points.push(horizon);
        Self::from_points(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("len >= 2")
    }

    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    /// Mesh size `|Λ|`.
    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// `Λ_T = (0 = T − λ_{n+1} < … < T − λ_0 = T)`.
    pub fn reverse(&self) -> Self {
        Self {
            points: self.mirror.clone(),
            mirror: self.points.clone(),
        }
    }

    /// Index `k` with `λ_k ≤ t < λ_{k+1}`; `t = T` belongs to the last cell.
    pub fn cell_of(&self, t: f64) -> usize {
        let k = self.points.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(self.cells() - 1)
    }

    /// Subdivision with one extra point.
    pub fn insert(&self, point: f64) -> Result<Self> {
        let mut points = self.points.clone();
        let k = points.partition_point(|&x| x < point);
        if k == 0 || k == points.len() || points[k] == point {
            return Err(Error::InvalidSubdivision(format!(
                "cannot insert {point} into the partition"
            )));
        }
        points.insert(k, point);
        Self::from_points(points)
    }
}

/// `U_Λ(t, s)` together with how it was obtained.
#[derive(Debug, Clone)]
pub struct PropagatorEval {
    pub matrix: CMat,
    pub t: f64,
    pub s: f64,
    pub cells: usize,
    pub mesh: f64,
    pub exp_tolerance: f64,
}

/// `(λ_{k+1} − λ_k)⁻¹ ∫ A(r) dr` by Gauss–Legendre quadrature of the given
/// order (exact for evaluators polynomial in t of degree < 2·order).
pub fn averaged_generator(form: &NonautonomousForm, a: f64, b: f64, order: usize) -> Result<CMat> {
    form.check_time(a)?;
    form.check_time(b)?;
    if !(a < b) {
        return Err(Error::InvalidSubdivision(format!("empty cell [{a}, {b}]")));
    }
    if order == 0 {
        return Err(Error::Invalid("quadrature order must be at least 1".into()));
    }
    Ok(average(form, &GaussLegendre::new(order), a, b))
}

fn average(form: &NonautonomousForm, rule: &GaussLegendre, a: f64, b: f64) -> CMat {
    let n = form.dim();
    let mut acc = CMat::zeros(n, n);
    for (x, w) in rule.mean_rule(a, b) {
        acc += form.eval(x) * c(w);
    }
    acc
}

/// Semigroup step `exp(−τ M⁻¹ A_k)`.
pub fn step(a_k: &CMat, tau: f64, triple: &GelfandTriple, exp_tolerance: f64) -> Result<CMat> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::OutOfRange {
            name: "tau",
            value: tau,
            range: "[0, inf)".into(),
        });
    }
    if !linalg::is_finite(a_k) {
        return Err(Error::NonFinite("averaged generator"));
    }
    let g = triple.h_operator(a_k)?;
    exp_step(&g, tau, exp_tolerance)
}

fn exp_step(g: &CMat, tau: f64, exp_tolerance: f64) -> Result<CMat> {
    if tau == 0.0 {
        return Ok(linalg::identity(g.nrows()));
    }
    linalg::expm(&(g * c(-tau)), exp_tolerance)
}

/// Evaluates `U_Λ(t, s)` for one form and subdivision, caching averaged
/// generators and whole-cell steps across queries.
pub struct Propagator {
    form: NonautonomousForm,
    subdivision: Subdivision,
    rule: GaussLegendre,
    exp_tolerance: f64,
    generators: Vec<OnceLock<CMat>>,
    full_steps: Vec<OnceLock<CMat>>,
}

impl Propagator {
    pub fn new(form: &NonautonomousForm, subdivision: &Subdivision) -> Result<Self> {
        Self::with_options(form, subdivision, DEFAULT_QUADRATURE_ORDER, DEFAULT_EXP_TOLERANCE)
    }

    pub fn with_options(
        form: &NonautonomousForm,
        subdivision: &Subdivision,
        quadrature_order: usize,
        exp_tolerance: f64,
    ) -> Result<Self> {
        let horizon = form.horizon();
        if subdivision.horizon() != horizon {
            return Err(Error::InvalidSubdivision(format!(
                "subdivision ends at {} but the horizon is {horizon}",
                subdivision.horizon()
            )));
        }
        if quadrature_order == 0 {
            return Err(Error::Invalid("quadrature order must be at least 1".into()));
        }
        if !(linalg::UNIT_ROUNDOFF..1.0).contains(&exp_tolerance) {
            return Err(Error::OutOfRange {
                name: "expTolerance",
                value: exp_tolerance,
                range: format!("[{:e}, 1)", linalg::UNIT_ROUNDOFF),
            });
        }
        let coercivity = form.descriptors().coercivity;
        if !(coercivity > 0.0) {
            return Err(Error::NotCoercive { coercivity });
        }
        let cells = subdivision.cells();
        Ok(Self {
            form: form.clone(),
            subdivision: subdivision.clone(),
            rule: GaussLegendre::new(quadrature_order),
            exp_tolerance,
            generators: (0..cells).map(|_| OnceLock::new()).collect(),
            full_steps: (0..cells).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn form(&self) -> &NonautonomousForm {
        &self.form
    }

    pub fn subdivision(&self) -> &Subdivision {
        &self.subdivision
    }

    /// Averaged form matrix `A_k` of cell `k`.
    pub fn averaged(&self, k: usize) -> CMat {
        let p = self.subdivision.points();
        average(&self.form, &self.rule, p[k], p[k + 1])
    }

    fn generator(&self, k: usize) -> Result<&CMat> {
        if let Some(g) = self.generators[k].get() {
            return Ok(g);
        }
        let g = self.form.triple().h_operator(&self.averaged(k))?;
        Ok(self.generators[k].get_or_init(|| g))
    }

    fn full_step(&self, k: usize) -> Result<&CMat> {
        if let Some(s) = self.full_steps[k].get() {
            return Ok(s);
        }
        let p = self.subdivision.points();
        let s = exp_step(self.generator(k)?, p[k + 1] - p[k], self.exp_tolerance)?;
        Ok(self.full_steps[k].get_or_init(|| s))
    }

    fn partial_step(&self, k: usize, tau: f64) -> Result<CMat> {
        exp_step(self.generator(k)?, tau, self.exp_tolerance)
    }

    fn check_pair(&self, t: f64, s: f64) -> Result<()> {
        self.form.check_time(t)?;
        self.form.check_time(s)?;
        if s > t {
            return Err(Error::NotOrdered { t, s });
        }
        Ok(())
    }

    /// `U_Λ(t, s)` as a matrix on coefficient vectors.
    pub fn matrix(&self, t: f64, s: f64) -> Result<CMat> {
        self.check_pair(t, s)?;
        let n = self.form.dim();
        if t == s {
            return Ok(linalg::identity(n));
        }
        let first = self.subdivision.cell_of(s);
        let last = self.subdivision.cell_of(t);
        if first == last {
            return self.partial_step(first, t - s);
        }
        let p = self.subdivision.points();

        let interior: Vec<usize> = (first + 1..last).collect();
        par::try_map(&interior, |&k| self.full_step(k).map(|_| ()))?;

        let mut acc = self.partial_step(first, p[first + 1] - s)?;
        for &k in &interior {
            acc = matmul(self.full_step(k)?, &acc);
        }
        let tail = t - p[last];
        if tail > 0.0 {
            acc = matmul(&self.partial_step(last, tail)?, &acc);
        }
        Ok(acc)
    }

    pub fn propagate(&self, t: f64, s: f64) -> Result<PropagatorEval> {
        Ok(PropagatorEval {
            matrix: self.matrix(t, s)?,
            t,
            s,
            cells: self.subdivision.cells(),
            mesh: self.subdivision.mesh(),
            exp_tolerance: self.exp_tolerance,
        })
    }
}

/// One-shot `U_Λ(t, s)` with the default quadrature order.
pub fn propagate(
    form: &NonautonomousForm,
    subdivision: &Subdivision,
    t: f64,
    s: f64,
    exp_tolerance: f64,
) -> Result<PropagatorEval> {
    Propagator::with_options(form, subdivision, DEFAULT_QUADRATURE_ORDER, exp_tolerance)?
        .propagate(t, s)
}

/// Self-convergent reference for the limit family: `U_Λ` on dyadically
/// refined uniform subdivisions until two successive levels differ by less
/// than `tol` in `L(H)`.
#[derive(Debug, Clone)]
pub struct ReferenceEval {
    pub eval: PropagatorEval,
    /// `‖U_{finest} − U_{previous}‖_{L(H)}` at termination.
    pub difference: f64,
    /// First level (log2 of the cell count) confirmed by two further refinements.
    pub level: u32,
}

pub fn reference_propagator(
    form: &NonautonomousForm,
    t: f64,
    s: f64,
    tol: f64,
    exp_tolerance: f64,
) -> Result<ReferenceEval> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange {
            name: "refTol",
            value: tol,
            range: "(0, inf)".into(),
        });
    }
    let horizon = form.horizon();
    let triple = form.triple();
    let mut previous = propagate(form, &Subdivision::uniform(horizon, 1)?, t, s, exp_tolerance)?;
    let mut difference = f64::INFINITY;
    // Two consecutive agreements are required: coefficients with symmetries
    // (e.g. sin 2πt) can make two coarse levels coincide exactly.
    let mut agreed = 0;
    for level in 1..=MAX_REFERENCE_LEVEL {
        let lam = Subdivision::uniform(horizon, 1usize << level)?;
        let current = propagate(form, &lam, t, s, exp_tolerance)?;
        difference = triple.op_norm(&(&current.matrix - &previous.matrix), Space::H)?;
        agreed = if difference < tol { agreed + 1 } else { 0 };
        if agreed == 2 {
            return Ok(ReferenceEval {
                eval: current,
                difference,
                level: level - 2,
            });
        }
        previous = current;
    }
    Err(Error::NoConvergence(format!(
        "reference propagator: difference {difference:.3e} > {tol:.1e} at 2^{MAX_REFERENCE_LEVEL} cells"
    )))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub mesh: f64,
    pub error: f64,
    /// Log-log slope over this and all coarser rows.
    pub order_so_far: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub t: f64,
    pub s: f64,
    /// Metric used for the error column.
    pub metric: String,
    pub rows: Vec<ConvergenceRow>,
    pub reference_cells: usize,
    pub reference_difference: f64,
    pub fitted_order: Option<f64>,
}

impl ConvergenceTable {
    /// Each error at most its predecessor plus `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].error <= w[0].error + slack)
    }
}

/// Operator-norm error `‖U_Λ(t,s) − U_ref(t,s)‖_{L(H)}` on uniform
/// subdivisions with the given cell counts.
pub fn convergence_study(
    form: &NonautonomousForm,
    t: f64,
    s: f64,
    levels: &[usize],
    ref_tol: f64,
    exp_tolerance: f64,
) -> Result<ConvergenceTable> {
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(
            "cell counts must be positive and strictly increasing".into(),
        ));
    }
    if !(s < t) {
        return Err(Error::NotOrdered { t, s });
    }
    let reference = reference_propagator(form, t, s, ref_tol, exp_tolerance)?;
    convergence_against(form, &reference, levels, exp_tolerance)
}

/// [`convergence_study`] against an already computed reference.
pub fn convergence_against(
    form: &NonautonomousForm,
    reference: &ReferenceEval,
    levels: &[usize],
    exp_tolerance: f64,
) -> Result<ConvergenceTable> {
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(
            "cell counts must be positive and strictly increasing".into(),
        ));
    }
    let (t, s) = (reference.eval.t, reference.eval.s);
    let horizon = form.horizon();
    let triple = form.triple().clone();
    let errors = par::try_map(levels, |&cells| -> Result<(f64, f64)> {
        let lam = Subdivision::uniform(horizon, cells)?;
        let u = propagate(form, &lam, t, s, exp_tolerance)?;
        let err = triple.op_norm(&(&u.matrix - &reference.eval.matrix), Space::H)?;
        Ok((lam.mesh(), err))
    })?;
    let meshes: Vec<f64> = errors.iter().map(|e| e.0).collect();
    let errs: Vec<f64> = errors.iter().map(|e| e.1).collect();
    let rows = levels
        .iter()
        .enumerate()
        .map(|(i, &cells)| ConvergenceRow {
            cells,
            mesh: meshes[i],
            error: errs[i],
            order_so_far: fit::loglog_slope(&meshes[..=i], &errs[..=i]),
        })
        .collect();
    Ok(ConvergenceTable {
        t,
        s,
        metric: "L(H) operator norm at fixed (t,s)".into(),
        rows,
        reference_cells: reference.eval.cells,
        reference_difference: reference.difference,
        fitted_order: fit::loglog_slope(&meshes, &errs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{Descriptors, Modulus};
    use crate::testutil::{rand_hpd, rand_mat, rng};
    use std::sync::Arc;

    fn test_form(n: usize, seed: u64, phi: fn(f64) -> f64) -> NonautonomousForm {
        let mut r = rng(seed);
        let m = rand_hpd(&mut r, n, 0.5);
        let k = rand_hpd(&mut r, n, 0.5);
        let triple = Arc::new(GelfandTriple::new(m, k.clone()).unwrap());
        let a0 = &k * c(1.5) + rand_mat(&mut r, n) * c(0.3);
        let b = rand_mat(&mut r, n) * c(0.3);
        let d = Descriptors {
            bound: 10.0,
            coercivity: 0.1,
            modulus: Modulus::Power { scale: 1.0, exponent: 1.0 },
            gamma: 0.5,
            quasi_shift: 0.0,
        };
        NonautonomousForm::new(triple, 1.0, Arc::new(move |t| &a0 + &b * c(phi(t))), d).unwrap()
    }

    fn autonomous(n: usize, seed: u64) -> NonautonomousForm {
        let mut r = rng(seed);
        let m = rand_hpd(&mut r, n, 0.5);
        let k = rand_hpd(&mut r, n, 0.5);
        let triple = Arc::new(GelfandTriple::new(m, k.clone()).unwrap());
        NonautonomousForm::autonomous(triple, 1.0, &k + rand_mat(&mut r, n) * c(0.2)).unwrap()
    }

    #[test]
    fn reverse_examples() {
        let u = Subdivision::uniform(1.0, 8).unwrap();
        assert_eq!(u.reverse(), u);
        let l = Subdivision::from_points(vec![0.0, 0.1, 1.0]).unwrap();
        let r = l.reverse();
        assert_eq!(r.points(), &[0.0, 0.9, 1.0]);
        assert_eq!(r.mesh(), l.mesh());
        assert_eq!(r.reverse(), l);
        let g = Subdivision::graded(3.0, 7, 1.7).unwrap();
        assert_eq!(g.reverse().reverse(), g);
    }

    #[test]
    fn subdivision_validation() {
        assert!(Subdivision::from_points(vec![0.0]).is_err());
        assert!(Subdivision::from_points(vec![0.1, 1.0]).is_err());
        assert!(Subdivision::from_points(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Subdivision::uniform(1.0, 0).is_err());
        let u = Subdivision::uniform(1.0, 4).unwrap();
        assert_eq!(u.cell_of(0.0), 0);
        assert_eq!(u.cell_of(0.25), 1);
        assert_eq!(u.cell_of(0.3), 1);
        assert_eq!(u.cell_of(1.0), 3);
        assert!(u.insert(0.25).is_err());
        assert_eq!(u.insert(0.3).unwrap().cells(), 5);
    }

    #[test]
    fn averaged_generator_exactness() {
        let f = autonomous(4, 1);
        let a0 = f.matrix_at(0.0).unwrap();
        let avg = averaged_generator(&f, 0.2, 0.7, 3).unwrap();
        assert!((avg - &a0).norm() < 1e-14 * a0.norm());

        let g = test_form(4, 2, |t| t);
        let a_0 = g.matrix_at(0.0).unwrap();
        let a_1 = g.matrix_at(1.0).unwrap() - &a_0;
        let expected = &a_0 + &a_1 * c(0.5);
        for order in [1, 2, 8] {
            let avg = averaged_generator(&g, 0.0, 1.0, order).unwrap();
            assert!((avg - &expected).norm() < 1e-14 * expected.norm());
        }
        assert!(averaged_generator(&g, 0.5, 0.5, 8).is_err());
        assert!(averaged_generator(&g, 0.5, 0.4, 8).is_err());
    }

    #[test]
    fn averaged_generator_of_sine_profile() {
        let pi = std::f64::consts::PI;
        let mut r = rng(3);
        let triple = Arc::new(GelfandTriple::diagonal(&[1.0, 2.0, 3.0]).unwrap());
        let b = rand_mat(&mut r, 3);
        let bb = b.clone();
        let d = Descriptors {
            bound: 1.0,
            coercivity: 1.0,
            modulus: Modulus::zero(),
            gamma: 0.5,
            quasi_shift: 0.0,
        };
        let f = NonautonomousForm::new(triple, pi, Arc::new(move |t| &bb * c(t.sin())), d).unwrap();
        let avg = averaged_generator(&f, 0.0, pi, 8).unwrap();
        let expected = &b * c(2.0 / pi);
        assert!((avg - expected).norm() < 1e-12);
    }

    #[test]
    fn step_examples() {
        let mut r = rng(4);
        let m = rand_hpd(&mut r, 3, 0.5);
        let triple = GelfandTriple::new(m.clone(), rand_hpd(&mut r, 3, 0.5)).unwrap();
        let a = rand_mat(&mut r, 3);
        assert_eq!(step(&a, 0.0, &triple, 1e-12).unwrap(), linalg::identity(3));
        let e = step(&m, 0.4, &triple, 1e-12).unwrap();
        assert!((e - linalg::identity(3) * c((-0.4f64).exp())).norm() < 1e-14);
        assert!(step(&a, -1.0, &triple, 1e-12).is_err());
        let mut bad = a.clone();
        bad[(0, 0)] = c(f64::INFINITY);
        assert!(matches!(step(&bad, 0.1, &triple, 1e-12), Err(Error::NonFinite(_))));
    }

    #[test]
    fn autonomous_product_collapses() {
        let f = autonomous(5, 5);
        let a0 = f.matrix_at(0.0).unwrap();
        let lam = Subdivision::graded(1.0, 9, 1.3).unwrap();
        for (t, s) in [(0.9, 0.1), (1.0, 0.0), (0.55, 0.5)] {
            let u = propagate(&f, &lam, t, s, 1e-12).unwrap().matrix;
            let expected = step(&a0, t - s, f.triple(), 1e-12).unwrap();
            assert!((u - &expected).norm() < 1e-12, "({t},{s})");
        }
    }

    #[test]
    fn identity_on_the_diagonal() {
        let f = test_form(4, 6, f64::sin);
        let lam = Subdivision::uniform(1.0, 4).unwrap();
        for t in [0.0, 0.25, 0.6, 1.0] {
            assert_eq!(propagate(&f, &lam, t, t, 1e-12).unwrap().matrix, linalg::identity(4));
        }
    }

    #[test]
    fn product_matches_hand_assembly() {
        let f = test_form(5, 7, |t| (3.0 * t).sin());
        let lam = Subdivision::from_points(vec![0.0, 0.2, 0.45, 0.8, 1.0]).unwrap();
        let (t, s) = (0.9, 0.1);
        let u = propagate(&f, &lam, t, s, 1e-12).unwrap().matrix;
        let tr = f.triple();
        let a = |lo: f64, hi: f64| averaged_generator(&f, lo, hi, 8).unwrap();
        let f0 = step(&a(0.0, 0.2), 0.2 - 0.1, tr, 1e-12).unwrap();
        let f1 = step(&a(0.2, 0.45), 0.25, tr, 1e-12).unwrap();
        let f2 = step(&a(0.45, 0.8), 0.35, tr, 1e-12).unwrap();
        let f3 = step(&a(0.8, 1.0), 0.9 - 0.8, tr, 1e-12).unwrap();
        let expected = &f3 * &f2 * &f1 * &f0;
        assert!((u - &expected).norm() < 1e-12 * expected.norm());
    }

    #[test]
    fn propagate_errors() {
        let f = test_form(3, 8, f64::sin);
        let lam = Subdivision::uniform(1.0, 4).unwrap();
        assert!(matches!(propagate(&f, &lam, 0.2, 0.5, 1e-12), Err(Error::NotOrdered { .. })));
        assert!(propagate(&f, &lam, 1.2, 0.5, 1e-12).is_err());
        let short = Subdivision::uniform(0.5, 4).unwrap();
        assert!(matches!(
            propagate(&f, &short, 0.4, 0.1, 1e-12),
            Err(Error::InvalidSubdivision(_))
        ));
        let d = Descriptors { coercivity: -0.5, ..f.descriptors().clone() };
        let bad = f.clone().with_descriptors(d).unwrap();
        assert!(matches!(
            propagate(&bad, &lam, 0.4, 0.1, 1e-12),
            Err(Error::NotCoercive { .. })
        ));
    }

    #[test]
    fn cocycle_and_refinement_consistency() {
        let f = test_form(5, 9, |t| t.powf(0.75));
        let lam = Subdivision::graded(1.0, 6, 0.8).unwrap();
        let p = Propagator::new(&f, &lam).unwrap();
        let tr = f.triple();
        for (t, r, s) in [(0.9, 0.5, 0.1), (0.3, 0.2, 0.05), (1.0, 0.999, 0.0), (0.7, 0.7, 0.2)] {
            let lhs = p.matrix(t, s).unwrap();
            let rhs = p.matrix(t, r).unwrap() * p.matrix(r, s).unwrap();
            assert!(tr.op_norm(&(lhs - rhs), Space::H).unwrap() < 1e-10);
        }
        // insert a point into a cell outside [s, t]
        let (t, s) = (0.5, 0.3);
        let u = p.matrix(t, s).unwrap();
        let finer = lam.insert(0.95).unwrap();
        let v = Propagator::new(&f, &finer).unwrap().matrix(t, s).unwrap();
        assert!((u - v).norm() < 1e-13);
    }

    #[test]
    fn rescaling_multiplies_by_exponential() {
        let f = test_form(4, 10, f64::cos);
        let lam = Subdivision::graded(1.0, 5, 1.4).unwrap();
        for w in [-1.0, 2.5] {
            let g = f.shift(w).unwrap();
            let (t, s) = (0.85, 0.15);
            let u = propagate(&f, &lam, t, s, 1e-12).unwrap().matrix;
            let v = propagate(&g, &lam, t, s, 1e-12).unwrap().matrix;
            let scaled = &u * c((-w * (t - s)).exp());
            assert!(f.triple().op_norm(&(v - scaled), Space::H).unwrap() < 1e-11);
        }
    }

    #[test]
    fn contractive_for_accretive_generators() {
        // Hermitian part of A(t) positive semidefinite for all t
        let mut r = rng(11);
        let m = rand_hpd(&mut r, 4, 0.5);
        let k = rand_hpd(&mut r, 4, 0.5);
        let triple = Arc::new(GelfandTriple::new(m, k.clone()).unwrap());
        let x = rand_mat(&mut r, 4);
        let skew = (&x - x.adjoint()) * c(0.5);
        let d = Descriptors {
            bound: 10.0,
            coercivity: 0.5,
            modulus: Modulus::Power { scale: 1.0, exponent: 1.0 },
            gamma: 0.5,
            quasi_shift: 0.0,
        };
        let kk = k.clone();
        let f = NonautonomousForm::new(
            triple,
            1.0,
            Arc::new(move |t| &kk * c(1.0 + t) + &skew * c((5.0 * t).sin())),
            d,
        )
        .unwrap();
        let lam = Subdivision::uniform(1.0, 7).unwrap();
        let p = Propagator::new(&f, &lam).unwrap();
        for (t, s) in [(1.0, 0.0), (0.6, 0.3), (0.2, 0.1)] {
            let norm = f.triple().op_norm(&p.matrix(t, s).unwrap(), Space::H).unwrap();
            assert!(norm <= 1.0 + 1e-10, "{norm}");
        }
    }

    #[test]
    fn reference_of_autonomous_form_stops_immediately() {
        let f = autonomous(4, 12);
        let r = reference_propagator(&f, 0.8, 0.1, 1e-10, 1e-12).unwrap();
        assert_eq!(r.level, 0);
        assert!(r.difference < 1e-12);
        let expected = step(&f.matrix_at(0.0).unwrap(), 0.7, f.triple(), 1e-12).unwrap();
        assert!((r.eval.matrix - expected).norm() < 1e-12);
    }

    #[test]
    fn convergence_study_cases() {
        let f = autonomous(4, 13);
        let table = convergence_study(&f, 0.9, 0.1, &[1, 2, 4, 8], 1e-10, 1e-12).unwrap();
        assert!(table.rows.iter().all(|r| r.error <= 1e-12));

        let g = test_form(4, 14, |t| t);
        let levels: Vec<usize> = (1..=8).map(|k| 1 << k).collect();
        let table = convergence_study(&g, 1.0, 0.0, &levels, 1e-11, 1e-12).unwrap();
        assert!(table.is_monotone(1e-13), "{table:?}");
        assert!(table.fitted_order.unwrap() > 1.5);

        assert!(convergence_study(&g, 0.9, 0.1, &[4, 2], 1e-8, 1e-12).is_err());
        assert!(convergence_study(&g, 0.5, 0.5, &[2, 4], 1e-8, 1e-12).is_err());
    }
}
