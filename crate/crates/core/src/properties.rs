//! Discrete checks of the structural properties of `U_Λ`: the evolution
//! family axioms, duality with the returned adjoint family, the bound of the
//! extension to V′ and norm continuity away from the diagonal.
//!
//! Times are ordered as `s ≤ r ≤ t` throughout. Every check evaluates its
//! grid in parallel and reduces in grid order, so reports are deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::forms::NonautonomousForm;
use crate::gelfand::Space;
use crate::linalg::{self, matmul};
use crate::par;
use crate::propagator::{Propagator, Subdivision, DEFAULT_QUADRATURE_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeTriple {
    pub s: f64,
    pub r: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub max_identity_defect: f64,
    pub max_cocycle_defect: f64,
    pub triples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub max_defect: f64,
    pub pairs: usize,
    /// Whether the right-hand side deliberately used `Λ` instead of `Λ_T`.
    pub wrong_partition: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VprimeReport {
    /// `max ‖U_Λ(t,s)‖_{L(V′)}` from the V′ extension.
    pub direct_sup: f64,
    /// `max ‖U*_{r,Λ_T}(T−s, T−t)‖_{L(V)}` over the same grid.
    pub adjoint_sup: f64,
    /// Largest pointwise disagreement between the two routes.
    pub agreement_defect: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusEntry {
    pub t: f64,
    pub s: f64,
    pub t2: f64,
    pub s2: f64,
    pub delta: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusTable {
    pub space: Space,
    pub epsilon: f64,
    pub entries: Vec<ModulusEntry>,
    pub fitted_exponent: Option<f64>,
}

/// Pair of points `((t, s), (t′, s′))` of the triangle `s ≤ t`.
pub type PointPair = ((f64, f64), (f64, f64));

fn check_ordered(form: &NonautonomousForm, t: f64, s: f64) -> Result<()> {
    for x in [t, s] {
        if !(x.is_finite() && (0.0..=form.horizon()).contains(&x)) {
            return Err(Error::TimeOutOfRange {
                t: x,
                horizon: form.horizon(),
            });
        }
    }
    if s > t {
        return Err(Error::NotOrdered { t, s });
    }
    Ok(())
}

fn nonempty<T>(grid: &[T], what: &str) -> Result<()> {
    if grid.is_empty() {
        Err(Error::Invalid(format!("empty {what} grid")))
    } else {
        Ok(())
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// `max ‖U_Λ(x,x) − I‖` over every time in the grid and
/// `max ‖U_Λ(t,s) − U_Λ(t,r)U_Λ(r,s)‖`, both in `L(H)`.
pub fn check_axioms(
    form: &NonautonomousForm,
    subdivision: &Subdivision,
    triples: &[TimeTriple],
    exp_tolerance: f64,
) -> Result<AxiomReport> {
    nonempty(triples, "axiom")?;
    for tr in triples {
        check_ordered(form, tr.r, tr.s)?;
        check_ordered(form, tr.t, tr.r)?;
    }
    let prop = Propagator::with_options(form, subdivision, DEFAULT_QUADRATURE_ORDER, exp_tolerance)?;
    let triple = form.triple();
    let eye = linalg::identity(form.dim());
    let defects = par::try_map(triples, |tr| -> Result<(f64, f64)> {
        let mut identity: f64 = 0.0;
        for x in [tr.s, tr.r, tr.t] {
            identity = identity.max(triple.op_norm(&(prop.matrix(x, x)? - &eye), Space::H)?);
        }
        let whole = prop.matrix(tr.t, tr.s)?;
        let split = matmul(&prop.matrix(tr.t, tr.r)?, &prop.matrix(tr.r, tr.s)?);
        Ok((identity, triple.op_norm(&(whole - split), Space::H)?))
    })?;
    Ok(AxiomReport {
        max_identity_defect: max_of(defects.iter().map(|d| d.0)),
        max_cocycle_defect: max_of(defects.iter().map(|d| d.1)),
        triples: triples.len(),
    })
}

/// `max ‖h_adjoint(U*_{r,Λ}(t,s)) − U_{Λ_T}(T−s, T−t)‖_{L(H)}`, where `U*_r`
/// is the family of the returned adjoint form and `Λ_T` the reflected
/// subdivision. With `wrong_partition` the right-hand side uses `Λ` itself,
/// which breaks the identity for nonsymmetric subdivisions.
pub fn check_duality(
    form: &NonautonomousForm,
    subdivision: &Subdivision,
    pairs: &[(f64, f64)],
    exp_tolerance: f64,
    wrong_partition: bool,
) -> Result<DualityReport> {
    nonempty(pairs, "duality")?;
    for &(t, s) in pairs {
        check_ordered(form, t, s)?;
    }
    let horizon = form.horizon();
    let adjoint = form.returned_adjoint_form();
    let reflected = if wrong_partition {
        subdivision.clone()
    } else {
        subdivision.reverse()
    };
    let left = Propagator::with_options(&adjoint, subdivision, DEFAULT_QUADRATURE_ORDER, exp_tolerance)?;
    let right = Propagator::with_options(form, &reflected, DEFAULT_QUADRATURE_ORDER, exp_tolerance)?;
    let triple = form.triple();
    let defects = par::try_map(pairs, |&(t, s)| -> Result<f64> {
        let l = triple.h_adjoint(&left.matrix(t, s)?)?;
        let r = right.matrix(horizon - s, horizon - t)?;
        triple.op_norm(&(l - r), Space::H)
    })?;
    Ok(DualityReport {
        max_defect: max_of(defects),
        pairs: pairs.len(),
        wrong_partition,
    })
}

/// Bound `c` of the V′ extension of `U_Λ`, computed twice: directly from the
/// extension `M·U·M⁻¹` in the dual norm, and as the `L(V)` norm of the
/// returned adjoint family on the reflected subdivision.
pub fn vprime_extension_bound(
    form: &NonautonomousForm,
    subdivision: &Subdivision,
    pairs: &[(f64, f64)],
    exp_tolerance: f64,
) -> Result<VprimeReport> {
    nonempty(pairs, "V' extension")?;
    for &(t, s) in pairs {
        check_ordered(form, t, s)?;
    }
    let horizon = form.horizon();
    let forward = Propagator::with_options(form, subdivision, DEFAULT_QUADRATURE_ORDER, exp_tolerance)?;
    let backward = Propagator::with_options(
        &form.returned_adjoint_form(),
        &subdivision.reverse(),
        DEFAULT_QUADRATURE_ORDER,
        exp_tolerance,
    )?;
    let triple = form.triple();
    let norms = par::try_map(pairs, |&(t, s)| -> Result<(f64, f64)> {
        let direct = triple.extension_norm_vprime(&forward.matrix(t, s)?)?;
        let dual = triple.op_norm(&backward.matrix(horizon - s, horizon - t)?, Space::V)?;
        Ok((direct, dual))
    })?;
    Ok(VprimeReport {
        direct_sup: max_of(norms.iter().map(|n| n.0)),
        adjoint_sup: max_of(norms.iter().map(|n| n.1)),
        agreement_defect: max_of(norms.iter().map(|n| (n.0 - n.1).abs())),
        pairs: pairs.len(),
    })
}

/// Operator-norm increments `‖U_Λ(t,s) − U_Λ(t′,s′)‖_{L(X)}` over pairs of
/// points at distance ≥ ε from the diagonal, with the least-squares
/// log-log slope against `δ = |t−t′| + |s−s′|`. The V′ norm is evaluated
/// through duality, as the `L(V)` norm of the H-adjoint.
pub fn continuity_modulus(
    form: &NonautonomousForm,
    subdivision: &Subdivision,
    space: Space,
    epsilon: f64,
    pairs: &[PointPair],
    exp_tolerance: f64,
) -> Result<ModulusTable> {
    Ok(continuity_moduli(form, subdivision, &[space], epsilon, pairs, exp_tolerance)?
        .pop()
        .expect("one space requested"))
}

/// [`continuity_modulus`] for several spaces sharing the propagator
/// evaluations.
pub fn continuity_moduli(
    form: &NonautonomousForm,
    subdivision: &Subdivision,
    spaces: &[Space],
    epsilon: f64,
    pairs: &[PointPair],
    exp_tolerance: f64,
) -> Result<Vec<ModulusTable>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            range: "(0, inf)".into(),
        });
    }
    nonempty(pairs, "modulus")?;
    for space in spaces {
        if matches!(space, Space::Vgamma(_)) {
            return Err(Error::Invalid("continuity moduli are tabulated in V, H and Vprime".into()));
        }
    }
    for &((t, s), (t2, s2)) in pairs {
        check_ordered(form, t, s)?;
        check_ordered(form, t2, s2)?;
        if t - s < epsilon || t2 - s2 < epsilon {
            return Err(Error::Invalid(format!(
                "pair (({t}, {s}), ({t2}, {s2})) is closer than {epsilon} to the diagonal"
            )));
        }
    }
    let prop = Propagator::with_options(form, subdivision, DEFAULT_QUADRATURE_ORDER, exp_tolerance)?;
    let triple = form.triple();
    let increments = par::try_map(pairs, |&((t, s), (t2, s2))| -> Result<Vec<f64>> {
        let d = prop.matrix(t, s)? - prop.matrix(t2, s2)?;
        spaces.iter().map(|&sp| triple.op_norm(&d, sp)).collect()
    })?;
    Ok(spaces
        .iter()
        .enumerate()
        .map(|(i, &space)| {
            let entries: Vec<ModulusEntry> = pairs
                .iter()
                .zip(&increments)
                .map(|(&((t, s), (t2, s2)), inc)| ModulusEntry {
                    t,
                    s,
                    t2,
                    s2,
                    delta: (t - t2).abs() + (s - s2).abs(),
                    increment: inc[i],
                })
                .collect();
            let deltas: Vec<f64> = entries.iter().map(|e| e.delta).collect();
            let incs: Vec<f64> = entries.iter().map(|e| e.increment).collect();
            ModulusTable {
                space,
                epsilon,
                fitted_exponent: fit::loglog_slope(&deltas, &incs),
                entries,
            }
        })
        .collect())
}

/// Pairs around a few base points of `{t − s ≥ ε}` with `δ` geometric over
/// `decades` decades (`per_decade` values each), largest `δ = ε/2`. Each
/// pair moves `t` forward and `s` backward by `δ/2` where room allows, or the
/// whole point otherwise, so both ends stay ε-separated.
pub fn pair_grid(horizon: f64, epsilon: f64, decades: usize, per_decade: usize) -> Result<Vec<PointPair>> {
    if !(epsilon > 0.0 && epsilon < horizon / 2.0) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            range: format!("(0, {})", horizon / 2.0),
        });
    }
    if decades == 0 || per_decade == 0 {
        return Err(Error::Invalid("pair grid needs at least one decade and one point per decade".into()));
    }
    let bases = [
        (0.5 * horizon + epsilon, 0.5 * horizon - epsilon),
        (horizon - epsilon, 0.25 * horizon),
        (0.75 * horizon, 0.0),
    ];
    let steps = decades * per_decade;
    let mut pairs = Vec::with_capacity(bases.len() * (steps + 1));
    for &(t, s) in &bases {
        for k in 0..=steps {
            let delta = 0.5 * epsilon * 10f64.powf(-(k as f64) / per_decade as f64);
            let (t2, s2) = if t + 0.5 * delta <= horizon && s - 0.5 * delta >= 0.0 {
                (t + 0.5 * delta, s - 0.5 * delta)
            } else if t + delta <= horizon {
                (t + delta, s)
            } else {
                (t, s - delta)
            };
            pairs.push(((t, s), (t2, s2)));
        }
    }
    Ok(pairs)
}

/// Largest `‖·‖_H / sqrt(‖·‖_V · ‖·‖_{V′})` over the entries of three tables
/// built on the same pairs; the Hilbert-scale interpolation inequality says
/// it is at most one.
pub fn interpolation_ratio(h: &ModulusTable, v: &ModulusTable, vprime: &ModulusTable) -> Result<f64> {
    let n = h.entries.len();
    if v.entries.len() != n || vprime.entries.len() != n {
        return Err(Error::Invalid("modulus tables cover different pairs".into()));
    }
    Ok(max_of((0..n).map(|i| {
        let denom = (v.entries[i].increment * vprime.entries[i].increment).sqrt();
        if denom > 0.0 {
            h.entries[i].increment / denom
        } else {
            0.0
        }
    })))
}
