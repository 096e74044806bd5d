//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and returns a flat `Float64Array`, so
//! the page needs no glue beyond what `wasm-bindgen` generates. Errors come
//! back as rejected calls carrying a message string.
//!
//! Problems are selected by name:
//!
//! * `"robin"`: heat equation with a Hölder-in-time Robin coefficient;
//!   `param` is the Hölder exponent in `(0, 1]`.
//! * `"schrodinger"`: Schrödinger-type operator with a fractional lower-order
//!   term; `param` is the amplitude of the time-dependent coefficient.
//! * `"random"`: a random nonsymmetric problem; `param` is the seed.

use evofam::examples::{build_robin, build_schrodinger, random_problem, RobinProblem, SchrodingerProblem, Smoothness};
use evofam::linalg::{c, CVec};
use evofam::propagator::convergence_study;
use evofam::properties::check_duality;
use evofam::{NonautonomousForm, Propagator, Space, Subdivision};
use wasm_bindgen::prelude::*;

const EXP_TOLERANCE: f64 = 1e-12;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn build(problem: &str, size: usize, param: f64) -> Result<NonautonomousForm, String> {
    let built = match problem {
        "robin" => build_robin(&RobinProblem {
            n_elems: size,
            holder: param,
            ..RobinProblem::default()
        }),
        "schrodinger" => build_schrodinger(&SchrodingerProblem {
            n_elems: size,
            mu_amp: param,
            ..SchrodingerProblem::default()
        }),
        "random" => {
            if !(param >= 0.0 && param.is_finite()) {
                return Err(format!("seed must be a non-negative number, got {param}"));
            }
            random_problem(size, param as u64, Smoothness::Holder { alpha: 0.5 })
        }
        other => return Err(format!("unknown problem `{other}`")),
    }
    .map_err(err)?;
    match built.required_shift {
        Some(omega) => built.form.shift(omega).map_err(err),
        None => Ok(built.form),
    }
}

/// Start vector: constant in H-normalized coordinates.
fn start_vector(form: &NonautonomousForm) -> Result<CVec, String> {
    let u = CVec::from_element(form.dim(), c(1.0));
    let norm = form.triple().norm(&u, Space::H).map_err(err)?;
    Ok(u / c(norm))
}

/// Dimension of the discrete problem, for display.
#[wasm_bindgen]
pub fn dimension(problem: &str, size: usize, param: f64) -> Result<usize, String> {
    Ok(build(problem, size, param)?.dim())
}

/// Solution `u(t) = U_Λ(t, 0) u₀` on `cells` uniform cells, sampled at
/// `samples + 1` equispaced times. Returns rows `[t, ‖u‖_H, ‖u‖_V]`
/// followed by the final coefficient vector (real parts, `dim` values).
#[wasm_bindgen]
pub fn trajectory(problem: &str, size: usize, param: f64, cells: usize, samples: usize) -> Result<Vec<f64>, String> {
    let form = build(problem, size, param)?;
    if samples == 0 {
        return Err("need at least one sample".into());
    }
    let horizon = form.horizon();
    let lam = Subdivision::uniform(horizon, cells).map_err(err)?;
    let prop = Propagator::new(&form, &lam).map_err(err)?;
    let triple = form.triple();
    let u0 = start_vector(&form)?;
    let mut out = Vec::with_capacity(3 * (samples + 1) + form.dim());
    let mut last = u0.clone();
    for j in 0..=samples {
        let t = horizon * j as f64 / samples as f64;
        let u = prop.matrix(t, 0.0).map_err(err)? * &u0;
        out.extend([t, triple.norm(&u, Space::H).map_err(err)?, triple.norm(&u, Space::V).map_err(err)?]);
        last = u;
    }
    out.extend(last.iter().map(|z| z.re));
    Ok(out)
}

/// Error of `U_Λ(T, 0)` on `2, 4, …, 2^max_level` uniform cells against an
/// adaptive reference. Returns rows `[cells, error]`.
#[wasm_bindgen]
pub fn convergence(problem: &str, size: usize, param: f64, max_level: u32) -> Result<Vec<f64>, String> {
    if !(1..=10).contains(&max_level) {
        return Err(format!("max level must lie in 1..=10, got {max_level}"));
    }
    let form = build(problem, size, param)?;
    let levels: Vec<usize> = (1..=max_level).map(|k| 1usize << k).collect();
    let table = convergence_study(&form, form.horizon(), 0.0, &levels, 1e-7, EXP_TOLERANCE).map_err(err)?;
    Ok(table.rows.iter().flat_map(|r| [r.cells as f64, r.error]).collect())
}

/// Duality defect on a graded subdivision with `cells` cells and grading
/// `ratio`, over `pairs` equispaced pairs `(t, s)`. Returns
/// `[defect with the reflected subdivision, defect with the original one]`;
/// only the first vanishes.
#[wasm_bindgen]
pub fn duality(problem: &str, size: usize, param: f64, cells: usize, ratio: f64, pairs: usize) -> Result<Vec<f64>, String> {
    let form = build(problem, size, param)?;
    let horizon = form.horizon();
    let lam = Subdivision::graded(horizon, cells, ratio).map_err(err)?;
    let grid: Vec<(f64, f64)> = (0..pairs.max(1))
        .map(|k| {
            let x = (k as f64 + 0.5) / pairs.max(1) as f64;
            (horizon * (0.5 + 0.5 * x), horizon * 0.5 * x * x)
        })
        .collect();
    let right = check_duality(&form, &lam, &grid, EXP_TOLERANCE, false).map_err(err)?;
    let wrong = check_duality(&form, &lam, &grid, EXP_TOLERANCE, true).map_err(err)?;
    Ok(vec![right.max_defect, wrong.max_defect])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_decays_and_has_expected_layout() {
        let out = trajectory("robin", 16, 0.75, 8, 4).unwrap();
        let dim = dimension("robin", 16, 0.75).unwrap();
        assert_eq!(out.len(), 15 + dim);
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 1.0).abs() < 1e-12);
        for row in 1..5 {
            assert!(out[3 * row + 1] < out[3 * (row - 1) + 1]);
        }
        assert!((out[12] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn convergence_errors_shrink() {
        let out = convergence("schrodinger", 8, 0.5, 5).unwrap();
        assert_eq!(out.len(), 10);
        assert!(out[9] < out[1]);
        assert_eq!(out[8], 32.0);
    }

    #[test]
    fn duality_distinguishes_the_partitions() {
        let d = duality("random", 5, 3.0, 6, 1.5, 5).unwrap();
        assert!(d[0] < 1e-10, "{d:?}");
        assert!(d[1] > 1e-4, "{d:?}");
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(trajectory("heat", 8, 0.5, 4, 4).unwrap_err().contains("unknown"));
        assert!(trajectory("robin", 8, 1.5, 4, 4).is_err());
        assert!(convergence("robin", 8, 0.5, 0).is_err());
        assert!(duality("random", 4, -1.0, 4, 1.5, 3).is_err());
    }

    #[test]
    fn start_vector_is_normalized() {
        let form = build("random", 4, 1.0).unwrap();
        let u = start_vector(&form).unwrap();
        assert!((form.triple().norm(&u, Space::H).unwrap() - 1.0).abs() < 1e-14);
    }
}
