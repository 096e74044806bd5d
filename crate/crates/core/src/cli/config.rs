//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::examples::{self, RobinProblem, SchrodingerProblem, Smoothness};
use crate::forms::NonautonomousForm;
use crate::io;
use crate::propagator::{Subdivision, DEFAULT_EXP_TOLERANCE};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    /// H-shift `ω_s` applied to the form before anything else.
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub subdivision: SubdivisionConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub converge: ConvergeConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub modulus: ModulusConfig,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seed for random grids and random problems; `--seed` takes precedence.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Robin(RobinProblem),
    Schrodinger(SchrodingerProblem),
    Random(RandomConfig),
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomConfig {
    pub n: usize,
    /// Defaults to the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "lipschitz")]
    pub smoothness: Smoothness,
}

fn lipschitz() -> Smoothness {
    Smoothness::Lipschitz
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_exp_tol")]
    pub exp_tolerance: f64,
    #[serde(default = "default_ref_tol")]
    pub ref_tol: f64,
}

fn default_exp_tol() -> f64 {
    DEFAULT_EXP_TOLERANCE
}

fn default_ref_tol() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exp_tolerance: default_exp_tol(),
            ref_tol: default_ref_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubdivisionConfig {
    Uniform { cells: usize },
    Graded { cells: usize, ratio: f64 },
    /// Explicit points from 0 to the horizon.
    Points { points: Vec<f64> },
}

impl Default for SubdivisionConfig {
    fn default() -> Self {
        SubdivisionConfig::Graded { cells: 8, ratio: 1.5 }
    }
}

impl SubdivisionConfig {
    pub fn build(&self, horizon: f64) -> Result<Subdivision> {
        match self {
            SubdivisionConfig::Uniform { cells } => Subdivision::uniform(horizon, *cells),
            SubdivisionConfig::Graded { cells, ratio } => Subdivision::graded(horizon, *cells, *ratio),
            SubdivisionConfig::Points { points } => Subdivision::from_points(points.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Unit coefficient vector `e_index`.
    Basis { index: usize },
    Values {
        re: Vec<f64>,
        #[serde(default)]
        im: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "basis0")]
    pub initial: InitialState,
    /// Sample times; defaults to `samples + 1` equispaced times on [0, T].
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn basis0() -> InitialState {
    InitialState::Basis { index: 0 }
}

fn default_samples() -> usize {
    20
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            initial: basis0(),
            times: None,
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    /// Defaults to T.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub s: f64,
    /// Uniform cell counts; defaults to 2, 4, …, 256.
    #[serde(default)]
    pub levels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random `(s, r, t)` triples for the axioms.
    #[serde(default = "default_triples")]
    pub triples: usize,
    /// Random `(t, s)` pairs for duality and the V′ bound.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Intervals of the uniform grid certifying α and M.
    #[serde(default = "default_grid")]
    pub uniformity_grid: usize,
    /// Intervals of the uniform grid for the square-root constants.
    #[serde(default = "default_kato")]
    pub kato_grid: usize,
    /// Use `Λ` instead of `Λ_T` on the right of the duality identity.
    #[serde(default)]
    pub wrong_partition: bool,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_triples() -> usize {
    50
}
fn default_pairs() -> usize {
    10
}
fn default_grid() -> usize {
    40
}
fn default_kato() -> usize {
    4
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            triples: default_triples(),
            pairs: default_pairs(),
            uniformity_grid: default_grid(),
            kato_grid: default_kato(),
            wrong_partition: false,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default)]
    pub identity: f64,
    #[serde(default = "cocycle")]
    pub cocycle: f64,
    #[serde(default = "duality")]
    pub duality: f64,
    #[serde(default = "duality")]
    pub vprime_agreement: f64,
}

fn cocycle() -> f64 {
    1e-10
}
fn duality() -> f64 {
    1e-9
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            identity: 0.0,
            cocycle: cocycle(),
            duality: duality(),
            vprime_agreement: duality(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusConfig {
    /// Distance from the diagonal; defaults to T/10.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "two")]
    pub decades: usize,
    #[serde(default = "three")]
    pub per_decade: usize,
    /// Uniform cells of the fine subdivision.
    #[serde(default = "default_fine")]
    pub cells: usize,
}

fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn default_fine() -> usize {
    128
}

impl Default for ModulusConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            decades: two(),
            per_decade: three(),
            cells: default_fine(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [("exp_tolerance", t.exp_tolerance), ("ref_tol", t.ref_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "(0, inf)".into(),
                });
            }
        }
        if !self.shift.is_finite() {
            return Err(Error::NonFinite("shift"));
        }
        Ok(())
    }

    /// Build the (shifted) form; relative file paths resolve against `base`.
    pub fn build_form(&self, base: &Path, seed: u64) -> Result<NonautonomousForm> {
        let built = match &self.problem {
            ProblemConfig::Robin(p) => examples::build_robin(p)?,
            ProblemConfig::Schrodinger(p) => examples::build_schrodinger(p)?,
            ProblemConfig::Random(r) => examples::random_problem(r.n, r.seed.unwrap_or(seed), r.smoothness)?,
            ProblemConfig::File { path } => {
                let form = io::load_problem_file(&base.join(path))?;
                examples::Built {
                    form,
                    required_shift: None,
                    lower_order_constant: None,
                }
            }
        };
        let form = built.form.shift(self.shift)?;
        if !(form.descriptors().coercivity > 0.0) {
            let hint = built
                .required_shift
                .map(|w| format!("; a shift of at least {w:.6} is required"))
                .unwrap_or_default();
            return Err(Error::Invalid(format!(
                "the form is not coercive (constant {:.3e}){hint}",
                form.descriptors().coercivity
            )));
        }
        Ok(form)
    }
}
