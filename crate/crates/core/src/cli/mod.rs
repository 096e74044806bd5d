//! Command-line driver: `evofam solve | converge | verify | modulus | export`.
//!
//! Every command reads a JSON [`RunConfig`], writes CSV tables and a JSON
//! report into the output directory and exits with 0 (all checks pass),
//! 1 (a check failed), 2 (invalid configuration or input) or 3 (numerical
//! failure).

pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forms::{check_dini, uniform_grid, NonautonomousForm};
use crate::gelfand::Space;
use crate::io;
use crate::linalg::{CVec, C64};
use crate::par;
use crate::propagator::{convergence_study, Propagator, DEFAULT_QUADRATURE_ORDER};
use crate::properties::{self, TimeTriple};

pub use config::RunConfig;
use config::InitialState;
use report::{complex, real, write_json, Check, Csv, Header, VerificationReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "evofam", version, about = "Evolution families of non-autonomous forms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Seed for random grids and problems (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Trajectory `U_Λ(t, 0) x₀` at sample times.
    Solve,
    /// Self-convergence table against a refined reference.
    Converge,
    /// Axioms, duality, V′ bound, uniformity, Dini and square-root checks.
    Verify,
    /// Norm-continuity tables in V, H and V′.
    Modulus,
    /// Tabulate the problem in the dense matrix format.
    Export,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Converge => "converge",
            Command::Verify => "verify",
            Command::Modulus => "modulus",
            Command::Export => "export",
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoConvergence(_) | Error::NonFinite(_) | Error::SpectrumNotSectorial { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    seed: u64,
    header: Header,
    form: NonautonomousForm,
}

/// Parse arguments, run the command and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    match run(&cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Run a parsed command; `Ok(false)` means a check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    if cli.threads == 0 {
        return Err(Error::Invalid("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        let ctx = prepare(cli)?;
        match cli.command {
            Command::Solve => solve(&ctx),
            Command::Converge => converge(&ctx),
            Command::Verify => verify(&ctx),
            Command::Modulus => modulus(&ctx),
            Command::Export => export(&ctx),
        }
    })
}

fn prepare(cli: &Cli) -> Result<Context> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Invalid("--config is required".into()))?;
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Invalid("config is not UTF-8".into()))?;
    let cfg = RunConfig::parse(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let seed = cli.seed.unwrap_or(cfg.seed);
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|o| base.join(o)))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let header = Header {
        tool: "evofam",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config_sha256: hex(&Sha256::digest(&bytes)),
        seed,
    };
    let form = cfg.build_form(&base, seed)?;
    Ok(Context {
        cfg,
        out,
        seed,
        header,
        form,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn propagator(ctx: &Context) -> Result<Propagator> {
    let lam = ctx.cfg.subdivision.build(ctx.form.horizon())?;
    Propagator::with_options(&ctx.form, &lam, DEFAULT_QUADRATURE_ORDER, ctx.cfg.tolerances.exp_tolerance)
}

fn initial_state(init: &InitialState, n: usize) -> Result<CVec> {
    match init {
        InitialState::Basis { index } => {
            if *index >= n {
                return Err(Error::Invalid(format!("basis index {index} >= dimension {n}")));
            }
            let mut x = CVec::zeros(n);
            x[*index] = C64::new(1.0, 0.0);
            Ok(x)
        }
        InitialState::Values { re, im } => {
            let im = im.clone().unwrap_or_else(|| vec![0.0; re.len()]);
            if re.len() != n || im.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: re.len().max(im.len()),
                });
            }
            Ok(CVec::from_fn(n, |i, _| C64::new(re[i], im[i])))
        }
    }
}

fn solve(ctx: &Context) -> Result<bool> {
    let form = &ctx.form;
    let horizon = form.horizon();
    let sc = &ctx.cfg.solve;
    let times = match &sc.times {
        Some(t) if t.is_empty() => return Err(Error::Invalid("empty list of sample times".into())),
        Some(t) => t.clone(),
        None => uniform_grid(horizon, sc.samples),
    };
    for &t in &times {
        if !(t.is_finite() && (0.0..=horizon).contains(&t)) {
            return Err(Error::TimeOutOfRange { t, horizon });
        }
    }
    let x0 = initial_state(&sc.initial, form.dim())?;
    let prop = propagator(ctx)?;
    let triple = form.triple();
    let states = par::try_map(&times, |&t| -> Result<(CVec, f64, f64)> {
        let u = prop.matrix(t, 0.0)? * &x0;
        let h = triple.norm(&u, Space::H)?;
        let v = triple.norm(&u, Space::V)?;
        Ok((u, h, v))
    })?;

    let mut columns = vec!["t".to_string()];
    columns.extend((0..form.dim()).map(|i| format!("c{i}")));
    let mut csv = Csv::new(&columns.iter().map(String::as_str).collect::<Vec<_>>());
    for (t, (u, _, _)) in times.iter().zip(&states) {
        csv.row(std::iter::once(real(*t)).chain(u.iter().map(|z| complex(*z))));
    }
    csv.write(&ctx.out.join("trajectory.csv"))?;
    let samples: Vec<_> = times
        .iter()
        .zip(&states)
        .map(|(t, s)| json!({"t": t, "norm_h": s.1, "norm_v": s.2}))
        .collect();
    write_json(
        &ctx.out.join("solve.json"),
        &json!({
            "header": ctx.header,
            "dim": form.dim(),
            "horizon": horizon,
            "cells": prop.subdivision().cells(),
            "samples": samples,
        }),
    )?;
    Ok(true)
}

fn converge(ctx: &Context) -> Result<bool> {
    let cc = &ctx.cfg.converge;
    let t = cc.t.unwrap_or(ctx.form.horizon());
    let levels = cc
        .levels
        .clone()
        .unwrap_or_else(|| (1..=8).map(|k| 1usize << k).collect());
    let tol = &ctx.cfg.tolerances;
    let table = convergence_study(&ctx.form, t, cc.s, &levels, tol.ref_tol, tol.exp_tolerance)?;
    let mut csv = Csv::new(&["cells", "mesh", "error", "order_so_far"]);
    for r in &table.rows {
        csv.row([
            r.cells.to_string(),
            real(r.mesh),
            real(r.error),
            r.order_so_far.map(real).unwrap_or_default(),
        ]);
    }
    csv.write(&ctx.out.join("convergence.csv"))?;
    let monotone = table.is_monotone(1e-13);
    write_json(
        &ctx.out.join("converge.json"),
        &json!({"header": ctx.header, "table": table, "monotone": monotone}),
    )?;
    Ok(monotone)
}

fn random_time(rng: &mut ChaCha8Rng, horizon: f64) -> f64 {
    horizon * rng.random::<f64>()
}

fn threshold_check(name: &'static str, value: f64, threshold: f64, details: serde_json::Value) -> Check {
    Check {
        name,
        value,
        threshold: Some(threshold),
        pass: value <= threshold,
        details,
    }
}

fn verify(ctx: &Context) -> Result<bool> {
    let form = &ctx.form;
    let horizon = form.horizon();
    let vc = &ctx.cfg.verify;
    let exp_tol = ctx.cfg.tolerances.exp_tolerance;
    let lam = ctx.cfg.subdivision.build(horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let triples: Vec<TimeTriple> = (0..vc.triples)
        .map(|_| {
            let mut x = [0.0; 3].map(|_| random_time(&mut rng, horizon));
            x.sort_by(f64::total_cmp);
            TimeTriple { s: x[0], r: x[1], t: x[2] }
        })
        .collect();
    let pairs: Vec<(f64, f64)> = (0..vc.pairs)
        .map(|_| {
            let (a, b) = (random_time(&mut rng, horizon), random_time(&mut rng, horizon));
            (a.max(b), a.min(b))
        })
        .collect();
    let th = &vc.thresholds;
    let mut checks = Vec::new();

    let axioms = properties::check_axioms(form, &lam, &triples, exp_tol)?;
    let details = serde_json::to_value(&axioms)?;
    checks.push(threshold_check("identity", axioms.max_identity_defect, th.identity, details.clone()));
    checks.push(threshold_check("cocycle", axioms.max_cocycle_defect, th.cocycle, details));

    let duality = properties::check_duality(form, &lam, &pairs, exp_tol, vc.wrong_partition)?;
    checks.push(threshold_check(
        "duality",
        duality.max_defect,
        th.duality,
        serde_json::to_value(&duality)?,
    ));

    let vprime = properties::vprime_extension_bound(form, &lam, &pairs, exp_tol)?;
    checks.push(threshold_check(
        "vprime_extension",
        vprime.agreement_defect,
        th.vprime_agreement,
        serde_json::to_value(&vprime)?,
    ));

    let uniformity = form.verify_uniformity(&uniform_grid(horizon, vc.uniformity_grid))?;
    checks.push(Check {
        name: "uniformity",
        value: uniformity.alpha_min,
        threshold: None,
        pass: uniformity.pass,
        details: serde_json::to_value(&uniformity)?,
    });

    let d = form.descriptors();
    let dini = check_dini(&d.modulus, d.gamma, horizon)?;
    checks.push(Check {
        name: "dini",
        value: dini.integral_value.unwrap_or(f64::INFINITY),
        threshold: None,
        pass: dini.passes(),
        details: json!({"modulus": d.modulus, "gamma": d.gamma, "report": dini}),
    });

    let kato_times = uniform_grid(horizon, vc.kato_grid);
    let kato = par::try_map(&kato_times, |&t| form.kato_constants(t))?;
    let low = kato.iter().map(|k| k.0).fold(f64::INFINITY, f64::min);
    let high = kato.iter().map(|k| k.1).fold(0.0, f64::max);
    checks.push(Check {
        name: "square_root",
        value: low,
        threshold: None,
        pass: low > 0.0 && high.is_finite(),
        details: json!({"times": kato_times, "constants": kato, "low": low, "high": high}),
    });

    let pass = checks.iter().all(|c| c.pass);
    let report = VerificationReport {
        header: ctx.header.clone(),
        dim: form.dim(),
        horizon,
        subdivision: lam.points().to_vec(),
        checks,
        pass,
    };
    write_json(&ctx.out.join("verify.json"), &report)?;
    Ok(pass)
}

fn modulus(ctx: &Context) -> Result<bool> {
    let form = &ctx.form;
    let horizon = form.horizon();
    let mc = &ctx.cfg.modulus;
    let epsilon = mc.epsilon.unwrap_or(horizon / 10.0);
    let pairs = properties::pair_grid(horizon, epsilon, mc.decades, mc.per_decade)?;
    let lam = crate::propagator::Subdivision::uniform(horizon, mc.cells)?;
    let spaces = [Space::V, Space::H, Space::Vprime];
    let tables = properties::continuity_moduli(
        form,
        &lam,
        &spaces,
        epsilon,
        &pairs,
        ctx.cfg.tolerances.exp_tolerance,
    )?;
    for table in &tables {
        let mut csv = Csv::new(&["t", "s", "t2", "s2", "delta", "increment"]);
        for e in &table.entries {
            csv.row([e.t, e.s, e.t2, e.s2, e.delta, e.increment].map(real));
        }
        csv.write(&ctx.out.join(format!("modulus_{}.csv", table.space)))?;
    }
    let ratio = properties::interpolation_ratio(&tables[1], &tables[0], &tables[2])?;
    let exponents: Vec<_> = tables
        .iter()
        .map(|t| json!({"space": t.space, "fitted_exponent": t.fitted_exponent}))
        .collect();
    let pass = tables.iter().all(|t| t.fitted_exponent.is_some_and(|e| e > 0.0)) && ratio <= 1.0 + 1e-6;
    write_json(
        &ctx.out.join("modulus.json"),
        &json!({
            "header": ctx.header,
            "epsilon": epsilon,
            "cells": mc.cells,
            "pairs": pairs.len(),
            "exponents": exponents,
            "interpolation_ratio": ratio,
            "pass": pass,
        }),
    )?;
    Ok(pass)
}

fn export(ctx: &Context) -> Result<bool> {
    let form = &ctx.form;
    let times = uniform_grid(form.horizon(), ctx.cfg.solve.samples);
    let triple = form.triple();
    io::write_matrix_file(&ctx.out.join("mass.txt"), &[triple.mass().clone()])?;
    io::write_matrix_file(&ctx.out.join("vgram.txt"), &[triple.vgram().clone()])?;
    let mats = times
        .iter()
        .map(|&t| form.matrix_at(t))
        .collect::<Result<Vec<_>>>()?;
    io::write_matrix_file(&ctx.out.join("forms.txt"), &mats)?;
    let problem = io::ProblemFile {
        mass: "mass.txt".into(),
        vgram: "vgram.txt".into(),
        matrices: "forms.txt".into(),
        times,
        gamma: form.descriptors().gamma,
    };
    write_json(&ctx.out.join("problem.json"), &problem)?;
    Ok(true)
}
