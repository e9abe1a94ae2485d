use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use nehari::affine::AffineModel;
use nehari::fibering::{direct_profile, fibering_profile, log_spaced, solve_t_c, solve_t_nehari, FiberingResult, ProfileRow};
use nehari::solver::{
    deflated_search, ground_state, minimax_nested, sweep_c, AffineProblem, DirectProblem, PrescribedEnergyProblem, ReducedProblem,
    SolveOptions, SolveResult,
};
use nehari::validate::{
    check_A_conditions, check_bn_threshold, check_f3_coercivity, check_h1, check_ray_shape, check_scalar_condition,
    prescribed_energy_oracle_1d, shooting_oracle_1d, sobolev_constant_estimate, ConditionParams, OracleOutcome, ScalarCondition,
    ShootingOptions, Sign, ValidationReport,
};
use nehari::{Field, Grid, ModelKind, ModelSpec, Nonlinearity};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Problem, RunConfig};
use crate::fieldio::{field_to_csv, load_field};
use crate::{ConfigError, EXIT_HYPOTHESIS, EXIT_NO_CONVERGENCE, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Solve,
    Sweep,
    Minimax,
    Fibering,
    Validate,
    Oracle,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::Sweep => "sweep",
            Subcommand::Minimax => "minimax",
            Subcommand::Fibering => "fibering",
            Subcommand::Validate => "validate",
            Subcommand::Oracle => "oracle",
        }
    }
}

/// What a subcommand produced, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: Value,
    /// Extra files (name, contents) for the run directory.
    pub files: Vec<(String, String)>,
    pub status: u8,
    /// Human-readable lines for stdout.
    pub summary: String,
}

impl Outcome {
    fn new(result: Value, status: u8, summary: String) -> Self {
        Outcome { result, files: Vec::new(), status, summary }
    }
}

/// A finished run on disk.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub status: u8,
    pub summary: String,
}

fn build_grid(cfg: &RunConfig) -> Result<Grid<f64>> {
    Ok(Grid::new(cfg.grid.dim, cfg.grid.n)?)
}

fn solve_options(cfg: &RunConfig, grid: &Grid<f64>) -> Result<SolveOptions<f64>> {
    let mut opts = cfg.solver.clone();
    if let Some(path) = &cfg.solve.start {
        opts.start = Some(load_field(path, grid)?);
    }
    Ok(opts)
}

/// Runs `f` on the reduced problem the configuration selects: the
/// prescribed-energy quotient when `c` is set, the direct Nehari problem
/// otherwise.
fn with_problem<R>(cfg: &RunConfig, grid: &Grid<f64>, f: impl FnOnce(&dyn ReducedProblem<f64>) -> Result<R>) -> Result<R> {
    let c = cfg.single_c()?;
    let fiber_tol = cfg.solver.fiber_tol;
    match &cfg.problem {
        Problem::Model { kind, eps } => {
            let model = ModelSpec::new(grid, *kind, *eps)?;
            match c {
                Some(c) => {
                    if !model.supports_prescribed_energy() {
                        return Err(ConfigError(format!("the {} model takes no c", kind.name())).into());
                    }
                    let mut p = PrescribedEnergyProblem::new(&model, c)?;
                    p.fiber_tol = fiber_tol;
                    f(&p)
                }
                None => {
                    let mut p = DirectProblem::new(&model);
                    p.fiber_tol = fiber_tol;
                    f(&p)
                }
            }
        }
        Problem::Affine(a) => {
            if c.is_some() {
                return Err(ConfigError("the affine model takes no c".into()).into());
            }
            let model = AffineModel::new(grid, a.p, a.directions, a.nonlinearity)?;
            let mut p = AffineProblem::new(&model);
            p.fiber_tol = fiber_tol;
            f(&p)
        }
    }
}

fn model_flags(cfg: &RunConfig, grid: &Grid<f64>) -> Vec<String> {
    match &cfg.problem {
        Problem::Model { kind, eps } => ModelSpec::new(grid, *kind, *eps).map(|m| m.flags()).unwrap_or_default(),
        Problem::Affine(_) => Vec::new(),
    }
}

fn trace_csv(r: &SolveResult<f64>) -> String {
    let mut out = String::from("iteration,value,residual\n");
    for (i, e) in r.trace.iter().enumerate() {
        writeln!(out, "{i},{:.16e},{:.16e}", e.value, e.residual).unwrap();
    }
    out
}

fn solution_json(r: &SolveResult<f64>) -> Value {
    json!({
        "lambda": r.lambda,
        "energy_gap": r.energy_gap,
        "level": r.level,
        "t": r.t,
        "residual": r.residual,
        "iterations": r.iterations,
        "converged": r.converged,
    })
}

fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let grid = build_grid(cfg)?;
    let opts = solve_options(cfg, &grid)?;
    let count = cfg.solve.solutions.max(1);
    let (solutions, incomplete) = with_problem(cfg, &grid, |p| {
        if count == 1 {
            Ok((vec![ground_state(p, &opts)?], false))
        } else {
            let d = deflated_search(p, count, &opts)?;
            Ok((d.solutions, d.incomplete))
        }
    })?;
    let first = solutions.first().ok_or_else(|| anyhow::anyhow!("no solution found"))?;
    let mut result = solution_json(first);
    let obj = result.as_object_mut().unwrap();
    obj.insert("model".into(), json!(cfg.problem.name()));
    obj.insert("grid".into(), json!({ "dim": grid.dim(), "n": grid.n() }));
    obj.insert("c".into(), json!(cfg.single_c()?));
    obj.insert("flags".into(), json!(model_flags(cfg, &grid)));
    if count > 1 {
        obj.insert("solutions".into(), Value::Array(solutions.iter().map(solution_json).collect()));
        obj.insert("incomplete".into(), json!(incomplete));
    }
    let all_converged = solutions.iter().all(|s| s.converged) && !incomplete;
    let status = if all_converged { EXIT_OK } else { EXIT_NO_CONVERGENCE };
    let mut summary = String::new();
    for (k, s) in solutions.iter().enumerate() {
        writeln!(
            summary,
            "solution {k}: level {:.12e}, lambda {}, residual {:.3e}, iterations {}, converged {}",
            s.level,
            s.lambda.map_or("-".to_string(), |l| format!("{l:.12e}")),
            s.residual,
            s.iterations,
            s.converged
        )
        .unwrap();
    }
    let mut out = Outcome::new(result, status, summary);
    for (k, s) in solutions.iter().enumerate() {
        let suffix = if count == 1 { String::new() } else { format!("_{k}") };
        out.files.push((format!("solution{suffix}.csv"), field_to_csv(&grid, &s.u)));
        out.files.push((format!("trace{suffix}.csv"), trace_csv(s)));
    }
    Ok(out)
}

fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let grid = build_grid(cfg)?;
    let c_values = cfg.c_values();
    if c_values.is_empty() {
        return Err(ConfigError("sweep needs at least one value of c".into()).into());
    }
    let Problem::Model { kind, eps } = &cfg.problem else {
        return Err(ConfigError("sweep needs a prescribed-energy model".into()).into());
    };
    let model = ModelSpec::new(&grid, *kind, *eps)?;
    if !model.supports_prescribed_energy() {
        return Err(ConfigError(format!("the {} model has no prescribed-energy sweep", kind.name())).into());
    }
    let opts = solve_options(cfg, &grid)?;
    let rows = sweep_c(&model, &c_values, &opts)?;
    let mut csv = String::from("c,lambda_1c,residual,converged\n");
    let mut summary = String::new();
    for r in &rows {
        let lam = r.lambda.map_or(String::new(), |l| format!("{l:.16e}"));
        let res = r.residual.map_or(String::new(), |l| format!("{l:.16e}"));
        writeln!(csv, "{},{lam},{res},{}", r.c, r.converged).unwrap();
        writeln!(summary, "c = {}: lambda_1c = {lam}, converged {}", r.c, r.converged).unwrap();
    }
    let status = if rows.iter().all(|r| r.converged) { EXIT_OK } else { EXIT_NO_CONVERGENCE };
    let result = json!({
        "model": kind.name(),
        "grid": { "dim": grid.dim(), "n": grid.n() },
        "rows": rows,
        "converged": status == EXIT_OK,
    });
    let mut out = Outcome::new(result, status, summary);
    out.files.push(("sweep.csv".into(), csv));
    Ok(out)
}

fn minimax(cfg: &RunConfig) -> Result<Outcome> {
    let grid = build_grid(cfg)?;
    let opts = solve_options(cfg, &grid)?;
    let n_max = cfg.minimax.n_max;
    if n_max == 0 {
        return Err(ConfigError("minimax.n_max must be at least 1".into()).into());
    }
    let est = with_problem(cfg, &grid, |p| Ok(minimax_nested(p, n_max, &opts)?))?;
    let mut csv = String::from("n,value,subspace_dim,inner_iterations\n");
    let mut summary = String::new();
    for e in &est {
        writeln!(csv, "{},{:.16e},{},{}", e.n, e.value, e.subspace_dim, e.inner_iterations).unwrap();
        writeln!(summary, "level {}: {:.12e}", e.n, e.value).unwrap();
    }
    let result = json!({
        "model": cfg.problem.name(),
        "grid": { "dim": grid.dim(), "n": grid.n() },
        "c": cfg.single_c()?,
        "estimates": est,
    });
    let mut out = Outcome::new(result, EXIT_OK, summary);
    out.files.push(("minimax.csv".into(), csv));
    Ok(out)
}

fn profile_csv(rows: &[ProfileRow<f64>]) -> String {
    let mut out = String::from("t,value,derivative\n");
    for r in rows {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", r.t, r.value, r.derivative).unwrap();
    }
    out
}

fn fibering(cfg: &RunConfig) -> Result<Outcome> {
    let grid = build_grid(cfg)?;
    let fc = &cfg.fibering;
    if !(fc.t_min > 0.0 && fc.t_max > fc.t_min) || fc.points < 2 {
        return Err(ConfigError("fibering needs 0 < t_min < t_max and at least 2 points".into()).into());
    }
    let u = match &fc.field {
        Some(path) => load_field(path, &grid)?,
        None => grid.laplacian_eigenbasis(1)?.remove(0).1,
    };
    let ts = log_spaced(fc.t_min, fc.t_max, fc.points);
    let c = cfg.single_c()?;
    let tol = cfg.solver.fiber_tol;
    let (rows, root): (Vec<ProfileRow<f64>>, nehari::Result<FiberingResult<f64>>) = match &cfg.problem {
        Problem::Model { kind, eps } => {
            let model = ModelSpec::new(&grid, *kind, *eps)?;
            match c {
                Some(c) if model.supports_prescribed_energy() => (fibering_profile(&model, &u, Some(c), &ts)?, solve_t_c(&model, &u, c, tol)),
                Some(_) => return Err(ConfigError(format!("the {} model takes no c", kind.name())).into()),
                None => (direct_profile(&model, &u, &ts)?, solve_t_nehari(&model, &u, tol)),
            }
        }
        Problem::Affine(a) => {
            if c.is_some() {
                return Err(ConfigError("the affine model takes no c".into()).into());
            }
            let model = AffineModel::new(&grid, a.p, a.directions, a.nonlinearity)?;
            (direct_profile(&model, &u, &ts)?, solve_t_nehari(&model, &u, tol))
        }
    };
    let (root_json, status, summary) = match root {
        Ok(r) => {
            let s = format!("root t = {:.16e} ({:?}), residual {:.3e}\n", r.t, r.kind, r.residual);
            (json!({ "root": r, "root_error": null }), EXIT_OK, s)
        }
        Err(e) if e.is_hypothesis_violation() => (json!({ "root": null, "root_error": e.to_string() }), EXIT_HYPOTHESIS, format!("{e}\n")),
        Err(e) => return Err(e.into()),
    };
    let mut result = json!({
        "model": cfg.problem.name(),
        "grid": { "dim": grid.dim(), "n": grid.n() },
        "c": c,
        "points": rows.len(),
    });
    result.as_object_mut().unwrap().extend(root_json.as_object().unwrap().clone());
    let mut out = Outcome::new(result, status, summary);
    out.files.push(("profile.csv".into(), profile_csv(&rows)));
    Ok(out)
}

fn wanted(cfg: &RunConfig, name: &str, default: bool) -> bool {
    if cfg.validate.checks.is_empty() {
        default
    } else {
        cfg.validate.checks.iter().any(|c| c == name)
    }
}

fn scalar_reports(cfg: &RunConfig, nl: &Nonlinearity<f64>, orientation: Sign, q: Option<f64>, out: &mut Vec<ValidationReport>) {
    let v = &cfg.validate;
    let params = ConditionParams { orientation, q, critical: v.critical, points: v.samples };
    let cases = [
        ("f1", ScalarCondition::F1, true),
        ("f2", ScalarCondition::F2, true),
        ("f2prime", ScalarCondition::F2Prime, false),
        ("f3", ScalarCondition::F3, q.is_some()),
    ];
    for (name, cond, default) in cases {
        if wanted(cfg, name, default) {
            out.push(check_scalar_condition(nl, cond, &params));
        }
    }
}

fn validate(cfg: &RunConfig) -> Result<Outcome> {
    const KNOWN: [&str; 12] = ["H1", "F1", "F2", "F3-coercivity", "f1", "f2", "f2prime", "f3", "A1", "A2", "A3", "BN-threshold"];
    if let Some(bad) = cfg.validate.checks.iter().find(|c| !KNOWN.contains(&c.as_str())) {
        return Err(ConfigError(format!("unknown check {bad:?}")).into());
    }
    let grid = build_grid(cfg)?;
    let v = &cfg.validate;
    let seed = cfg.solver.seed;
    let c = cfg.single_c()?;
    let orientation = match c {
        Some(c) => Sign::of(c).ok_or_else(|| ConfigError("c must be nonzero".into()))?,
        None => Sign::Positive,
    };
    let mut reports = Vec::new();
    match &cfg.problem {
        Problem::Model { kind, eps } => {
            let model = ModelSpec::new(&grid, *kind, *eps)?;
            if model.supports_prescribed_energy() {
                let shape = if orientation == Sign::Positive { "F1" } else { "F2" };
                if wanted(cfg, shape, true) {
                    reports.push(check_ray_shape(&model, orientation, v.rays, (v.t_min, v.t_max), v.points, seed));
                }
                if wanted(cfg, "H1", true) {
                    let c_eff = c.unwrap_or(1.0);
                    reports.push(check_h1(&model, c_eff, v.rays, (v.t_min, v.t_max), v.points, seed));
                }
            }
            if let Some(nl) = kind.nonlinearity() {
                let q = match kind {
                    ModelKind::ConcaveConvex { q, .. } => Some(*q),
                    _ => None,
                };
                scalar_reports(cfg, &nl, orientation, q, &mut reports);
            }
            if let ModelKind::PqGeneral { p, q, r, k0, k1 } = *kind {
                let a = check_A_conditions(p, q, r, k0, k1, v.samples);
                for (name, rep) in ["A1", "A2", "A3"].into_iter().zip(a) {
                    if wanted(cfg, name, true) {
                        reports.push(rep);
                    }
                }
            }
            if wanted(cfg, "F3-coercivity", true) {
                reports.push(check_f3_coercivity(&model, v.samples.min(200), seed));
            }
            if let ModelKind::BrezisNirenberg { n_dim, two_star } = *kind {
                if wanted(cfg, "BN-threshold", true) {
                    let s = match v.s_est {
                        Some(s) => s,
                        None => sobolev_constant_estimate(&grid, two_star, &cfg.solver)?.value,
                    };
                    reports.push(check_bn_threshold(n_dim, s, c.unwrap_or(1.0)));
                }
            }
        }
        Problem::Affine(a) => scalar_reports(cfg, &a.nonlinearity, orientation, None, &mut reports),
    }
    let mut summary = format!("{:<14} {:<13} {:>8}  notes\n", "hypothesis", "verdict", "samples");
    for r in &reports {
        writeln!(summary, "{:<14} {:<13} {:>8}  {}", r.hypothesis.label(), r.verdict.to_string(), r.samples, r.notes).unwrap();
    }
    let any_fail = reports.iter().any(|r| r.failed());
    let result = json!({
        "model": cfg.problem.name(),
        "grid": { "dim": grid.dim(), "n": grid.n() },
        "c": c,
        "reports": reports,
        "any_fail": any_fail,
    });
    Ok(Outcome::new(result, if any_fail { EXIT_HYPOTHESIS } else { EXIT_OK }, summary))
}

fn oracle(cfg: &RunConfig) -> Result<Outcome> {
    let grid = build_grid(cfg)?;
    if grid.dim() != 1 {
        return Err(ConfigError("the shooting oracle needs a 1D grid".into()).into());
    }
    let nl = match &cfg.problem {
        Problem::Model { kind: ModelKind::Semilinear { nonlinearity }, .. } => *nonlinearity,
        _ => return Err(ConfigError("the shooting oracle needs the semilinear model".into()).into()),
    };
    let o = &cfg.oracle;
    let opts = ShootingOptions { step: o.step, branches: o.branches, slope_max: o.slope_max, ..ShootingOptions::default() };
    let c_values = cfg.c_values();
    let mut out = Outcome::new(Value::Null, EXIT_OK, String::new());
    let field_of = |u: &Field<f64>| field_to_csv(&grid, u);
    if c_values.is_empty() {
        let branches = shooting_oracle_1d(&nl, o.lambda, &opts);
        let mut rows = Vec::new();
        for (k, b) in branches.iter().enumerate() {
            out.files.push((format!("branch_{k}.csv"), field_of(&b.restrict(&grid)?)));
            writeln!(out.summary, "branch {k}: slope {:.12e}, energy {:.12e}, interior zeros {}", b.slope, b.energy, b.interior_zeros).unwrap();
            rows.push(json!({ "slope": b.slope, "energy": b.energy, "interior_zeros": b.interior_zeros }));
        }
        if branches.is_empty() {
            out.status = EXIT_NO_CONVERGENCE;
            out.summary.push_str("no sign change of u(1) over the shooting range\n");
        }
        out.result = json!({ "lambda": o.lambda, "branches": rows });
    } else {
        let mut rows = Vec::new();
        for (k, &c) in c_values.iter().enumerate() {
            match prescribed_energy_oracle_1d(&nl, c, o.tol, &opts) {
                OracleOutcome::Found { lambda, branch, evaluations } => {
                    out.files.push((format!("oracle_{k}.csv"), field_of(&branch.restrict(&grid)?)));
                    writeln!(out.summary, "c = {c}: lambda = {lambda:.12e}").unwrap();
                    rows.push(json!({ "c": c, "lambda": lambda, "energy": branch.energy, "slope": branch.slope, "evaluations": evaluations, "inconclusive": null }));
                }
                OracleOutcome::Inconclusive { reason } => {
                    out.status = EXIT_NO_CONVERGENCE;
                    writeln!(out.summary, "c = {c}: inconclusive ({reason})").unwrap();
                    rows.push(json!({ "c": c, "lambda": null, "inconclusive": reason }));
                }
            }
        }
        out.result = json!({ "rows": rows });
    }
    Ok(out)
}

/// Runs a subcommand without writing anything.
pub fn execute(cmd: Subcommand, cfg: &RunConfig) -> Result<Outcome> {
    let mut out = match cmd {
        Subcommand::Solve => solve(cfg),
        Subcommand::Sweep => sweep(cfg),
        Subcommand::Minimax => minimax(cfg),
        Subcommand::Fibering => fibering(cfg),
        Subcommand::Validate => validate(cfg),
        Subcommand::Oracle => oracle(cfg),
    }?;
    if let Value::Object(map) = &mut out.result {
        map.insert("subcommand".into(), json!(cmd.name()));
    }
    Ok(out)
}

/// SHA-256 of the resolved configuration, hex encoded.
pub fn config_hash(cmd: Subcommand, cfg: &RunConfig) -> Result<String> {
    let text = serde_json::to_string(&json!({ "subcommand": cmd.name(), "config": cfg }))?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

fn fresh_dir(root: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    for k in 0.. {
        let name = if k == 0 { stem.to_string() } else { format!("{stem}-{k}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}

/// Runs a subcommand and writes `result.json`, `manifest.json` and any
/// tables into a fresh directory under `cfg.output.dir`.
pub fn run(cmd: Subcommand, cfg: &RunConfig) -> Result<RunRecord> {
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let out = execute(cmd, cfg)?;
    let wall = clock.elapsed().as_secs_f64();
    let hash = config_hash(cmd, cfg)?;
    let stem = format!("{}-{}", started.format("%Y%m%dT%H%M%S%.3fZ"), &hash[..12]);
    let dir = fresh_dir(&cfg.output.dir, &stem)?;
    let write = |name: &str, text: &str| std::fs::write(dir.join(name), text).with_context(|| format!("writing {name}"));
    write("result.json", &serde_json::to_string_pretty(&out.result)?)?;
    for (name, text) in &out.files {
        write(name, text)?;
    }
    let manifest = json!({
        "subcommand": cmd.name(),
        "config": cfg,
        "config_hash": hash,
        "seed": cfg.solver.seed,
        "versions": { "nehari-cli": env!("CARGO_PKG_VERSION"), "nehari-core": nehari::VERSION },
        "started_at": started.to_rfc3339(),
        "wall_time_seconds": wall,
        "exit_status": out.status,
        "files": out.files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    write("manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunRecord { dir, status: out.status, summary: out.summary })
}
