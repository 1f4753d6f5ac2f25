//! `kbl`: run cases, Krylov distance sweeps, resolvent continuations and
//! contour projections; reports are written as JSON and CSV.
//!
//! Exit codes: 0 success, 1 assertion or numerical failure, 2 usage or
//! configuration error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use kbl_core::cases::{parse_override, run_case, CaseOutcome, Overrides, CATALOG};
use kbl_core::krylov::solvability_sweep_with;
use kbl_core::linalg::{c, C64};
use kbl_core::report::{write_atomic, Report, Table};
use kbl_core::resolvent::{
    continue_resolvent, evaluate_polynomial, extract_polynomial, kclass_inverse, plan_path, resolvent_direct, PlanOptions,
    DEFAULT_DEGREE_CAP,
};
use kbl_core::spaces::SpaceSpec;
use kbl_core::spectral::{projection_with, Contour};
use kbl_core::{Execution, KblError, OpMatrix};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "kbl", version, about = "Krylov-solvability laboratory")]
struct Cli {
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Include wall-clock timings in reports (breaks byte-identical reruns).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the case catalog.
    List,
    /// Run catalog cases.
    Case {
        /// Case ids; `all` runs the whole catalog.
        #[arg(required = true)]
        ids: Vec<String>,
        /// Parameter override `key=value` (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Distance sweep `d_m` for an arbitrary operator, vector and norm.
    KrylovDist(ConfigArgs),
    /// Certified resolvent continuation or polynomial inverse.
    Resolvent(ConfigArgs),
    /// Contour spectral projections.
    Projection(ConfigArgs),
}

#[derive(clap::Args, Debug)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<KblError> for Failure {
    fn from(e: KblError) -> Self {
        match e {
            KblError::Config(_) | KblError::Json(_) => Failure::Usage(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KBL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let exec = configure_threads(cli.jobs);
    let result = match cli.command {
        Command::List => {
            for c in CATALOG {
                println!("{:<22} {:<22} {}", c.id, serde_json::to_value(c.expected).unwrap_or(Value::Null).as_str().unwrap_or(""), c.summary);
            }
            Ok(())
        }
        Command::Case { ids, set, out } => cmd_case(&ids, &set, &out, exec, cli.jobs, cli.timings),
        Command::KrylovDist(a) => with_config(&a, "krylov-dist", |cfg, echo, out| cmd_krylov_dist(cfg, echo, out, exec, cli.timings)),
        Command::Resolvent(a) => with_config(&a, "resolvent", |cfg, echo, out| cmd_resolvent(cfg, echo, out, cli.timings)),
        Command::Projection(a) => with_config(&a, "projection", |cfg, echo, out| cmd_projection(cfg, echo, out, exec, cli.timings)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("kbl: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("kbl: {msg}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads(jobs: Option<usize>) -> Execution {
    match jobs {
        Some(1) => Execution::Sequential,
        #[cfg(feature = "parallel")]
        Some(n) if n > 1 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the thread pool: {e}");
            }
            Execution::Parallel
        }
        _ => Execution::default(),
    }
}

fn timing(enabled: bool, start: Instant) -> Option<Value> {
    enabled.then(|| json!({"total_seconds": start.elapsed().as_secs_f64()}))
}

fn cmd_case(ids: &[String], set: &[String], out: &Path, exec: Execution, jobs: Option<usize>, timings: bool) -> Outcome {
    let ids: Vec<String> = if ids.iter().any(|i| i == "all") {
        CATALOG.iter().map(|c| c.id.to_string()).collect()
    } else {
        ids.to_vec()
    };
    for id in &ids {
        if kbl_core::cases::case_info(id).is_none() {
            return Err(Failure::Usage(format!("unknown case id '{id}' (see `kbl list`)")));
        }
    }
    let mut overrides = Overrides::new();
    for s in set {
        let (k, v) = parse_override(s)?;
        overrides.insert(k, v);
    }
    let run = |id: &String| -> (kbl_core::Result<CaseOutcome>, Option<Value>) {
        let start = Instant::now();
        let inner = if ids.len() > 1 && jobs != Some(1) { Execution::Sequential } else { exec };
        let r = run_case(id, &overrides, inner);
        (r, timing(timings, start))
    };
    let results: Vec<_> = if ids.len() > 1 && exec == Execution::Parallel { par_map(&ids, run) } else { ids.iter().map(run).collect() };

    let mut failures = Vec::new();
    for (id, (r, t)) in ids.iter().zip(results) {
        let outcome = r?;
        for p in outcome.write(out, t)? {
            log::info!("wrote {}", p.display());
        }
        if outcome.passed() {
            println!("case {id}: PASS");
        } else {
            let names: Vec<String> = outcome.failed_checks().iter().map(|c| format!("{} = {:e}", c.name, c.value)).collect();
            println!("case {id}: FAIL ({})", names.join(", "));
            failures.push(id.clone());
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed cases: {}", failures.join(", "))))
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

fn with_config(
    args: &ConfigArgs,
    name: &str,
    body: impl FnOnce(&RunConfig, Value, &Path) -> Outcome,
) -> Outcome {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let (cfg, echo) = RunConfig::load(&text, &args.set)?;
    cfg.expect_command(name)?;
    let out = args.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    body(&cfg, echo, &out)
}

fn write_report(out: &Path, stem: &str, mut report: Report, timings: Option<Value>, tables: &[Table]) -> Outcome {
    report.timings = timings;
    let p = out.join(format!("{stem}.json"));
    write_atomic(&p, report.to_json()?.as_bytes())?;
    println!("{}", p.display());
    for t in tables {
        let p = out.join(format!("{stem}_{}.csv", t.name));
        write_atomic(&p, t.to_csv().as_bytes())?;
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_krylov_dist(cfg: &RunConfig, echo: Value, out: &Path, exec: Execution, timings: bool) -> Outcome {
    let start = Instant::now();
    let a = cfg.operator()?;
    let space_cfg = cfg.space.as_ref().ok_or_else(|| Failure::Usage("krylov-dist needs a 'space'".into()))?;
    let space = SpaceSpec::from_config(space_cfg)?;
    if space.dim() != a.dim() {
        return Err(Failure::Usage(format!("space dimension {} differs from operator dimension {}", space.dim(), a.dim())));
    }
    let f = cfg.f.as_ref().ok_or_else(|| Failure::Usage("krylov-dist needs a vector 'f'".into()))?.build(a.dim())?;
    let m = cfg.m.ok_or_else(|| Failure::Usage("krylov-dist needs 'm'".into()))?;
    let th = cfg.thresholds.unwrap_or_default();
    let s = solvability_sweep_with(&a, &f, &space, m, &th, exec)?;
    let mut t = Table::new("d_m", &["m", "d_m", "lower_bound"]);
    for (i, (d, lb)) in s.distances.iter().zip(&s.lower_bounds).enumerate() {
        t.push(vec![(i + 1) as f64, *d, *lb]);
    }
    let residuals = json!({"sweep_residual": s.residual, "reevaluation_gap": s.reevaluation_gap});
    let report = Report::new("krylov-dist", echo, serde_json::to_value(&s).map_err(KblError::from)?, residuals);
    write_report(out, "krylov_dist", report, timing(timings, start), &[t])
}

fn point(p: [f64; 2]) -> C64 {
    c(p[0], p[1])
}

fn cmd_resolvent(cfg: &RunConfig, echo: Value, out: &Path, timings: bool) -> Outcome {
    let start = Instant::now();
    let a = cfg.operator()?;
    let spec = cfg.resolvent.as_ref().ok_or_else(|| Failure::Usage("resolvent needs a 'resolvent' section".into()))?;
    if !(spec.eps > 0.0) {
        return Err(Failure::Usage("resolvent.eps must be positive".into()));
    }
    let target = point(spec.target);
    let waypoints: Vec<C64> = spec.waypoints.iter().map(|&p| point(p)).collect();
    let ap = match spec.start {
        None if target == C64::new(0.0, 0.0) => {
            kclass_inverse(&a, spec.eps, (!waypoints.is_empty()).then_some(waypoints.as_slice()))?
        }
        start => {
            let z0 = match start {
                Some(p) => point(p),
                None => c(2.0 * a.spectral_radius(12)?.spr_upper.max(target.norm()).max(1e-3), 0.0),
            };
            let plan = plan_path(&a, z0, target, &waypoints, &PlanOptions { eps_total: spec.eps, ..Default::default() })?;
            continue_resolvent(&a, &plan)?
        }
    };

    let mut results = serde_json::Map::new();
    results.insert("zeta".into(), json!([ap.zeta.re, ap.zeta.im]));
    results.insert("error_bound".into(), json!(ap.error_bound));
    results.insert("degree_bound".into(), json!(ap.degree_bound));
    results.insert("provenance".into(), serde_json::to_value(&ap.provenance).map_err(KblError::from)?);
    results.insert("plan".into(), serde_json::to_value(&ap.plan).map_err(KblError::from)?);
    results.insert("step_bounds".into(), json!(ap.step_bounds));
    let mut residuals = serde_json::Map::new();
    if let Ok(exact) = resolvent_direct(&a, ap.zeta) {
        let err = ap.value.distance_inf(&exact.value)?;
        residuals.insert("error_vs_direct".into(), json!(err));
        if err > ap.error_bound {
            return Err(Failure::Check(format!("certified bound {:e} below observed error {err:e}", ap.error_bound)));
        }
    }
    if ap.zeta == C64::new(0.0, 0.0) {
        let am = OpMatrix::from_operator(&a);
        let prod = ap.value.mul(&am)?;
        residuals.insert("inverse_residual".into(), json!(prod.distance_inf(&prod.identity_like())?));
    }
    match extract_polynomial(&ap, DEFAULT_DEGREE_CAP) {
        Ok(coeffs) => {
            let poly = evaluate_polynomial(&a, &coeffs)?;
            residuals.insert("polynomial_vs_value".into(), json!(poly.distance_inf(&ap.value)?));
            results.insert("coefficients".into(), json!(coeffs.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()));
        }
        Err(e) => {
            results.insert("coefficients".into(), Value::Null);
            results.insert("coefficients_note".into(), json!(e.to_string()));
        }
    }
    let report = Report::new("resolvent", echo, Value::Object(results), Value::Object(residuals));
    write_report(out, "resolvent", report, timing(timings, start), &[])
}

fn cmd_projection(cfg: &RunConfig, echo: Value, out: &Path, exec: Execution, timings: bool) -> Outcome {
    let start = Instant::now();
    let a = cfg.operator()?;
    if cfg.contours.is_empty() {
        return Err(Failure::Usage("projection needs at least one contour".into()));
    }
    let mut entries = Vec::new();
    let mut worst_idem: f64 = 0.0;
    let mut worst_comm: f64 = 0.0;
    for spec in &cfg.contours {
        let contour = Contour::from_spec(spec)?;
        let p = projection_with(&a, &contour, exec)?;
        worst_idem = worst_idem.max(p.idempotency_residual);
        worst_comm = worst_comm.max(p.commutator_residual);
        entries.push(json!({
            "contour": p.contour,
            "nodes": p.nodes,
            "rank": p.rank,
            "rank_tolerance": p.rank_tolerance,
            "trace": [p.trace.re, p.trace.im],
            "enclosed_multiplicity": p.enclosed_multiplicity,
            "idempotency_residual": p.idempotency_residual,
            "commutator_residual": p.commutator_residual,
            "norm_inf": p.p.norm_inf(),
            "structure": p.p.structure(),
        }));
        if let Some(mult) = p.enclosed_multiplicity {
            if mult != p.rank {
                log::warn!("projection rank {} differs from enclosed multiplicity {mult}", p.rank);
            }
        }
    }
    let residuals = json!({"idempotency_residual_max": worst_idem, "commutator_residual_max": worst_comm});
    let report = Report::new("projection", echo, json!({"projections": entries}), residuals);
    write_report(out, "projection", report, timing(timings, start), &[])
}
