//! Implementations of the subcommands.

use std::path::PathBuf;

use rwre_core::analytic::{a1_from_dist, sigma2_for_model, velocity_for_model};
use rwre_core::envgen::{materialize, write_snapshot_discrete, write_snapshot_rates, Materialized};
use rwre_core::estimate::{
    annealed_diffusion, annealed_tau1, annealed_velocity, einstein_slope, env_seed, quenched_velocity,
    replica_trajectory, EnsembleConfig, Horizon,
};
use rwre_core::oracle::{RenewalMoments, MAX_RENEWAL_MOMENTS};
use rwre_core::rng::{derive_seed, LANE_AUX};
use rwre_core::series::SeriesStatus;
use rwre_core::simulate::path_to_csv;
use rwre_core::{EnvKind, EnvModel, ScalarDist, TimeFlavor};

use crate::checks::{self, CheckReport};
use crate::cli::{CheckArgs, EvalArgs, FigureArgs, FigureName, SimKind, SimulateArgs};
use crate::config::{parse_grid, RunConfig};
use crate::table::{Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
    Aborted,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::CheckFailed => 2,
            Status::Aborted => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub text: String,
    pub output: Option<PathBuf>,
    /// Side files written next to the main output.
    pub files: Vec<(PathBuf, String)>,
    pub status: Status,
    /// Human-readable lines for standard error.
    pub messages: Vec<String>,
}

impl Outcome {
    fn new(text: String, output: Option<PathBuf>) -> Self {
        Self { text, output, files: Vec::new(), status: Status::Ok, messages: Vec::new() }
    }
}

fn path_text(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

pub fn eval(args: &EvalArgs, workers: usize) -> Result<Outcome, CliError> {
    let model = args.model.to_model()?;
    let grid = parse_grid(&args.lambda, "--lambda")?;
    let mut cfg = RunConfig::new("eval", workers);
    cfg.model = Some(model.to_string());
    cfg.lambda = grid.clone();
    cfg.output = path_text(&args.output);
    let mut t = Table::new(&["lambda", "v", "v_error", "sigma2", "lambda_minus", "lambda_plus", "regime"]);
    match (&model.kind, model.time) {
        (EnvKind::Renewal { a, gamma }, TimeFlavor::Discrete) => {
            t.notes.push("v_error bounds the truncation of E[S-bar]; at lambda_plus it is an asymptotic estimate".into());
            renewal_rows(&mut t, *a, *gamma, &grid)?;
        }
        _ => {
            for &l in &grid {
                let r = velocity_for_model(&model, l)?;
                let s2 = sigma2_for_model(&model, l).ok();
                t.push(vec![
                    l.into(),
                    r.v.into(),
                    0.0.into(),
                    s2.into(),
                    r.lambda_minus.into(),
                    r.lambda_plus.into(),
                    r.regime.as_str().into(),
                ]);
            }
        }
    }
    Ok(Outcome::new(t.render(&cfg), args.output.clone()))
}

const CRITICAL_TERMS: usize = 20_000;

fn renewal_rows(t: &mut Table, a: f64, gamma: f64, grid: &[f64]) -> Result<(), CliError> {
    let terms = |l: f64| -> usize {
        let g = a * (-2.0 * l).exp();
        if g > 1.0 + 1e-12 {
            0
        } else if g >= 1.0 - 1e-12 {
            CRITICAL_TERMS
        } else {
            let n = ((1e-13 * (1.0 - g) / 2.0).ln() / g.ln()).ceil();
            (n.max(1.0) as usize).min(MAX_RENEWAL_MOMENTS)
        }
    };
    let n = grid.iter().map(|&l| terms(l)).max().unwrap_or(0);
    let moments = RenewalMoments::new(gamma, n)?;
    let lp = 0.5 * a.ln();
    for &l in grid {
        let s = moments.esbar(a, l);
        let row = if s.status == SeriesStatus::Diverged {
            vec![l.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, lp.into(), "non-positive".into()]
        } else {
            let v = 1.0 / s.value;
            vec![l.into(), v.into(), (s.error_bound * v * v).into(), Cell::Empty, Cell::Empty, lp.into(), "positive".into()]
        };
        t.push(row);
    }
    Ok(())
}

fn horizon(model: &EnvModel, args: &SimulateArgs, required: bool) -> Result<Option<Horizon>, CliError> {
    match (model.time, args.steps, args.duration) {
        (TimeFlavor::Discrete, Some(n), None) if n > 0 => Ok(Some(Horizon::Steps(n))),
        (TimeFlavor::Continuous, None, Some(d)) if d > 0.0 && d.is_finite() => Ok(Some(Horizon::Time(d))),
        (_, None, None) if !required => Ok(None),
        (TimeFlavor::Discrete, _, _) => Err(CliError::Validation("discrete-time models need a positive --steps (and no --duration)".into())),
        (TimeFlavor::Continuous, _, _) => {
            Err(CliError::Validation("continuous-time models need a positive --duration (and no --steps)".into()))
        }
    }
}

fn analytic_v(model: &EnvModel, lambda: f64, mirrored: bool) -> Option<f64> {
    if mirrored {
        velocity_for_model(model, -lambda).ok().map(|r| -r.v)
    } else {
        velocity_for_model(model, lambda).ok().map(|r| r.v)
    }
}

pub fn simulate(args: &SimulateArgs, workers: usize) -> Result<Outcome, CliError> {
    let model = args.model.to_model()?;
    if args.replicas < 2 {
        return Err(CliError::Validation("--replicas must be at least 2".into()));
    }
    if !(args.tolerance > 0.0) {
        return Err(CliError::Validation("--tolerance must be positive".into()));
    }
    let einstein = args.kind == SimKind::Einstein;
    let lambdas = match (&args.lambda, einstein) {
        (Some(s), false) => parse_grid(s, "--lambda")?,
        (None, false) => return Err(CliError::Validation("--lambda is required".into())),
        (Some(_), true) => return Err(CliError::Validation("einstein uses --h-grid, not --lambda".into())),
        (None, true) => Vec::new(),
    };
    let h_grid = if einstein { parse_grid(&args.h_grid, "--h-grid")? } else { Vec::new() };
    let needs_horizon = matches!(args.kind, SimKind::Velocity | SimKind::Diffusion);
    let horizon = if args.kind == SimKind::Tau1 {
        if args.steps.is_some() || args.duration.is_some() {
            return Err(CliError::Validation("tau1 runs until the passage; use --budget".into()));
        }
        None
    } else {
        horizon(&model, args, needs_horizon)?
    };
    if args.quenched.is_some() && args.kind != SimKind::Velocity {
        return Err(CliError::Validation("--quenched applies to velocity runs only".into()));
    }
    if args.mirrored && (args.quenched.is_some() || args.kind == SimKind::Tau1) {
        return Err(CliError::Validation("--mirrored applies to annealed velocity, diffusion and einstein runs".into()));
    }
    if (args.snapshot.is_some() || args.trajectory.is_some()) && (horizon.is_none() || args.quenched.is_some()) {
        return Err(CliError::Validation("--snapshot and --trajectory need an annealed run with a horizon".into()));
    }

    let mut ens = EnsembleConfig::new(args.replicas, args.seed);
    if args.mirrored {
        ens = ens.mirrored();
    }
    let mut cfg = RunConfig::new("simulate", workers)
        .with("kind", args.kind)
        .with("mirrored", args.mirrored)
        .with("quenched", args.quenched);
    cfg.model = Some(model.to_string());
    cfg.lambda = lambdas.clone();
    cfg.horizon = horizon.map(|h| format!("{h:?}"));
    cfg.replicas = Some(args.replicas);
    cfg.seed = Some(args.seed);
    cfg.tolerance = Some(args.tolerance);
    cfg.output = path_text(&args.output);
    match args.kind {
        SimKind::Einstein => cfg = cfg.with("h_grid", &h_grid),
        SimKind::Tau1 => cfg = cfg.with("budget", args.budget),
        _ => {}
    }
    if let Some(p) = &args.snapshot {
        cfg = cfg.with("snapshot", p.display().to_string());
    }
    if let Some(p) = &args.trajectory {
        cfg = cfg.with("trajectory", p.display().to_string());
    }

    let k = args.tolerance;
    let mut aborts = 0u64;
    let mut t;
    match args.kind {
        SimKind::Velocity => {
            let h = horizon.expect("checked");
            t = Table::new(&["lambda", "mean", "std_error", "ci95_lo", "ci95_hi", "analytic", "z_score", "agrees", "replicas", "aborts"]);
            for &l in &lambdas {
                let est = match args.quenched {
                    Some(es) => quenched_velocity(&model, es, l, h, args.replicas, args.seed, &ens.walk)?,
                    None => annealed_velocity(&model, l, h, &ens)?,
                };
                aborts += est.aborts.count;
                let e = est.estimate;
                let target = if args.quenched.is_some() { None } else { analytic_v(&model, l, args.mirrored) };
                let z = target.map(|v| e.z_score(v));
                t.push(vec![
                    l.into(),
                    e.mean.into(),
                    e.std_error.into(),
                    e.ci95.0.into(),
                    e.ci95.1.into(),
                    target.into(),
                    z.into(),
                    z.map_or(Cell::Empty, |z| (z.abs() <= k).into()),
                    est.replicas.into(),
                    est.aborts.count.into(),
                ]);
            }
        }
        SimKind::Diffusion => {
            let h = horizon.expect("checked");
            t = Table::new(&[
                "lambda",
                "velocity",
                "velocity_source",
                "variance",
                "variance_se",
                "sigma2_analytic",
                "relative_error",
                "ks_distance",
                "mean_z",
                "mean_z_se",
                "replicas",
                "aborts",
            ]);
            for (i, &l) in lambdas.iter().enumerate() {
                let (v, source) = match analytic_v(&model, l, args.mirrored) {
                    Some(v) => (v, "analytic"),
                    None => {
                        let mut pilot = ens.clone();
                        pilot.seed = derive_seed(args.seed, LANE_AUX, i as u64);
                        let e = annealed_velocity(&model, l, h, &pilot)?;
                        aborts += e.aborts.count;
                        (e.estimate.mean, "monte-carlo")
                    }
                };
                let d = annealed_diffusion(&model, l, h, v, &ens)?;
                aborts += d.aborts.count;
                let s2 = if args.mirrored { sigma2_for_model(&model, -l).ok() } else { sigma2_for_model(&model, l).ok() };
                t.push(vec![
                    l.into(),
                    v.into(),
                    source.into(),
                    d.variance.mean.into(),
                    d.variance.std_error.into(),
                    s2.into(),
                    s2.map(|s| (d.variance.mean - s) / s).into(),
                    d.ks_distance.into(),
                    d.mean_z.mean.into(),
                    d.mean_z.std_error.into(),
                    d.replicas.into(),
                    d.aborts.count.into(),
                ]);
            }
        }
        SimKind::Einstein => {
            t = Table::new(&[
                "h",
                "analytic",
                "first_order_bias",
                "mc",
                "mc_se",
                "mc_corrected",
                "z_corrected",
                "limit",
                "low_resolution",
                "aborts",
            ]);
            let table = einstein_slope(&model, &h_grid, horizon.map(|h| (h, &ens)))?;
            for r in &table.rows {
                aborts += r.aborts;
                let z = r.mc_corrected.map(|e| e.z_score(table.limit));
                t.push(vec![
                    r.h.into(),
                    r.analytic.into(),
                    r.first_order_bias.into(),
                    r.mc.map(|e| e.mean).into(),
                    r.mc.map(|e| e.std_error).into(),
                    r.mc_corrected.map(|e| e.mean).into(),
                    z.into(),
                    table.limit.into(),
                    if r.mc.is_some() { r.low_resolution.into() } else { Cell::Empty },
                    r.aborts.into(),
                ]);
            }
        }
        SimKind::Tau1 => {
            t = Table::new(&["lambda", "mean", "std_error", "inverse_velocity", "z_score", "agrees", "replicas", "aborts"]);
            for &l in &lambdas {
                let est = annealed_tau1(&model, l, args.replicas, args.seed, args.budget)?;
                aborts += est.aborts.count;
                let target = velocity_for_model(&model, l).ok().filter(|r| r.v > 0.0).map(|r| 1.0 / r.v);
                let z = target.map(|x| est.estimate.z_score(x));
                t.push(vec![
                    l.into(),
                    est.estimate.mean.into(),
                    est.estimate.std_error.into(),
                    target.into(),
                    z.into(),
                    z.map_or(Cell::Empty, |z| (z.abs() <= k).into()),
                    est.replicas.into(),
                    est.aborts.count.into(),
                ]);
            }
        }
    }
    t.notes.push(format!("aborted replicas: {aborts}"));
    let mut out = Outcome::new(t.render(&cfg), args.output.clone());
    if aborts > 0 {
        out.status = Status::Aborted;
        out.messages.push(format!("{aborts} replicas aborted"));
    }
    if let Some(h) = horizon {
        let first = if einstein { h_grid[0] } else { lambdas[0] };
        dumps(&model, first, h, &ens, args, &mut out)?;
    }
    Ok(out)
}

fn dumps(model: &EnvModel, lambda: f64, h: Horizon, ens: &EnsembleConfig, args: &SimulateArgs, out: &mut Outcome) -> Result<(), CliError> {
    if args.snapshot.is_none() && args.trajectory.is_none() {
        return Ok(());
    }
    let mut cfg = ens.clone();
    cfg.walk.record_path = args.trajectory.is_some();
    let traj = match replica_trajectory(model, lambda, h, &cfg, 0)? {
        Ok(t) => t,
        Err(e) => {
            out.messages.push(format!("replica 0 aborted, no dumps written: {e}"));
            return Ok(());
        }
    };
    if let Some(p) = &args.snapshot {
        // the walk sees the reflection of this environment when mirrored
        let (lo, hi) = if args.mirrored { (-traj.max_position, -traj.min_position) } else { (traj.min_position, traj.max_position) };
        let text = match materialize(model, env_seed(args.seed, 0), lo - 1, hi + 1)? {
            Materialized::Discrete(e) => write_snapshot_discrete(&e),
            Materialized::Rates(e) => write_snapshot_rates(&e),
        };
        out.files.push((p.clone(), text));
    }
    if let (Some(p), Some(path)) = (&args.trajectory, &traj.path) {
        out.files.push((p.clone(), path_to_csv(path)));
    }
    Ok(())
}

pub fn figure(args: &FigureArgs, workers: usize) -> Result<Outcome, CliError> {
    let mut cfg = RunConfig::new("figure", workers).with("which", args.which);
    cfg.output = path_text(&args.output);
    let mut t;
    match args.which {
        FigureName::Fig2 => {
            let grid = parse_grid(&args.lambda, "--lambda")?;
            cfg.lambda = grid.clone();
            let uniform: EnvModel = "discrete rcm c=uniform:1,10".parse()?;
            let constant: EnvModel = "discrete rcm c=constant:1".parse()?;
            cfg.model = Some(uniform.to_string());
            t = Table::new(&["lambda", "sigma2_uniform_1_10", "sigma2_deterministic"]);
            for &l in &grid {
                t.push(vec![l.into(), sigma2_for_model(&uniform, l)?.into(), sigma2_for_model(&constant, l)?.into()]);
            }
        }
        FigureName::Fig3 => {
            let grid = parse_grid(&args.x, "--x")?;
            cfg = cfg.with("x", &grid);
            t = Table::new(&["x", "a1"]);
            for &x in &grid {
                if !(x > 1.0) {
                    return Err(CliError::Validation(format!("--x values must exceed 1, got {x}")));
                }
                t.push(vec![x.into(), a1_from_dist(&ScalarDist::uniform(1.0, x)?).into()]);
            }
        }
    }
    Ok(Outcome::new(t.render(&cfg), args.output.clone()))
}

pub fn check(args: &CheckArgs) -> Result<Outcome, CliError> {
    if args.list {
        let mut s = String::new();
        for c in checks::CRITERIA.iter().chain(checks::NAMED.iter()) {
            s.push_str(&format!("{:>2} {:<20} {}\n", c.id, c.name, c.description));
        }
        return Ok(Outcome::new(s, args.output.clone()));
    }
    let mut selected = Vec::new();
    if args.names.is_empty() || args.names.iter().any(|n| n == "all") {
        selected.extend(checks::CRITERIA.iter());
    }
    for n in args.names.iter().filter(|n| *n != "all") {
        let c = checks::find(n).ok_or_else(|| {
            CliError::Validation(format!("unknown check {n:?}; available: {}", checks::all_names().join(", ")))
        })?;
        if !selected.iter().any(|s| std::ptr::eq(*s, c)) {
            selected.push(c);
        }
    }
    let reports: Vec<CheckReport> = selected.iter().map(|c| c.run()).collect();
    let mut text = String::new();
    for r in &reports {
        text.push_str(&serde_json::to_string(r).expect("serializable report"));
        text.push('\n');
    }
    let mut out = Outcome::new(text, args.output.clone());
    out.messages = reports.iter().map(|r| r.summary_line()).collect();
    if reports.iter().any(|r| !r.pass) {
        out.status = Status::CheckFailed;
    }
    Ok(out)
}
