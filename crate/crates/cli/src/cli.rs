//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{ModelArgs, DIST_GRAMMAR};

const AFTER_HELP: &str = "Distribution grammar: constant:v | two-point:a,b:p (value b with probability p, a otherwise) | uniform:lo,hi | discrete:v1,..,vk:p1,..,pk
Grids: v | v1,v2,.. | start:stop:step (stop included when within half a step)
Exit codes: 0 success, 1 validation error, 2 check failure, 3 aborted replicas";

#[derive(Debug, Parser)]
#[command(name = "rwre", version, about = "Biased random walks in random environment: closed forms, simulation and checks", after_help = AFTER_HELP)]
pub struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true, env = "RWRE_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate closed-form velocities and diffusivities over a bias grid.
    #[command(after_help = DIST_GRAMMAR)]
    Eval(EvalArgs),
    /// Run Monte Carlo experiments.
    #[command(after_help = DIST_GRAMMAR)]
    Simulate(SimulateArgs),
    /// Emit plot data.
    Figure(FigureArgs),
    /// Run acceptance checks and print one JSON record per check.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Bias value or grid.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: String,
    /// Output file (default: standard output).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimKind {
    /// Annealed (or, with --quenched, quenched) velocity.
    Velocity,
    /// Variance and Gaussianity of the recentered position.
    Diffusion,
    /// Slopes v(h)/h along an h-grid.
    Einstein,
    /// Mean first-passage time to level one.
    Tau1,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub kind: SimKind,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Bias value or grid (not used by einstein).
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Number of steps for discrete-time models.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Time horizon for continuous-time models.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub replicas: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Agreement band in standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub tolerance: f64,
    /// Reflected environments and mirrored direction draws.
    #[arg(long)]
    pub mirrored: bool,
    /// Run every walk in the single environment with this seed.
    #[arg(long)]
    pub quenched: Option<u64>,
    /// Slope steps for einstein.
    #[arg(long, default_value = "0.4,0.2,0.1,0.05")]
    pub h_grid: String,
    /// Move budget per first-passage run.
    #[arg(long, default_value_t = 1_000_000_000)]
    pub budget: u64,
    /// Write the environment of replica 0 over its visited window.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Write the path of replica 0.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum FigureName {
    /// sigma^2 for uniform [1, 10] conductances and for constant conductances.
    Fig2,
    /// a1(x) for conductances uniform on [1, x].
    Fig3,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FigureArgs {
    #[arg(value_enum)]
    pub which: FigureName,
    /// Bias grid for fig2.
    #[arg(long, default_value = "-3:3:0.05", allow_hyphen_values = true)]
    pub lambda: String,
    /// x grid for fig3 (x > 1).
    #[arg(long, default_value = "1.05:20:0.05")]
    pub x: String,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckArgs {
    /// Check names or criterion numbers; "all" (the default) runs criteria 1 to 10.
    pub names: Vec<String>,
    /// List the available checks and exit.
    #[arg(long)]
    pub list: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
