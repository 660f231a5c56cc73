//! `blockade` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use blockade_core::Error as CoreError;
use config::{Command, Format, GridSpec, Range, RunConfig};

/// Directory used for outputs when `--out` is not given.
pub const OUT_DIR_ENV: &str = "BLOCKADE_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("solver failure: {0}")]
    Solver(CoreError),
    #[error("{0}")]
    NotConverged(CoreError),
    #[error("self-check failed: {0} check(s) did not pass")]
    CheckFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Solver(_) | CliError::CheckFailed(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NotConverged { .. } | CoreError::PumpNotConverged { .. } => CliError::NotConverged(e),
            CoreError::InvalidParameter(_)
            | CoreError::InfeasibleTruncation { .. }
            | CoreError::UnsupportedRatio(_)
            | CoreError::InvalidProtocol(_)
            | CoreError::Schema { .. }
            | CoreError::Parse(_)
            | CoreError::Io(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "blockade", version, about = "Photon-blockade steady states of a driven photonic molecule")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<CliCommand>,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Detuning grid Δ/Γ_s as lo:hi:n.
    #[arg(long, global = true, value_name = "LO:HI:N", allow_hyphen_values = true)]
    pub delta_grid: Option<GridSpec>,
    /// Effective nonlinearity g̃/Γ_s.
    #[arg(long, global = true)]
    pub gnl: Option<f64>,
    /// Seed drive F_s/√Γ_s.
    #[arg(long, global = true)]
    pub fs: Option<f64>,
    /// Waveguide coupling γ/Γ_s.
    #[arg(long, global = true)]
    pub gamma_ratio: Option<f64>,
    /// Idler linewidth Γ_i/Γ_s.
    #[arg(long, global = true)]
    pub gamma_i_ratio: Option<f64>,
    /// Idler truncation N_max (seed keeps 2 N_max).
    #[arg(long, global = true)]
    pub nmax: Option<usize>,
    /// Raise N_max until observables change by less than 1%.
    #[arg(long, global = true)]
    pub auto_nmax: bool,
    /// Relative residual tolerance of steady solves.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file; defaults to $BLOCKADE_OUT_DIR/<command>.<ext>, else stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized self-checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run the analytic-limit self-test suite and exit.
    #[arg(long, global = true)]
    pub check: bool,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// ⟨n̂_s⟩, ⟨n̂_i⟩ and g²(0) over a detuning grid.
    Sweep,
    /// g̃/Γ_s at which min over Δ of g²(0) reaches a target.
    Threshold {
        #[arg(long)]
        target: Option<f64>,
        /// Search bracket on g̃/Γ_s as lo:hi.
        #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
        bracket: Option<Range>,
    },
    /// Max⟨n̂_s⟩ over the detuning grid versus truncation.
    Converge {
        #[arg(long)]
        rel_tol: Option<f64>,
        #[arg(long)]
        nmax_start: Option<usize>,
        #[arg(long)]
        nmax_limit: Option<usize>,
    },
    /// Final states of driving protocols A and B.
    Protocol {
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        tc: Option<f64>,
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Normalized seed response ⟨n̂_s⟩Γ_s/|F_s|² for several drives.
    Splitting {
        /// Comma-separated drives F_s/√Γ_s.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        fs_grid: Option<Vec<f64>>,
    },
    /// Effective coupling of the material platforms (SI units).
    Materials {
        /// Pump power in watts; omit for a log-spaced curve.
        #[arg(long)]
        power: Option<f64>,
        /// Power grid in watts as lo:hi:n (log-spaced).
        #[arg(long, value_name = "LO:HI:N", allow_hyphen_values = true)]
        power_grid: Option<GridSpec>,
        /// Platform data file.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Resonances and equally spaced triplets of the two-ring molecule.
    Comb {
        #[arg(long)]
        n_eff: Option<f64>,
        /// Large-ring radius in meters.
        #[arg(long)]
        radius: Option<f64>,
        /// Inter-ring coupling J in rad/s.
        #[arg(long)]
        coupling_j: Option<f64>,
        /// Azimuthal range lo:hi.
        #[arg(long, value_name = "LO:HI")]
        m_range: Option<String>,
    },
}

/// Merges the config file (if any) and flags into a validated configuration.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(g) = c.delta_grid {
        cfg.delta_grid = g;
    }
    if let Some(g) = c.gnl {
        cfg.system.g_eff = g;
        cfg.system.gauge_phase = 0.0;
    }
    if let Some(f) = c.fs {
        cfg.system.f_s = Complex64::new(f, 0.0);
    }
    if let Some(r) = c.gamma_ratio {
        cfg.system.gamma = r * cfg.system.gamma_s;
    }
    if let Some(r) = c.gamma_i_ratio {
        cfg.system.gamma_i = r * cfg.system.gamma_s;
    }
    if let Some(n) = c.nmax {
        cfg.n_max = n;
        cfg.splitting.n_max = n;
        cfg.threshold.n_max = n;
    }
    cfg.auto_nmax |= c.auto_nmax;
    if let Some(t) = c.tol {
        cfg.tol = t;
    }
    if c.out.is_some() {
        cfg.out.clone_from(&c.out);
    }
    if let Some(f) = c.format {
        cfg.format = f;
    }
    if let Some(t) = c.threads {
        cfg.threads = t;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }

    match &cli.command {
        None => {}
        Some(CliCommand::Sweep) => cfg.command = Command::Sweep,
        Some(CliCommand::Threshold { target, bracket }) => {
            cfg.command = Command::Threshold;
            if let Some(t) = target {
                cfg.threshold.target = *t;
            }
            if let Some(Range(lo, hi)) = bracket {
                cfg.threshold.bracket = (*lo, *hi);
            }
        }
        Some(CliCommand::Converge { rel_tol, nmax_start, nmax_limit }) => {
            cfg.command = Command::Converge;
            if let Some(r) = rel_tol {
                cfg.converge.rel_tol = *r;
            }
            if let Some(n) = nmax_start {
                cfg.converge.n_max_start = *n;
            }
            if let Some(n) = nmax_limit {
                cfg.converge.n_max_limit = *n;
            }
            if let Some(g) = c.delta_grid {
                cfg.converge.grid = g;
            }
        }
        Some(CliCommand::Protocol { t1, tc, t_final }) => {
            cfg.command = Command::Protocol;
            if let Some(t) = t1 {
                cfg.protocol.t1 = *t;
            }
            if let Some(t) = tc {
                cfg.protocol.t_c = *t;
            }
            if let Some(t) = t_final {
                cfg.protocol.t_final = *t;
            }
        }
        Some(CliCommand::Splitting { fs_grid }) => {
            cfg.command = Command::Splitting;
            if let Some(g) = fs_grid {
                cfg.splitting.fs_grid.clone_from(g);
            }
        }
        Some(CliCommand::Materials { power, power_grid, data }) => {
            cfg.command = Command::Materials;
            if power.is_some() {
                cfg.materials.power = *power;
            }
            if let Some(g) = power_grid {
                cfg.materials.power_grid = *g;
            }
            if data.is_some() {
                cfg.materials.data.clone_from(data);
            }
        }
        Some(CliCommand::Comb { n_eff, radius, coupling_j, m_range }) => {
            cfg.command = Command::Comb;
            if let Some(n) = n_eff {
                cfg.comb.n_eff = *n;
            }
            if let Some(r) = radius {
                cfg.comb.radius = *r;
            }
            if let Some(j) = coupling_j {
                cfg.comb.coupling_j = *j;
            }
            if let Some(m) = m_range {
                let (lo, hi) = m
                    .split_once(':')
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                    .ok_or_else(|| CliError::Config(format!("--m-range expects lo:hi integers, got `{m}`")))?;
                cfg.comb.m_range = (lo, hi);
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// What a run produced: data destined for stdout (when no output file is
/// used) and a one-line summary.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub stdout: Option<String>,
    pub summary: String,
}

/// Runs the resolved configuration inside a worker pool of the requested size.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = resolve(cli)?;
    if cli.common.print_config {
        return Ok(Outcome {
            stdout: Some(cfg.to_toml()),
            summary: String::new(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    if cli.common.check {
        return pool.install(|| check::run_checks(cfg.seed));
    }
    pool.install(|| commands::run(&cfg))
}
