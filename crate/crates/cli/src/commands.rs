//! Subcommand implementations.

use std::fmt::Write as _;
use std::time::Instant;

use blockade_core::comb::find_triplets;
use blockade_core::dynamics::{run_protocol, DrivingProtocol, ProtocolParams};
use blockade_core::materials::{bundled_platforms, effective_coupling, load_platforms, log_power_grid, PlatformSet};
use blockade_core::observables::{
    blockade_threshold, detuning_sweep, g2_zero, mean_occupation, splitting_scan, NmaxPolicy, ThresholdOptions,
};
use blockade_core::steady::{converge_truncation, steady_state_with, Observable};
use blockade_core::{Error as CoreError, FockBasis, Mode, SolverOptions};
use serde::Serialize;

use crate::config::{Command, Format, RunConfig};
use crate::output::{csv_with_config, emit, json_with_config};
use crate::{CliError, Outcome};

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (contents, summary, deferred) = match cfg.command {
        Command::Sweep => sweep(cfg)?,
        Command::Threshold => threshold(cfg)?,
        Command::Converge => converge(cfg)?,
        Command::Protocol => protocol(cfg)?,
        Command::Splitting => splitting(cfg)?,
        Command::Materials => materials(cfg)?,
        Command::Comb => comb(cfg)?,
    };
    let (stdout, dest) = emit(cfg, contents)?;
    if let Some(err) = deferred {
        return Err(err);
    }
    Ok(Outcome {
        stdout,
        summary: format!("{}: {summary} [{:.2} s, output: {dest}]", cfg.command.name(), start.elapsed().as_secs_f64()),
    })
}

/// File contents, summary line, and an error to report after the output is written.
type Produced = (String, String, Option<CliError>);

fn render<T: Serialize>(cfg: &RunConfig, csv: impl FnOnce() -> String, json: &T) -> String {
    match cfg.format {
        Format::Csv => csv_with_config(cfg, &csv()),
        Format::Json => json_with_config(cfg, json),
    }
}

fn solver(cfg: &RunConfig) -> SolverOptions {
    SolverOptions::with_tol(cfg.tol)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "null".into(), |x| format!("{x:.16e}"))
}

fn nmax_policy(cfg: &RunConfig) -> NmaxPolicy {
    if cfg.auto_nmax {
        NmaxPolicy::Auto {
            rel_tol: 0.01,
            start: cfg.converge.n_max_start,
            limit: cfg.converge.n_max_limit,
        }
    } else {
        NmaxPolicy::Fixed(cfg.n_max)
    }
}

fn sweep(cfg: &RunConfig) -> Result<Produced, CliError> {
    let result = detuning_sweep(&cfg.system, &cfg.delta_grid.points(), nmax_policy(cfg), &solver(cfg))?;
    let mut summary = format!("{} points, n_max {}", result.points.len(), result.n_max);
    if let Some((d, g)) = result.min_g2() {
        let _ = write!(summary, ", min g2 {g:.6} at delta {d:.4}");
    }
    if let Some((d, n)) = result.max_n_s() {
        let _ = write!(summary, ", max n_s {n:.6e} at delta {d:.4}");
    }
    if result.failures() > 0 {
        let _ = write!(summary, ", {} failed points", result.failures());
    }
    Ok((render(cfg, || result.to_csv(), &result), summary, None))
}

fn threshold(cfg: &RunConfig) -> Result<Produced, CliError> {
    let t = &cfg.threshold;
    let opts = ThresholdOptions {
        n_max: t.n_max,
        solver: solver(cfg),
        ..Default::default()
    };
    let result = blockade_threshold(&cfg.system, t.target, t.bracket, &opts)?;
    let csv = || {
        format!(
            "target_g2,g_eff,degenerate,bisection_steps,n_max\n{:.16e},{:.16e},{},{},{}\n",
            t.target, result.g_eff, result.degenerate, result.bisection_steps, t.n_max
        )
    };
    let mut summary = format!("g_nl/Gamma_s = {:.4} for min g2 = {}", result.g_eff, t.target);
    if result.degenerate {
        summary.push_str(" (degenerate: target met at lower bracket edge)");
    }
    Ok((render(cfg, csv, &result), summary, None))
}

fn converge(cfg: &RunConfig) -> Result<Produced, CliError> {
    let c = &cfg.converge;
    let observable = Observable::MaxSeedOccupation { grid: c.grid.points() };
    let (report, deferred) = match converge_truncation(&cfg.system, &[observable], c.rel_tol, c.n_max_start, c.n_max_limit, &solver(cfg)) {
        Ok((_, report)) => (report, None),
        Err(CoreError::NotConverged { report }) => {
            let err = CliError::NotConverged(CoreError::NotConverged { report: report.clone() });
            (*report, Some(err))
        }
        Err(e) => return Err(e.into()),
    };
    let csv = || {
        let mut out = String::from("n_max,max_n_s,relative_change\n");
        for s in &report.steps {
            let change = s.relative_change.as_ref().map(|v| v[0]);
            let _ = writeln!(out, "{},{:.16e},{}", s.n_max, s.values[0], opt(change));
        }
        out
    };
    let summary = match report.converged_at() {
        Some(n) => format!("Max(n_s) converged (rel change < {}) at n_max {n}", c.rel_tol),
        None => format!("not converged up to n_max {}", report.final_n_max),
    };
    Ok((render(cfg, csv, &report), summary, deferred))
}

#[derive(Debug, Serialize)]
struct ProtocolRow {
    label: String,
    n_s: f64,
    n_i: f64,
    g2: Option<f64>,
    trace_distance_to_steady_state: f64,
    accepted_steps: usize,
    max_trace_drift: f64,
}

fn protocol(cfg: &RunConfig) -> Result<Produced, CliError> {
    let p = &cfg.protocol;
    let basis = FockBasis::new(cfg.n_max)?;
    let params = ProtocolParams {
        system: cfg.system,
        xpm_seed: p.xpm_seed,
        xpm_idler: p.xpm_idler,
    };
    let steady = steady_state_with(&cfg.system.lindblad_model(&basis)?, &solver(cfg))?.rho;
    let protocols = [DrivingProtocol::protocol_a(p.t1, p.t_c)?, DrivingProtocol::protocol_b(p.t1, p.t_c)?];
    let mut rows = Vec::new();
    let mut finals = Vec::new();
    for proto in &protocols {
        let (rho, stats) = run_protocol(&params, &basis, proto, p.t_final, cfg.tol)?;
        rows.push(ProtocolRow {
            label: format!("{:?}", proto.label),
            n_s: mean_occupation(&basis, &rho, Mode::Seed)?,
            n_i: mean_occupation(&basis, &rho, Mode::Idler)?,
            g2: g2_zero(&basis, &rho, Mode::Seed).ok(),
            trace_distance_to_steady_state: rho.trace_distance(&steady)?,
            accepted_steps: stats.accepted,
            max_trace_drift: stats.max_trace_drift,
        });
        finals.push(rho);
    }
    let between = finals[0].trace_distance(&finals[1])?;
    let csv = || {
        let mut out = String::from("protocol,n_s,n_i,g2,trace_distance_to_steady_state,accepted_steps,max_trace_drift\n");
        for r in &rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{},{:.16e},{},{:.16e}",
                r.label,
                r.n_s,
                r.n_i,
                opt(r.g2),
                r.trace_distance_to_steady_state,
                r.accepted_steps,
                r.max_trace_drift
            );
        }
        out
    };
    let summary = format!("trace distance between A and B final states {between:.3e} at t = {}", p.t_final);
    let json = serde_json::json!({ "rows": rows, "trace_distance_a_b": between });
    Ok((render(cfg, csv, &json), summary, None))
}

fn splitting(cfg: &RunConfig) -> Result<Produced, CliError> {
    let s = &cfg.splitting;
    let curves = splitting_scan(
        &cfg.system,
        &s.fs_grid,
        &cfg.delta_grid.points(),
        NmaxPolicy::Fixed(s.n_max),
        &solver(cfg),
    )?;
    let csv = || {
        let mut out = String::from("f_s,delta,normalized_n_s,n_max\n");
        for c in &curves {
            for (p, v) in c.sweep.points.iter().zip(&c.normalized) {
                let _ = writeln!(out, "{:.16e},{:.16e},{},{}", c.f_s, p.axis, opt(*v), p.n_max);
            }
        }
        out
    };
    let peaks: Vec<String> = curves.iter().map(|c| format!("F_s={}: {}", c.f_s, c.local_maxima)).collect();
    let summary = format!("local maxima per drive [{}], n_max {}", peaks.join(", "), s.n_max);
    Ok((render(cfg, csv, &curves), summary, None))
}

fn platforms(cfg: &RunConfig) -> Result<PlatformSet, CliError> {
    Ok(match &cfg.materials.data {
        Some(path) => load_platforms(path)?,
        None => bundled_platforms()?,
    })
}

#[derive(Debug, Serialize)]
struct MaterialRow {
    platform: String,
    power_w: f64,
    ratio: f64,
    g_nl_over_gamma: f64,
    alpha_p: f64,
    tabulated: Option<f64>,
}

fn materials(cfg: &RunConfig) -> Result<Produced, CliError> {
    let set = platforms(cfg)?;
    for w in &set.warnings {
        eprintln!("warning: {w}");
    }
    let m = &cfg.materials;
    let powers = match m.power {
        Some(p) => vec![p],
        None => log_power_grid(m.power_grid.lo, m.power_grid.hi, m.power_grid.n)?,
    };
    let mut rows = Vec::new();
    for p in &set.platforms {
        for &power in &powers {
            let est = effective_coupling(p, power)?;
            let tabulated = p.tabulated.and_then(|t| {
                [0.1, 1.0, 10.0]
                    .iter()
                    .position(|&x| (x - power).abs() <= 1e-12)
                    .map(|k| t[k])
            });
            rows.push(MaterialRow {
                platform: p.name.clone(),
                power_w: power,
                ratio: est.ratio,
                g_nl_over_gamma: est.g_nl_over_gamma,
                alpha_p: est.alpha_p,
                tabulated,
            });
        }
    }
    let csv = || {
        let mut out = String::from("platform,P_p,ratio,g_nl_over_gamma,alpha_p,tabulated\n");
        for r in &rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.platform,
                r.power_w,
                r.ratio,
                r.g_nl_over_gamma,
                r.alpha_p,
                opt(r.tabulated)
            );
        }
        for e in &set.estimates {
            for &(power, ratio) in &e.points {
                let _ = writeln!(out, "{} (reference),{power:.16e},{ratio:.16e},null,null,{ratio:.16e}", e.name);
            }
        }
        out
    };
    let summary = match m.power {
        Some(p) => {
            let ranking = set.ranking(p)?;
            let names: Vec<&str> = ranking.iter().map(|(n, _)| n.as_str()).collect();
            format!("{} platforms at {p} W, ranking {}", set.platforms.len(), names.join(" > "))
        }
        None => format!("{} platforms x {} powers", set.platforms.len(), powers.len()),
    };
    let json = serde_json::json!({ "rows": rows, "references": set.estimates, "warnings": set.warnings });
    Ok((render(cfg, csv, &json), summary, None))
}

fn comb(cfg: &RunConfig) -> Result<Produced, CliError> {
    let report = find_triplets(&cfg.comb)?;
    let csv = || {
        let mut out = String::from(
            "seed_m,pump_branch,idler_branch,omega_p_rad_s,omega_s_rad_s,omega_i_rad_s,f_p_hz,f_s_hz,f_i_hz,mismatch,isolation_rad_s,isolated\n",
        );
        for t in &report.triplets {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                t.seed.m,
                t.pump.branch,
                t.idler.branch,
                t.pump.omega_rad_per_s,
                t.seed.omega_rad_per_s,
                t.idler.omega_rad_per_s,
                t.pump.frequency_hz,
                t.seed.frequency_hz,
                t.idler.frequency_hz,
                t.mismatch,
                t.isolation,
                t.isolated
            );
        }
        out
    };
    for d in &report.diagnostics {
        eprintln!("note: {d}");
    }
    let worst = report.triplets.iter().map(|t| t.mismatch).fold(0.0, f64::max);
    let summary = format!(
        "{} resonances, {} triplets, worst relative mismatch {worst:.2e}",
        report.resonances.len(),
        report.triplets.len()
    );
    Ok((render(cfg, csv, &report), summary, None))
}
