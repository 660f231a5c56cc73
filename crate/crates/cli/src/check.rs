//! Analytic-limit self-tests behind `--check`.

use std::fmt::Write as _;

use blockade_core::comb::find_triplets;
use blockade_core::dynamics::evolve;
use blockade_core::materials::{bundled_platforms, effective_coupling};
use blockade_core::observables::{g2_zero, mean_occupation};
use blockade_core::steady::{steady_state_with, Backend};
use blockade_core::{c64, DensityMatrix, FockBasis, Mat, Mode, SolverOptions, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::{CliError, Outcome};

struct Check {
    name: &'static str,
    value: f64,
    tol: f64,
}

fn steady(p: &SystemParams, basis: &FockBasis, backend: Backend) -> blockade_core::Result<DensityMatrix> {
    let opts = SolverOptions {
        backend,
        ..SolverOptions::with_tol(1e-11)
    };
    Ok(steady_state_with(&p.lindblad_model(basis)?, &opts)?.rho)
}

fn checks(seed: u64) -> blockade_core::Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let basis = FockBasis::new(3)?;

    let linear = SystemParams::default()
        .with_delta(rng.gen_range(-3.0..3.0))
        .with_drive(c64::new(rng.gen_range(0.05..0.2), 0.0));
    let rho = steady(&linear, &basis, Backend::Auto)?;
    let n_s = mean_occupation(&basis, &rho, Mode::Seed)?;
    out.push(Check {
        name: "linear cavity occupation matches the Lorentzian",
        value: (n_s / linear.linear_occupation() - 1.0).abs(),
        tol: 1e-6,
    });
    out.push(Check {
        name: "linear cavity is coherent, g2(0) = 1",
        value: (g2_zero(&basis, &rho, Mode::Seed)? - 1.0).abs(),
        tol: 1e-6,
    });

    let undriven = SystemParams::default().with_g_eff(0.5).with_drive(c64::new(0.0, 0.0));
    let rho = steady(&undriven, &basis, Backend::Auto)?;
    out.push(Check {
        name: "undriven steady state is the vacuum",
        value: rho.trace_distance(&DensityMatrix::vacuum(basis.dim()))?,
        tol: 1e-10,
    });

    let small = FockBasis::new(2)?;
    let driven = SystemParams::default()
        .with_g_eff(rng.gen_range(0.2..1.0))
        .with_drive(c64::new(1.0, 0.0))
        .with_delta(rng.gen_range(-1.0..1.0));
    let direct = steady(&driven, &small, Backend::SparseLu)?;
    let krylov = steady(&driven, &small, Backend::Gmres)?;
    out.push(Check {
        name: "sparse LU and preconditioned GMRES agree",
        value: direct.trace_distance(&krylov)?,
        tol: 1e-8,
    });

    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let rotated = driven.with_complex_coupling(c64::from_polar(driven.g_eff, phase));
    let rho_rot = steady(&rotated, &small, Backend::Auto)?;
    let n_ref = mean_occupation(&small, &direct, Mode::Seed)?;
    out.push(Check {
        name: "seed observables do not depend on the coupling phase",
        value: (mean_occupation(&small, &rho_rot, Mode::Seed)? - n_ref).abs() / n_ref,
        tol: 1e-8,
    });

    let d = small.dim();
    let g = Mat::from_fn(d, d, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let rho0 = DensityMatrix::from_ginibre(g.as_ref())?;
    let traj = evolve(&driven.lindblad_model(&small)?, &rho0, 60.0, 1e-10)?;
    out.push(Check {
        name: "random initial state relaxes to the steady state",
        value: traj.final_state().trace_distance(&direct)?,
        tol: 1e-6,
    });

    let report = find_triplets(&RunConfig::default().comb)?;
    let worst = report.triplets.iter().map(|t| t.mismatch).fold(0.0, f64::max);
    out.push(Check {
        name: "comb triplets are equally spaced",
        value: if report.triplets.is_empty() { f64::INFINITY } else { worst },
        tol: 1e-9,
    });

    let set = bundled_platforms()?;
    let p = &set.platforms[0];
    let r1 = effective_coupling(p, 0.1)?.ratio;
    let r4 = effective_coupling(p, 0.4)?.ratio;
    out.push(Check {
        name: "effective coupling scales as sqrt(P)",
        value: (r4 / r1 - 2.0).abs(),
        tol: 1e-12,
    });
    Ok(out)
}

pub fn run_checks(seed: u64) -> Result<Outcome, CliError> {
    let results = checks(seed).map_err(CliError::Solver)?;
    let mut report = String::new();
    let mut failed = 0;
    for c in &results {
        let pass = c.value <= c.tol;
        failed += usize::from(!pass);
        let _ = writeln!(
            report,
            "{} {}: {:.3e} (tol {:.0e})",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tol
        );
    }
    if failed > 0 {
        eprint!("{report}");
        return Err(CliError::CheckFailed(failed));
    }
    Ok(Outcome {
        stdout: Some(report),
        summary: format!("check: {} passed (seed {seed})", results.len()),
    })
}
