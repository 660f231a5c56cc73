//! Cross-checks between independent routes, plus property tests on random
//! parameters.

use blockade_core::dynamics::evolve;
use blockade_core::fock::single_mode_annihilator;
use blockade_core::liouvillian::{unvec, vec_of, vectorize};
use blockade_core::observables::{g2_zero, mean_occupation};
use blockade_core::steady::{pump_steady_state, steady_state_with, Backend};
use blockade_core::{c64, DensityMatrix, FockBasis, Mat, Mode, PumpParams, SolverOptions, SystemParams};
use proptest::prelude::*;

/// `exp(L t) v` through a Taylor step and repeated squaring of the dense generator.
fn dense_propagate(l: &Mat<c64>, t: f64, v: &[c64]) -> Vec<c64> {
    let n = l.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| l[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = (norm1 * t / 0.5).log2().ceil().max(0.0) as i32;
    let h = t / 2f64.powi(squarings);
    let a = Mat::from_fn(n, n, |i, j| l[(i, j)] * h);
    let mut e = Mat::<c64>::identity(n, n);
    let mut term = Mat::<c64>::identity(n, n);
    for k in 1..=18 {
        let next = &term * &a;
        term = Mat::from_fn(n, n, |i, j| next[(i, j)] / k as f64);
        e = &e + &term;
    }
    for _ in 0..squarings {
        e = &e * &e;
    }
    (0..n).map(|i| (0..n).map(|j| e[(i, j)] * v[j]).sum()).collect()
}

#[test]
fn kerr_pump_matches_dense_long_time_integration() {
    let p = PumpParams {
        pump_detuning: 0.4,
        f_p: c64::new(0.3, 0.0),
        gamma_wg: 0.5,
        gamma_p: 1.0,
        g_kerr: 0.7,
        n_max_pump: 8,
    };
    let pump = pump_steady_state(&p, 1e-12).unwrap();

    let cutoff = 12;
    let model = p.lindblad_model(cutoff).unwrap();
    let dense = vectorize(&model).to_dense().unwrap();
    let d = cutoff + 1;
    let v0 = vec_of(DensityMatrix::vacuum(d).matrix());
    let rho = DensityMatrix::from_matrix_unchecked(unvec(&dense_propagate(&dense, 200.0, &v0), d));
    let a = single_mode_annihilator(cutoff);
    let n = rho.expectation(&a.adjoint().matmul(&a).unwrap()).unwrap().re;
    let alpha = rho.expectation(&a).unwrap();

    assert!((n - pump.occupation).abs() <= 1e-8, "{n} vs {}", pump.occupation);
    assert!((alpha - pump.alpha).norm() <= 1e-8);
    // Kerr detuning lowers the occupation below the linear value at this detuning sign.
    assert!(pump.occupation < p.linear_amplitude().norm_sqr());
}

#[test]
fn steady_state_is_the_long_time_limit() {
    let basis = FockBasis::new(2).unwrap();
    let p = SystemParams::default()
        .with_g_eff(0.8)
        .with_drive(c64::new(1.2, 0.0))
        .with_delta(-0.4);
    let model = p.lindblad_model(&basis).unwrap();
    let direct = steady_state_with(&model, &SolverOptions::default()).unwrap().rho;
    let traj = evolve(&model, &DensityMatrix::vacuum(basis.dim()), 150.0, 1e-11).unwrap();
    assert!(traj.final_state().trace_distance(&direct).unwrap() < 1e-7);
    assert!(traj.stats.max_trace_drift < 1e-9);
}

fn arb_params() -> impl Strategy<Value = SystemParams> {
    (-3.0f64..3.0, 0.05f64..1.5, 0.0f64..1.5, 0.1f64..1.0, 0.5f64..2.0).prop_map(|(delta, f, g, gamma, gi)| {
        SystemParams {
            gamma,
            gamma_i: gi,
            ..SystemParams::default()
        }
        .with_delta(delta)
        .with_drive(c64::new(f, 0.0))
        .with_g_eff(g)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steady_states_are_valid_density_matrices(p in arb_params()) {
        let basis = FockBasis::new(2).unwrap();
        let sol = steady_state_with(&p.lindblad_model(&basis).unwrap(), &SolverOptions::default()).unwrap();
        prop_assert!(sol.rho.hermiticity_defect() <= 1e-10);
        prop_assert!((sol.rho.trace() - 1.0).norm() <= 1e-10);
        prop_assert!(sol.rho.min_eigenvalue() >= -1e-8);
    }

    #[test]
    fn backends_agree(p in arb_params()) {
        let basis = FockBasis::new(2).unwrap();
        let model = p.lindblad_model(&basis).unwrap();
        let solve = |backend| {
            steady_state_with(&model, &SolverOptions { backend, ..SolverOptions::with_tol(1e-12) }).unwrap().rho
        };
        prop_assert!(solve(Backend::SparseLu).trace_distance(&solve(Backend::Gmres)).unwrap() <= 1e-9);
    }

    #[test]
    fn seed_statistics_are_even_in_detuning(p in arb_params()) {
        let basis = FockBasis::new(2).unwrap();
        let opts = SolverOptions::with_tol(1e-12);
        let at = |delta: f64| {
            let rho = steady_state_with(&p.with_delta(delta).lindblad_model(&basis).unwrap(), &opts).unwrap().rho;
            (mean_occupation(&basis, &rho, Mode::Seed).unwrap(), g2_zero(&basis, &rho, Mode::Seed).unwrap())
        };
        let (n_plus, g_plus) = at(p.delta);
        let (n_minus, g_minus) = at(-p.delta);
        prop_assert!((n_plus - n_minus).abs() <= 1e-8 * n_plus.max(1e-3));
        prop_assert!((g_plus - g_minus).abs() <= 1e-8);
    }

    #[test]
    fn coupling_phase_is_a_gauge(p in arb_params(), phase in 0.0f64..std::f64::consts::TAU) {
        let basis = FockBasis::new(2).unwrap();
        let opts = SolverOptions::with_tol(1e-12);
        let rotated = p.with_complex_coupling(c64::from_polar(p.g_eff, phase));
        let a = steady_state_with(&p.lindblad_model(&basis).unwrap(), &opts).unwrap().rho;
        let b = steady_state_with(&rotated.lindblad_model(&basis).unwrap(), &opts).unwrap().rho;
        for mode in [Mode::Seed, Mode::Idler] {
            let na = mean_occupation(&basis, &a, mode).unwrap();
            let nb = mean_occupation(&basis, &b, mode).unwrap();
            prop_assert!((na - nb).abs() <= 1e-10 * na.max(1e-6));
        }
    }

    #[test]
    fn fock_state_g2(n in 1usize..6) {
        let basis = FockBasis::new(3).unwrap();
        let rho = DensityMatrix::basis_state(basis.dim(), basis.index(n, 0).unwrap());
        let expected = (n as f64 - 1.0) / n as f64;
        prop_assert!((g2_zero(&basis, &rho, Mode::Seed).unwrap() - expected).abs() <= 1e-15);
    }
}
