//! Time integration of the master equation and piecewise-constant driving
//! protocols.
//!
//! The pump mode is eliminated from the reduced model, so switching the pump
//! on or off maps to switching g̃ between its target and zero, together with
//! the cross-phase-modulation shifts the pump population induces on the seed
//! and idler detunings.

use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fock::{FockBasis, Mode};
use crate::liouvillian::LindbladModel;
use crate::model::{FullModelParams, SystemParams};
use crate::observables::{g2_zero, mean_occupation};
use crate::steady::DensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the generator scale when `None`.
    pub initial_step: Option<f64>,
    /// Steps below this are treated as stiffness failure.
    pub min_step: f64,
    pub max_steps: usize,
}

impl EvolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            initial_step: None,
            min_step: 1e-14,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest `|Tr ρ(t) − 1|` seen at accepted steps.
    pub max_trace_drift: f64,
    /// Largest `|ρ − ρ†|` entry seen at accepted steps.
    pub max_hermiticity_defect: f64,
}

impl IntegratorStats {
    fn absorb(&mut self, other: &IntegratorStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.evaluations += other.evaluations;
        self.max_trace_drift = self.max_trace_drift.max(other.max_trace_drift);
        self.max_hermiticity_defect = self.max_hermiticity_defect.max(other.max_hermiticity_defect);
    }
}

/// Sampled states of one integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Raw integrated states at `times`; never renormalized.
    pub states: Vec<Mat<c64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn final_matrix(&self) -> MatRef<'_, c64> {
        self.states.last().expect("trajectory holds the initial state").as_ref()
    }

    /// Final state wrapped as a density matrix (unchecked; see [`DensityMatrix::validate`]).
    pub fn final_state(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(self.final_matrix().to_owned())
    }

    /// CSV with columns `time,n_s,n_i,g2,trace_drift`; g²(0) is `null` when undefined.
    pub fn to_csv(&self, basis: &FockBasis) -> Result<String> {
        let mut out = String::from("time,n_s,n_i,g2,trace_drift\n");
        for (t, m) in self.times.iter().zip(&self.states) {
            let tr: c64 = (0..m.nrows()).map(|k| m[(k, k)]).sum();
            let rho = DensityMatrix::from_matrix_unchecked(m.clone());
            let n_s = mean_occupation(basis, &rho, Mode::Seed)?;
            let n_i = mean_occupation(basis, &rho, Mode::Idler)?;
            let g2 = match g2_zero(basis, &rho, Mode::Seed) {
                Ok(g) => format!("{g:.16e}"),
                Err(Error::UndefinedG2 { .. }) => "null".into(),
                Err(e) => return Err(e),
            };
            let _ = writeln!(out, "{t:.16e},{n_s:.16e},{n_i:.16e},{g2},{:.16e}", (tr - 1.0).norm());
        }
        Ok(out)
    }
}

fn trace_drift(m: MatRef<'_, c64>) -> f64 {
    let tr: c64 = (0..m.nrows()).map(|k| m[(k, k)]).sum();
    (tr - 1.0).norm()
}

fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..d {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `y + h Σ c_k k_k`.
fn combine(y: MatRef<'_, c64>, h: f64, terms: &[(f64, &Mat<c64>)]) -> Mat<c64> {
    let d = y.nrows();
    let mut out = y.to_owned();
    for &(c, k) in terms {
        if c == 0.0 {
            continue;
        }
        let s = h * c;
        for j in 0..d {
            for i in 0..d {
                out[(i, j)] += s * k[(i, j)];
            }
        }
    }
    out
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn check_initial(model: &LindbladModel, rho0: &DensityMatrix, t_final: f64) -> Result<()> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter(format!("t_final must be positive, got {t_final}")));
    }
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    rho0.validate()
}

/// Integrates `dρ/dt = 𝓛[ρ]` from 0 to `t_final` with tolerance `tol`,
/// returning the initial and final states.
pub fn evolve(model: &LindbladModel, rho0: &DensityMatrix, t_final: f64, tol: f64) -> Result<Trajectory> {
    evolve_sampled(model, rho0, &[t_final], &EvolveOptions::with_tol(tol))
}

/// Adaptive Dormand–Prince 5(4) integration, sampling at the given
/// increasing times (the last one is the end of the run).
pub fn evolve_sampled(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    sample_times: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let t_final = *sample_times
        .last()
        .ok_or_else(|| Error::InvalidParameter("no sample times".into()))?;
    check_initial(model, rho0, t_final)?;
    if sample_times.iter().any(|&t| !(t > 0.0)) || sample_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sample times must be positive and increasing".into()));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidParameter("integration tolerances must be positive".into()));
    }
    let d = model.dim();
    let mut stats = IntegratorStats::default();
    let mut y = rho0.matrix().to_owned();
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];

    let mut h = opts
        .initial_step
        .unwrap_or_else(|| 0.01 * opts.rtol.powf(0.2) / model.scale())
        .min(t_final);
    let mut k: Vec<Mat<c64>> = (0..7).map(|_| Mat::zeros(d, d)).collect();
    model.apply_into(y.as_ref(), &mut k[0]);
    stats.evaluations += 1;

    for &target in sample_times {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            for s in 1..7 {
                let stage = {
                    let terms: Vec<(f64, &Mat<c64>)> = (0..s).map(|j| (A[s][j], &k[j])).collect();
                    combine(y.as_ref(), step, &terms)
                };
                model.apply_into(stage.as_ref(), &mut k[s]);
                stats.evaluations += 1;
            }
            let y5 = combine(y.as_ref(), step, &(0..7).map(|j| (B5[j], &k[j])).collect::<Vec<_>>());
            let mut err = 0.0f64;
            for j in 0..d {
                for i in 0..d {
                    let mut e = c64::new(0.0, 0.0);
                    for s in 0..7 {
                        e += (B5[s] - B4[s]) * k[s][(i, j)];
                    }
                    let scale = opts.atol + opts.rtol * y[(i, j)].norm().max(y5[(i, j)].norm());
                    err = err.max(step * e.norm() / scale);
                }
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = y5;
                // First-same-as-last: the seventh stage is 𝓛 at the new point.
                k.swap(0, 6);
                stats.accepted += 1;
                stats.max_trace_drift = stats.max_trace_drift.max(trace_drift(y.as_ref()));
                stats.max_hermiticity_defect = stats.max_hermiticity_defect.max(hermiticity_defect(y.as_ref()));
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || step >= h {
                    h = step * factor;
                }
            } else {
                let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = step * factor;
                stats.rejected += 1;
                if h < opts.min_step {
                    return Err(Error::StepSizeUnderflow { t, h });
                }
            }
        }
        times.push(t);
        states.push(y.clone());
    }
    Ok(Trajectory { times, states, stats })
}

/// Classical fixed-step RK4; used for golden comparisons of the adaptive scheme.
pub fn evolve_rk4(model: &LindbladModel, rho0: &DensityMatrix, t_final: f64, steps: usize) -> Result<Trajectory> {
    check_initial(model, rho0, t_final)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("RK4 needs at least one step".into()));
    }
    let d = model.dim();
    let h = t_final / steps as f64;
    let mut y = rho0.matrix().to_owned();
    let mut stats = IntegratorStats::default();
    let mut k: Vec<Mat<c64>> = (0..4).map(|_| Mat::zeros(d, d)).collect();
    for _ in 0..steps {
        model.apply_into(y.as_ref(), &mut k[0]);
        let y1 = combine(y.as_ref(), 0.5 * h, &[(1.0, &k[0])]);
        model.apply_into(y1.as_ref(), &mut k[1]);
        let y2 = combine(y.as_ref(), 0.5 * h, &[(1.0, &k[1])]);
        model.apply_into(y2.as_ref(), &mut k[2]);
        let y3 = combine(y.as_ref(), h, &[(1.0, &k[2])]);
        model.apply_into(y3.as_ref(), &mut k[3]);
        y = combine(
            y.as_ref(),
            h,
            &[(1.0 / 6.0, &k[0]), (1.0 / 3.0, &k[1]), (1.0 / 3.0, &k[2]), (1.0 / 6.0, &k[3])],
        );
        stats.accepted += 1;
        stats.evaluations += 4;
        stats.max_trace_drift = stats.max_trace_drift.max(trace_drift(y.as_ref()));
        stats.max_hermiticity_defect = stats.max_hermiticity_defect.max(hermiticity_defect(y.as_ref()));
    }
    Ok(Trajectory {
        times: vec![0.0, t_final],
        states: vec![rho0.matrix().to_owned(), y],
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolLabel {
    A,
    B,
    Custom,
}

/// Drive configuration that holds from `time` until the next switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Switch {
    pub time: f64,
    pub pump_on: bool,
    pub seed_on: bool,
}

/// Piecewise-constant drive schedule; both drives are off before the first switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingProtocol {
    pub label: ProtocolLabel,
    pub schedule: Vec<Switch>,
}

impl DrivingProtocol {
    /// Pump on at `t1`, seed added at `t_c`.
    pub fn protocol_a(t1: f64, t_c: f64) -> Result<Self> {
        Self::new(
            ProtocolLabel::A,
            vec![
                Switch { time: t1, pump_on: true, seed_on: false },
                Switch { time: t_c, pump_on: true, seed_on: true },
            ],
        )
    }

    /// Seed on at `t1`, pump added at `t_c`.
    pub fn protocol_b(t1: f64, t_c: f64) -> Result<Self> {
        Self::new(
            ProtocolLabel::B,
            vec![
                Switch { time: t1, pump_on: false, seed_on: true },
                Switch { time: t_c, pump_on: true, seed_on: true },
            ],
        )
    }

    pub fn custom(schedule: Vec<Switch>) -> Result<Self> {
        Self::new(ProtocolLabel::Custom, schedule)
    }

    fn new(label: ProtocolLabel, schedule: Vec<Switch>) -> Result<Self> {
        let p = Self { label, schedule };
        p.validate()?;
        Ok(p)
    }

    /// Switch times must be non-negative and strictly increasing. Protocols
    /// A and B must end in the continuous-wave regime with both drives on.
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::InvalidProtocol("empty schedule".into()));
        }
        if self.schedule.iter().any(|s| !(s.time >= 0.0) || !s.time.is_finite()) {
            return Err(Error::InvalidProtocol("switch times must be finite and non-negative".into()));
        }
        if self.schedule.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::InvalidProtocol("switch times must be strictly increasing".into()));
        }
        let last = self.schedule.last().expect("nonempty");
        if self.label != ProtocolLabel::Custom && !(last.pump_on && last.seed_on) {
            return Err(Error::InvalidProtocol(format!(
                "protocol {:?} must end with both drives on",
                self.label
            )));
        }
        Ok(())
    }

    pub fn last_switch(&self) -> f64 {
        self.schedule.last().map_or(0.0, |s| s.time)
    }
}

/// Reduced-model parameters with the pump on, plus the XPM shifts the pump
/// population adds to the seed and idler detunings.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub system: SystemParams,
    /// `g_psps ⟨n̂_p⟩`.
    pub xpm_seed: f64,
    /// `g_pipi ⟨n̂_p⟩`.
    pub xpm_idler: f64,
}

impl ProtocolParams {
    /// Lindblad model for one drive configuration.
    pub fn segment_model(&self, basis: &FockBasis, pump_on: bool, seed_on: bool) -> Result<LindbladModel> {
        let mut system = self.system;
        if !seed_on {
            system.f_s = c64::new(0.0, 0.0);
        }
        let full = if pump_on {
            FullModelParams::from(system)
        } else {
            system.g_eff = 0.0;
            let idler = 2.0 * system.delta - self.xpm_idler;
            system.delta -= self.xpm_seed;
            FullModelParams {
                idler_detuning_override: Some(idler),
                ..FullModelParams::from(system)
            }
        };
        full.lindblad_model(basis)
    }
}

/// Runs `protocol` from the vacuum at `t = 0` to `t_final`, integrating each
/// constant-drive segment with its own model.
pub fn run_protocol(
    params: &ProtocolParams,
    basis: &FockBasis,
    protocol: &DrivingProtocol,
    t_final: f64,
    tol: f64,
) -> Result<(DensityMatrix, IntegratorStats)> {
    protocol.validate()?;
    if !(t_final > protocol.last_switch()) {
        return Err(Error::InvalidProtocol(format!(
            "t_final {t_final} must exceed the last switch time {}",
            protocol.last_switch()
        )));
    }
    let mut rho = DensityMatrix::vacuum(basis.dim());
    let mut stats = IntegratorStats::default();
    let mut t = 0.0;
    let mut config = (false, false);
    let ends = protocol
        .schedule
        .iter()
        .map(|s| (s.time, (s.pump_on, s.seed_on)))
        .chain(std::iter::once((t_final, (false, false))));
    for (end, next) in ends {
        if end > t {
            let model = params.segment_model(basis, config.0, config.1)?;
            let traj = evolve(&model, &rho, end - t, tol)?;
            stats.absorb(&traj.stats);
            rho = traj.final_state();
            t = end;
        }
        config = next;
    }
    Ok((rho, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::single_mode_annihilator;
    use crate::sparse::SparseOperator;
    use crate::steady::steady_state;

    fn decay_model(cutoff: usize, rate: f64) -> LindbladModel {
        LindbladModel::new(SparseOperator::zeros(cutoff + 1, cutoff + 1), vec![(single_mode_annihilator(cutoff), rate)])
            .unwrap()
    }

    #[test]
    fn single_photon_decays_exponentially() {
        let model = decay_model(2, 1.3);
        let rho0 = DensityMatrix::basis_state(3, 1);
        let samples: Vec<f64> = (1..=20).map(|k| 0.25 * k as f64).collect();
        let traj = evolve_sampled(&model, &rho0, &samples, &EvolveOptions::with_tol(1e-10)).unwrap();
        for (t, m) in traj.times.iter().zip(&traj.states) {
            let n = m[(1, 1)].re + 2.0 * m[(2, 2)].re;
            assert!((n - (-1.3 * t).exp()).abs() < 1e-6, "t={t}");
        }
        assert!(traj.stats.max_trace_drift < 1e-9);
    }

    #[test]
    fn zero_generator_leaves_state_unchanged() {
        let model = LindbladModel::new(SparseOperator::zeros(4, 4), vec![]).unwrap();
        let psi = [c64::new(0.5, 0.1), c64::new(0.0, 0.3), c64::new(0.7, 0.0), c64::new(-0.2, 0.2)];
        let rho0 = DensityMatrix::pure(&psi).unwrap();
        let traj = evolve(&model, &rho0, 10.0, 1e-8).unwrap();
        assert_eq!(traj.final_matrix(), rho0.matrix());
    }

    #[test]
    fn relaxes_to_direct_steady_state() {
        let basis = FockBasis::new(2).unwrap();
        let p = SystemParams::default().with_g_eff(0.6).with_drive(c64::new(0.8, 0.0)).with_delta(0.3);
        let model = p.lindblad_model(&basis).unwrap();
        let ss = steady_state(&model, 1e-12).unwrap();
        let traj = evolve(&model, &DensityMatrix::vacuum(basis.dim()), 50.0, 1e-10).unwrap();
        assert!(traj.final_state().trace_distance(&ss).unwrap() < 1e-6);
        assert!(traj.stats.max_trace_drift <= 1e-9);
        assert!(traj.stats.max_hermiticity_defect <= 1e-9);
    }

    #[test]
    fn rk4_matches_adaptive() {
        let basis = FockBasis::new(1).unwrap();
        let p = SystemParams::default().with_g_eff(0.5).with_drive(c64::new(0.5, 0.2));
        let model = p.lindblad_model(&basis).unwrap();
        let rho0 = DensityMatrix::vacuum(basis.dim());
        let a = evolve(&model, &rho0, 3.0, 1e-11).unwrap();
        let b = evolve_rk4(&model, &rho0, 3.0, 3000).unwrap();
        assert!(a.final_state().trace_distance(&b.final_state()).unwrap() < 1e-9);
    }

    #[test]
    fn protocol_validation() {
        assert!(DrivingProtocol::protocol_a(2.0, 1.0).is_err());
        assert!(DrivingProtocol::protocol_a(1.0, 1.0).is_err());
        let bad = DrivingProtocol {
            label: ProtocolLabel::B,
            schedule: vec![Switch { time: 1.0, pump_on: false, seed_on: true }],
        };
        assert!(bad.validate().is_err());
        assert!(DrivingProtocol::custom(vec![Switch { time: 0.0, pump_on: false, seed_on: false }]).is_ok());
    }

    #[test]
    fn protocol_with_drives_off_stays_in_vacuum() {
        let basis = FockBasis::new(2).unwrap();
        let params = ProtocolParams {
            system: SystemParams::default().with_g_eff(0.4),
            xpm_seed: 0.1,
            xpm_idler: 0.2,
        };
        let protocol = DrivingProtocol::custom(vec![Switch { time: 0.0, pump_on: false, seed_on: false }]).unwrap();
        let (rho, _) = run_protocol(&params, &basis, &protocol, 5.0, 1e-10).unwrap();
        assert!(rho.trace_distance(&DensityMatrix::vacuum(basis.dim())).unwrap() < 1e-12);
    }

    #[test]
    fn single_segment_protocol_equals_evolve() {
        let basis = FockBasis::new(2).unwrap();
        let params = ProtocolParams {
            system: SystemParams::default().with_g_eff(0.4).with_drive(c64::new(0.6, 0.0)),
            ..Default::default()
        };
        let protocol = DrivingProtocol::custom(vec![Switch { time: 0.0, pump_on: true, seed_on: true }]).unwrap();
        let (rho, _) = run_protocol(&params, &basis, &protocol, 4.0, 1e-10).unwrap();
        let model = params.system.lindblad_model(&basis).unwrap();
        let traj = evolve(&model, &DensityMatrix::vacuum(basis.dim()), 4.0, 1e-10).unwrap();
        assert!(rho.trace_distance(&traj.final_state()).unwrap() < 1e-13);
    }

    #[test]
    fn trajectory_csv_has_expected_columns() {
        let basis = FockBasis::new(1).unwrap();
        let model = SystemParams::default().lindblad_model(&basis).unwrap();
        let traj = evolve(&model, &DensityMatrix::vacuum(basis.dim()), 1.0, 1e-8).unwrap();
        let csv = traj.to_csv(&basis).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("time,n_s,n_i,g2,trace_drift"));
        assert!(lines.next().unwrap().contains("null"));
        assert_eq!(lines.count(), 1);
    }
}
