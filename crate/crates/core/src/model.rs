//! Hamiltonians of the seed–idler subsystem and of the driven Kerr pump mode.
//!
//! All rates are in units of the seed linewidth Γ_s and ħ = 1, so every
//! Hamiltonian entry is a rate. Drive amplitudes carry units of rate^(1/2)
//! and enter as `i√γ (F â† − F* â)`.

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{single_mode_annihilator, FockBasis, Mode};
use crate::liouvillian::LindbladModel;
use crate::sparse::SparseOperator;

/// Physical rates of the effective two-mode model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Detuning Δ = ω_s − Ω_s.
    pub delta: f64,
    /// Seed drive amplitude F_s.
    pub f_s: c64,
    /// Waveguide coupling rate γ.
    pub gamma: f64,
    /// Total seed linewidth Γ_s.
    pub gamma_s: f64,
    /// Total idler linewidth Γ_i.
    pub gamma_i: f64,
    /// Effective nonlinear rate g̃ (modulus).
    pub g_eff: f64,
    /// Phase of the nonlinear coupling, removable by rephasing the idler.
    #[serde(default)]
    pub gauge_phase: f64,
}

impl Default for SystemParams {
    /// Γ_i = Γ_s, γ/Γ_s = 0.5, F_s/√Γ_s = 0.1, Δ = 0, g̃ = 0.
    fn default() -> Self {
        Self {
            delta: 0.0,
            f_s: c64::new(0.1, 0.0),
            gamma: 0.5,
            gamma_s: 1.0,
            gamma_i: 1.0,
            g_eff: 0.0,
            gauge_phase: 0.0,
        }
    }
}

impl SystemParams {
    pub fn with_g_eff(mut self, g_eff: f64) -> Self {
        self.g_eff = g_eff;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_drive(mut self, f_s: c64) -> Self {
        self.f_s = f_s;
        self
    }

    /// Sets modulus and phase from a complex coupling.
    pub fn with_complex_coupling(mut self, g: c64) -> Self {
        let (g_eff, phase) = gauge_fix(g);
        self.g_eff = g_eff;
        self.gauge_phase = phase;
        self
    }

    pub fn coupling(&self) -> c64 {
        c64::from_polar(self.g_eff, self.gauge_phase)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.delta, self.f_s.re, self.f_s.im, self.gamma, self.gamma_s, self.gamma_i, self.g_eff, self.gauge_phase]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite system parameter".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.gamma_s < self.gamma {
            return Err(Error::InvalidParameter(format!(
                "gamma_s ({}) must include the waveguide coupling gamma ({})",
                self.gamma_s, self.gamma
            )));
        }
        if !(self.gamma_i > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma_i must be positive, got {}", self.gamma_i)));
        }
        if self.g_eff < 0.0 {
            return Err(Error::InvalidParameter(format!("g_eff must be non-negative, got {}", self.g_eff)));
        }
        Ok(())
    }

    /// Lindblad model with one-photon loss on seed and idler.
    pub fn lindblad_model(&self, basis: &FockBasis) -> Result<LindbladModel> {
        self.validate()?;
        two_mode_model(basis, effective_hamiltonian(basis, self), self)
    }

    /// Mean seed occupation of the linear (g̃ = 0) cavity,
    /// `γ|F_s|² / (Δ² + (Γ_s/2)²)`.
    pub fn linear_occupation(&self) -> f64 {
        self.gamma * self.f_s.norm_sqr() / (self.delta * self.delta + 0.25 * self.gamma_s * self.gamma_s)
    }

    /// Coherent amplitude of the linear cavity, `√γ F_s / (iΔ + Γ_s/2)`.
    pub fn linear_amplitude(&self) -> c64 {
        self.gamma.sqrt() * self.f_s / c64::new(0.5 * self.gamma_s, self.delta)
    }
}

/// Seed–idler model including Kerr self/cross phase modulation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FullModelParams {
    pub system: SystemParams,
    pub g_ssss: f64,
    pub g_iiii: f64,
    pub g_sisi: f64,
    /// Replaces the `2Δ` idler detuning when the triplet is not exactly aligned.
    #[serde(default)]
    pub idler_detuning_override: Option<f64>,
}

impl FullModelParams {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let finite = [self.g_ssss, self.g_iiii, self.g_sisi, self.idler_detuning_override.unwrap_or(0.0)]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite SPM/XPM rate".into()));
        }
        Ok(())
    }

    pub fn lindblad_model(&self, basis: &FockBasis) -> Result<LindbladModel> {
        self.validate()?;
        two_mode_model(basis, full_hamiltonian(basis, self), &self.system)
    }
}

impl From<SystemParams> for FullModelParams {
    fn from(system: SystemParams) -> Self {
        Self {
            system,
            ..Default::default()
        }
    }
}

/// Single driven Kerr mode used to find the pump amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpParams {
    /// ω̃_p − Ω_p.
    pub pump_detuning: f64,
    pub f_p: c64,
    pub gamma_wg: f64,
    /// Total pump linewidth Γ_p.
    pub gamma_p: f64,
    /// Self-phase modulation rate g_pppp.
    pub g_kerr: f64,
    pub n_max_pump: usize,
}

impl PumpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_wg > 0.0) || self.gamma_p < self.gamma_wg {
            return Err(Error::InvalidParameter(format!(
                "need gamma_p >= gamma_wg > 0, got gamma_p={} gamma_wg={}",
                self.gamma_p, self.gamma_wg
            )));
        }
        if self.n_max_pump < 1 {
            return Err(Error::InvalidParameter("n_max_pump must be at least 1".into()));
        }
        let finite = [self.pump_detuning, self.f_p.re, self.f_p.im, self.g_kerr]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite pump parameter".into()));
        }
        Ok(())
    }

    /// Amplitude of the linear (Kerr-free) pump cavity.
    pub fn linear_amplitude(&self) -> c64 {
        self.gamma_wg.sqrt() * self.f_p / c64::new(0.5 * self.gamma_p, self.pump_detuning)
    }

    /// Single-mode Lindblad model at the given cutoff.
    pub fn lindblad_model(&self, cutoff: usize) -> Result<LindbladModel> {
        let mut p = *self;
        p.n_max_pump = cutoff;
        p.validate()?;
        let h = kerr_pump_hamiltonian(cutoff, &p);
        LindbladModel::new(h, vec![(single_mode_annihilator(cutoff), p.gamma_p)])
    }
}

fn two_mode_model(basis: &FockBasis, h: SparseOperator, p: &SystemParams) -> Result<LindbladModel> {
    LindbladModel::new(
        h,
        vec![
            (basis.annihilator(Mode::Seed), p.gamma_s),
            (basis.annihilator(Mode::Idler), p.gamma_i),
        ],
    )
}

fn drive_term(a: &SparseOperator, gamma: f64, f: c64) -> SparseOperator {
    // i√γ (F a† − F* a)
    let s = c64::new(0.0, gamma.sqrt());
    a.adjoint()
        .scale(s * f)
        .sub(&a.scale(s * f.conj()))
        .expect("same shape")
}

/// `Δ(n̂_s + 2n̂_i) + i√γ(F_s â_s† − F_s* â_s) + g̃(e^{iφ} â_s†² â_i + h.c.)`.
pub fn effective_hamiltonian(basis: &FockBasis, p: &SystemParams) -> SparseOperator {
    effective_with_idler_detuning(basis, p, 2.0 * p.delta)
}

fn effective_with_idler_detuning(basis: &FockBasis, p: &SystemParams, idler_detuning: f64) -> SparseOperator {
    let a_s = basis.annihilator(Mode::Seed);
    let a_i = basis.annihilator(Mode::Idler);
    let detuning = basis
        .number_operator(Mode::Seed)
        .scale_real(p.delta)
        .add(&basis.number_operator(Mode::Idler).scale_real(idler_detuning))
        .expect("same shape");

    let a_s_dag = a_s.adjoint();
    let conversion = a_s_dag
        .matmul(&a_s_dag)
        .and_then(|m| m.matmul(&a_i))
        .expect("same shape")
        .scale(p.coupling());
    let nonlinear = conversion.add(&conversion.adjoint()).expect("same shape");

    detuning
        .add(&drive_term(&a_s, p.gamma, p.f_s))
        .and_then(|h| h.add(&nonlinear))
        .expect("same shape")
}

/// Effective Hamiltonian plus `g_ssss â_s†²â_s² + g_iiii â_i†²â_i² + g_sisi n̂_s n̂_i`.
pub fn full_hamiltonian(basis: &FockBasis, p: &FullModelParams) -> SparseOperator {
    let idler_detuning = p.idler_detuning_override.unwrap_or(2.0 * p.system.delta);
    let h = effective_with_idler_detuning(basis, &p.system, idler_detuning);
    let cross = basis
        .number_operator(Mode::Seed)
        .matmul(&basis.number_operator(Mode::Idler))
        .expect("same shape");
    h.add(&basis.pair_operator(Mode::Seed).scale_real(p.g_ssss))
        .and_then(|h| h.add(&basis.pair_operator(Mode::Idler).scale_real(p.g_iiii)))
        .and_then(|h| h.add(&cross.scale_real(p.g_sisi)))
        .expect("same shape")
}

/// `(ω̃_p−Ω_p) n̂ + g_pppp â†²â² + i√γ(F_p â† − F_p* â)` on `n_max_pump + 1` levels.
pub fn kerr_pump_hamiltonian(n_max_pump: usize, p: &PumpParams) -> SparseOperator {
    let a = single_mode_annihilator(n_max_pump);
    let diag: Vec<c64> = (0..=n_max_pump)
        .map(|n| {
            let n = n as f64;
            c64::new(p.pump_detuning * n + p.g_kerr * n * (n - 1.0), 0.0)
        })
        .collect();
    SparseOperator::from_diagonal(&diag)
        .add(&drive_term(&a, p.gamma_wg, p.f_p))
        .expect("same shape")
}

/// Splits a complex coupling into modulus and phase in `(-π, π]`.
pub fn gauge_fix(g: c64) -> (f64, f64) {
    let (r, theta) = g.to_polar();
    if r == 0.0 {
        (0.0, 0.0)
    } else {
        (r, theta)
    }
}
