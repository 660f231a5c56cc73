//! Steady states of Lindblad generators.
//!
//! The fixed point `𝓛[ρ] = 0` is found by replacing the equation of one
//! diagonal element with the trace condition `Σ ρ_kk = 1`, which makes the
//! system nonsingular when the steady state is unique. Two backends solve the
//! resulting system:
//!
//! * [`Backend::SparseLu`]: one sparse LU of the assembled superoperator.
//! * [`Backend::Gmres`]: matrix-free GMRES, right-preconditioned with the
//!   no-jump part `X ↦ −i(H_eff X − X H_eff†)`, inverted exactly through the
//!   eigendecomposition of `H_eff`. Iteration counts stay near 60 regardless
//!   of the truncation, while LU fill-in grows quickly with `n_max`.

use std::sync::Once;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef, Par, Side};
use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, Mode};
use crate::krylov::{gmres, GmresOptions};
use crate::liouvillian::{unvec, vec_of, vectorize, LindbladModel};
use crate::model::{PumpParams, SystemParams};
use crate::observables::{g2_zero, mean_occupation};
use crate::sparse::SparseOperator;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted before a state is declared non-positive.
pub const POSITIVITY_TOL: f64 = -1e-8;
/// Default relative residual for steady-state solves.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Hilbert-space dimension up to which [`Backend::Auto`] retries with sparse
/// LU when GMRES fails.
pub const AUTO_DIRECT_MAX_DIM: usize = 45;

static SEQUENTIAL: Once = Once::new();

/// Pins faer to sequential kernels so repeated runs are bit-identical.
pub(crate) fn deterministic_linalg() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Hermitian, unit-trace, positive semidefinite state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: Mat<c64>,
}

impl DensityMatrix {
    /// Wraps a matrix after checking hermiticity, trace and positivity.
    pub fn new(matrix: Mat<c64>) -> Result<Self> {
        let rho = Self { matrix };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps without validation; callers re-check with [`DensityMatrix::validate`].
    pub fn from_matrix_unchecked(matrix: Mat<c64>) -> Self {
        Self { matrix }
    }

    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut m = Mat::<c64>::zeros(dim, dim);
        m[(k, k)] = c64::new(1.0, 0.0);
        Self { matrix: m }
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::basis_state(dim, 0)
    }

    /// `|ψ⟩⟨ψ|` with `ψ` normalized.
    pub fn pure(psi: &[c64]) -> Result<Self> {
        let norm = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let d = psi.len();
        Ok(Self {
            matrix: Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (norm * norm)),
        })
    }

    /// `G G† / Tr(G G†)`, a full-rank state for generic `G`.
    pub fn from_ginibre(g: MatRef<'_, c64>) -> Result<Self> {
        let m = g * g.adjoint();
        let tr: c64 = (0..m.nrows()).map(|k| m[(k, k)]).sum();
        if !(tr.re > 0.0) {
            return Err(Error::InvalidParameter("zero Ginibre matrix".into()));
        }
        let d = m.nrows();
        Ok(Self {
            matrix: Mat::from_fn(d, d, |i, j| m[(i, j)] / tr.re),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|k| self.matrix[(k, k)]).sum()
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        deterministic_linalg();
        let h = hermitian_part(self.matrix.as_ref());
        h.self_adjoint_eigenvalues(Side::Lower)
            .expect("hermitian eigenvalues converge")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.matrix.nrows() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                found: self.matrix.ncols(),
            });
        }
        let herm = self.hermiticity_defect();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidParameter(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = self.trace();
        if (tr - c64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < POSITIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(())
    }

    /// `Tr[O ρ]`.
    pub fn expectation(&self, op: &SparseOperator) -> Result<c64> {
        if op.rows() != self.dim() || op.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.rows(),
            });
        }
        Ok(op.iter().map(|(r, c, v)| v * self.matrix[(c, r)]).sum())
    }

    /// `½ Σ |λ(ρ − σ)|`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        deterministic_linalg();
        let diff = &self.matrix - &other.matrix;
        let h = hermitian_part(diff.as_ref());
        let eigs = h
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::SolveFailed(format!("eigenvalues: {e:?}")))?;
        Ok(0.5 * eigs.iter().map(|e| e.abs()).sum::<f64>())
    }
}

fn hermitian_part(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Auto,
    SparseLu,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target; `‖𝓛[ρ]‖_F ≤ tol · scale(𝓛)` is enforced.
    pub tol: f64,
    pub backend: Backend,
    /// Diagonal element whose equation is traded for the trace condition.
    pub trace_row: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            backend: Backend::Auto,
            trace_row: 0,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub rho: DensityMatrix,
    /// `‖𝓛[ρ]‖_F` of the returned (normalized) state.
    pub residual: f64,
    pub backend: Backend,
    pub iterations: usize,
}

/// Steady state with default options and the given tolerance.
pub fn steady_state(model: &LindbladModel, tol: f64) -> Result<DensityMatrix> {
    steady_state_with(model, &SolverOptions::with_tol(tol)).map(|s| s.rho)
}

pub fn steady_state_with(model: &LindbladModel, opts: &SolverOptions) -> Result<SteadySolution> {
    deterministic_linalg();
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let d = model.dim();
    if opts.trace_row >= d {
        return Err(Error::InvalidParameter(format!(
            "trace row {} outside dimension {d}",
            opts.trace_row
        )));
    }
    match opts.backend {
        Backend::SparseLu => finish(model, solve_direct(model, opts)?, opts, Backend::SparseLu, 1),
        Backend::Gmres => {
            let (raw, iterations) = solve_gmres(model, opts)?;
            finish(model, raw, opts, Backend::Gmres, iterations)
        }
        // GMRES is faster at every size measured; LU is the fallback for small systems.
        Backend::Auto => {
            let krylov = solve_gmres(model, opts).and_then(|(raw, it)| finish(model, raw, opts, Backend::Gmres, it));
            match krylov {
                Err(_) if d <= AUTO_DIRECT_MAX_DIM => {
                    finish(model, solve_direct(model, opts)?, opts, Backend::SparseLu, 1)
                }
                other => other,
            }
        }
    }
}

fn finish(
    model: &LindbladModel,
    raw: Mat<c64>,
    opts: &SolverOptions,
    backend: Backend,
    iterations: usize,
) -> Result<SteadySolution> {
    let d = model.dim();
    if raw.col_iter().flat_map(|c| c.iter()).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SolveFailed("non-finite solution (singular system)".into()));
    }
    let mut rho = hermitian_part(raw.as_ref());
    let tr: c64 = (0..d).map(|k| rho[(k, k)]).sum();
    if !(tr.re.abs() > 0.0) {
        return Err(Error::SolveFailed("solution has zero trace".into()));
    }
    for j in 0..d {
        for i in 0..d {
            rho[(i, j)] /= tr.re;
        }
    }
    let residual = model.apply(rho.as_ref())?.norm_l2();
    let bound = opts.tol * model.scale();
    if !(residual <= bound) {
        return Err(Error::SolveFailed(format!(
            "residual {residual:e} exceeds {bound:e}; truncation too small or ill-conditioned parameters"
        )));
    }
    let rho = DensityMatrix::from_matrix_unchecked(rho);
    let min = rho.min_eigenvalue();
    if min < POSITIVITY_TOL {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    Ok(SteadySolution {
        rho,
        residual,
        backend,
        iterations,
    })
}

fn trace_row_entries(d: usize) -> Vec<(usize, c64)> {
    (0..d).map(|k| (k + d * k, c64::new(1.0, 0.0))).collect()
}

fn solve_direct(model: &LindbladModel, opts: &SolverOptions) -> Result<Mat<c64>> {
    let d = model.dim();
    let n = d * d;
    let row = opts.trace_row + d * opts.trace_row;
    let system = vectorize(model)
        .into_matrix()
        .with_row_replaced(row, &trace_row_entries(d))?;
    let triplets: Vec<Triplet<usize, usize, c64>> =
        system.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let a = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::SolveFailed(format!("sparse assembly: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::SolveFailed(format!("sparse LU: {e:?}")))?;
    let mut rhs = Mat::<c64>::zeros(n, 1);
    rhs[(row, 0)] = c64::new(1.0, 0.0);
    let mut x = rhs.clone();
    lu.solve_in_place(x.as_mut());

    // One step of iterative refinement.
    let x_vec: Vec<c64> = x.col(0).iter().copied().collect();
    let ax = system.mul_vec(&x_vec);
    let mut r = Mat::<c64>::from_fn(n, 1, |i, _| rhs[(i, 0)] - ax[i]);
    lu.solve_in_place(r.as_mut());
    for i in 0..n {
        x[(i, 0)] += r[(i, 0)];
    }
    let v: Vec<c64> = x.col(0).iter().copied().collect();
    Ok(unvec(&v, d))
}

/// Exact inverse of `X ↦ −i(H_eff X − X H_eff†)` through `H_eff = V Λ V⁻¹`.
struct NoJumpInverse {
    v: Mat<c64>,
    v_inv: Mat<c64>,
    inv_den: Mat<c64>,
}

impl NoJumpInverse {
    fn new(model: &LindbladModel) -> Result<Self> {
        let h = model.effective_hamiltonian().to_dense();
        let evd = h
            .eigen()
            .map_err(|e| Error::SolveFailed(format!("eigendecomposition of H_eff: {e:?}")))?;
        let v = evd.U().to_owned();
        let lambda: Vec<c64> = evd.S().column_vector().iter().copied().collect();
        let v_inv = v.partial_piv_lu().inverse();
        let d = lambda.len();
        let floor = 1e-14 * model.scale();
        let inv_den = Mat::from_fn(d, d, |j, k| {
            let den = c64::new(0.0, -1.0) * (lambda[j] - lambda[k].conj());
            if den.norm() < floor {
                c64::new(1.0 / floor, 0.0)
            } else {
                1.0 / den
            }
        });
        Ok(Self { v, v_inv, inv_den })
    }

    fn apply(&self, c: MatRef<'_, c64>) -> Mat<c64> {
        let y = &self.v_inv * c * self.v_inv.adjoint();
        let d = y.nrows();
        let scaled = Mat::from_fn(d, d, |j, k| y[(j, k)] * self.inv_den[(j, k)]);
        &self.v * scaled * self.v.adjoint()
    }
}

fn solve_gmres(model: &LindbladModel, opts: &SolverOptions) -> Result<(Mat<c64>, usize)> {
    let d = model.dim();
    let k = opts.trace_row;
    let pre = NoJumpInverse::new(model)?;
    let mut lx = Mat::<c64>::zeros(d, d);
    let mut b = vec![c64::new(0.0, 0.0); d * d];
    b[k + d * k] = c64::new(1.0, 0.0);
    let gmres_opts = GmresOptions {
        tol: opts.tol,
        ..Default::default()
    };
    let outcome = gmres(
        |y, out| {
            let x = pre.apply(MatRef::from_column_major_slice(y, d, d));
            model.apply_into(x.as_ref(), &mut lx);
            lx[(k, k)] = (0..d).map(|i| x[(i, i)]).sum();
            out.copy_from_slice(&vec_of(lx.as_ref()));
        },
        &b,
        gmres_opts,
    );
    if !outcome.converged {
        return Err(Error::SolveFailed(format!(
            "GMRES stalled at relative residual {:e} after {} iterations",
            outcome.relative_residual, outcome.iterations
        )));
    }
    let x = pre.apply(MatRef::from_column_major_slice(&outcome.x, d, d));
    Ok((x, outcome.iterations))
}

/// Quantity tracked while the truncation is raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    SeedOccupation,
    IdlerOccupation,
    SeedG2,
    /// Maximum of ⟨n̂_s⟩ over a detuning grid (in units of Γ_s).
    MaxSeedOccupation { grid: Vec<f64> },
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::SeedOccupation => "n_s",
            Observable::IdlerOccupation => "n_i",
            Observable::SeedG2 => "g2",
            Observable::MaxSeedOccupation { .. } => "max_n_s",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStep {
    pub n_max: usize,
    pub values: Vec<f64>,
    /// Largest relative change against the previous step, per observable.
    pub relative_change: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub observables: Vec<String>,
    pub rel_tol: f64,
    pub steps: Vec<ConvergenceStep>,
    pub converged: bool,
    pub final_n_max: usize,
}

impl ConvergenceReport {
    /// `n_max` at which every observable first changed by less than `rel_tol`.
    pub fn converged_at(&self) -> Option<usize> {
        self.converged.then_some(self.final_n_max)
    }

    fn push(&mut self, step: ConvergenceStep) {
        self.final_n_max = step.n_max;
        self.steps.push(step);
    }
}

fn relative_change(new: f64, old: f64) -> f64 {
    let diff = (new - old).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / new.abs().max(old.abs())
    }
}

fn evaluate(
    params: &SystemParams,
    basis: &FockBasis,
    observable: &Observable,
    rho: &DensityMatrix,
    opts: &SolverOptions,
) -> Result<f64> {
    match observable {
        Observable::SeedOccupation => mean_occupation(basis, rho, Mode::Seed),
        Observable::IdlerOccupation => mean_occupation(basis, rho, Mode::Idler),
        Observable::SeedG2 => g2_zero(basis, rho, Mode::Seed),
        Observable::MaxSeedOccupation { grid } => {
            let values: Result<Vec<f64>> = grid
                .par_iter()
                .map(|&delta| {
                    let p = params.with_delta(delta);
                    let model = p.lindblad_model(basis)?;
                    let sol = steady_state_with(&model, opts)?;
                    mean_occupation(basis, &sol.rho, Mode::Seed)
                })
                .collect();
            Ok(values?.into_iter().fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

/// Raises `n_max` from `n_max_start` until every observable changes by less
/// than `rel_tol` between consecutive truncations.
///
/// Returns the steady state at `params` for the accepted truncation. Hitting
/// `n_max_limit` first yields [`Error::NotConverged`] carrying the report.
pub fn converge_truncation(
    params: &SystemParams,
    observables: &[Observable],
    rel_tol: f64,
    n_max_start: usize,
    n_max_limit: usize,
    opts: &SolverOptions,
) -> Result<(DensityMatrix, ConvergenceReport)> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("rel_tol must be positive, got {rel_tol}")));
    }
    if n_max_start < 1 || n_max_limit < n_max_start {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= n_max_start ({n_max_start}) <= n_max_limit ({n_max_limit})"
        )));
    }
    if observables.is_empty() {
        return Err(Error::InvalidParameter("no observables to track".into()));
    }
    params.validate()?;

    let mut report = ConvergenceReport {
        observables: observables.iter().map(|o| o.name().to_string()).collect(),
        rel_tol,
        steps: Vec::new(),
        converged: false,
        final_n_max: n_max_start,
    };
    let mut previous: Option<Vec<f64>> = None;
    for n_max in n_max_start..=n_max_limit {
        let basis = FockBasis::new(n_max)?;
        let model = params.lindblad_model(&basis)?;
        let rho = steady_state_with(&model, opts)?.rho;
        let values = observables
            .iter()
            .map(|o| evaluate(params, &basis, o, &rho, opts))
            .collect::<Result<Vec<f64>>>()?;
        let changes = previous.as_ref().map(|prev| {
            values
                .iter()
                .zip(prev)
                .map(|(&new, &old)| relative_change(new, old))
                .collect::<Vec<f64>>()
        });
        let done = changes
            .as_ref()
            .is_some_and(|c| c.iter().all(|&x| x < rel_tol));
        report.push(ConvergenceStep {
            n_max,
            values: values.clone(),
            relative_change: changes,
        });
        if done {
            report.converged = true;
            return Ok((rho, report));
        }
        previous = Some(values);
    }
    Err(Error::NotConverged {
        report: Box::new(report),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSteadyState {
    /// `⟨â_p⟩`.
    pub alpha: c64,
    /// `⟨n̂_p⟩`.
    pub occupation: f64,
    /// Pump cutoff at which both values stabilized.
    pub cutoff: usize,
}

impl PumpSteadyState {
    /// `g_nl α_p`; its modulus is the effective coupling g̃ and its phase can
    /// be gauged away.
    pub fn effective_coupling(&self, g_nl: f64) -> c64 {
        g_nl * self.alpha
    }

    /// `g_pσpσ ⟨n̂_p⟩`.
    pub fn xpm_shift(&self, g_cross: f64) -> f64 {
        g_cross * self.occupation
    }
}

/// Largest pump cutoff tried before giving up.
pub const PUMP_CUTOFF_LIMIT: usize = 1024;

/// Steady state of the driven Kerr pump mode, raising the cutoff (doubling
/// from `max(n_max_pump, 8, ⌈4|α_lin|²⌉ + 4)`) until `α_p` and `⟨n̂_p⟩`
/// change by at most `tol` (relative to `max(1, |value|)`).
pub fn pump_steady_state(p: &PumpParams, tol: f64) -> Result<PumpSteadyState> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let lin = p.linear_amplitude().norm_sqr();
    let mut cutoff = p.n_max_pump.max(8).max((4.0 * lin).ceil() as usize + 4);
    let opts = SolverOptions::with_tol(1e-12);
    let mut previous: Option<(c64, f64)> = None;
    while cutoff <= PUMP_CUTOFF_LIMIT {
        let model = p.lindblad_model(cutoff)?;
        let rho = steady_state_with(&model, &opts)?.rho;
        let a = crate::fock::single_mode_annihilator(cutoff);
        let alpha = rho.expectation(&a)?;
        let n = rho.expectation(&a.adjoint().matmul(&a)?)?.re;
        if let Some((alpha_old, n_old)) = previous {
            let da = (alpha - alpha_old).norm() / alpha.norm().max(1.0);
            let dn = (n - n_old).abs() / n.abs().max(1.0);
            if da <= tol && dn <= tol {
                return Ok(PumpSteadyState {
                    alpha,
                    occupation: n,
                    cutoff,
                });
            }
        }
        previous = Some((alpha, n));
        cutoff *= 2;
    }
    Err(Error::PumpNotConverged {
        cutoff: cutoff / 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemParams;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn lorentzian_occupation_on_resonance_and_detuned() {
        let b = FockBasis::new(4).unwrap();
        for (delta, expected) in [(0.0, 0.02), (0.5, 0.01), (-0.5, 0.01)] {
            let p = SystemParams::default().with_delta(delta);
            let rho = steady_state(&p.lindblad_model(&b).unwrap(), 1e-12).unwrap();
            let n = mean_occupation(&b, &rho, Mode::Seed).unwrap();
            assert!((n - expected).abs() < 1e-10, "{delta}: {n}");
        }
    }

    #[test]
    fn undriven_steady_state_is_vacuum() {
        let b = FockBasis::new(3).unwrap();
        let p = SystemParams::default().with_drive(c(0.0, 0.0)).with_g_eff(0.5);
        for backend in [Backend::SparseLu, Backend::Gmres] {
            let sol = steady_state_with(
                &p.lindblad_model(&b).unwrap(),
                &SolverOptions {
                    backend,
                    ..Default::default()
                },
            )
            .unwrap();
            let vac = DensityMatrix::vacuum(b.dim());
            assert!(sol.rho.trace_distance(&vac).unwrap() < 1e-12);
        }
    }

    #[test]
    fn backends_agree() {
        let b = FockBasis::new(3).unwrap();
        let p = SystemParams::default()
            .with_g_eff(0.8)
            .with_delta(0.2)
            .with_drive(c(0.9, 0.3));
        let model = p.lindblad_model(&b).unwrap();
        let lu = steady_state_with(
            &model,
            &SolverOptions {
                backend: Backend::SparseLu,
                tol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        let it = steady_state_with(
            &model,
            &SolverOptions {
                backend: Backend::Gmres,
                tol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(lu.rho.trace_distance(&it.rho).unwrap() < 1e-10);
        lu.rho.validate().unwrap();
        it.rho.validate().unwrap();
    }

    #[test]
    fn uniqueness_under_different_trace_rows() {
        let b = FockBasis::new(3).unwrap();
        let p = SystemParams::default().with_g_eff(0.6).with_drive(c(0.7, 0.0));
        let model = p.lindblad_model(&b).unwrap();
        let base = steady_state_with(&model, &SolverOptions::with_tol(1e-12)).unwrap();
        for (row, backend) in [(5, Backend::SparseLu), (b.dim() - 1, Backend::Gmres), (3, Backend::Gmres)] {
            let other = steady_state_with(
                &model,
                &SolverOptions {
                    tol: 1e-12,
                    backend,
                    trace_row: row,
                },
            )
            .unwrap();
            assert!(base.rho.trace_distance(&other.rho).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn gauge_phase_does_not_change_observables() {
        let b = FockBasis::new(3).unwrap();
        let base = SystemParams::default().with_g_eff(0.45).with_delta(0.1);
        let rho0 = steady_state(&base.lindblad_model(&b).unwrap(), 1e-12).unwrap();
        let n0 = mean_occupation(&b, &rho0, Mode::Seed).unwrap();
        let g0 = g2_zero(&b, &rho0, Mode::Seed).unwrap();
        for phi in [0.3, PI / 3.0, -2.0, PI] {
            let p = base.with_complex_coupling(c64::from_polar(0.45, phi));
            let rho = steady_state(&p.lindblad_model(&b).unwrap(), 1e-12).unwrap();
            let n = mean_occupation(&b, &rho, Mode::Seed).unwrap();
            let g = g2_zero(&b, &rho, Mode::Seed).unwrap();
            assert!((n - n0).abs() <= 1e-10);
            assert!((g - g0).abs() <= 1e-10);
        }
    }

    #[test]
    fn invalid_tolerance_and_trace_row() {
        let b = FockBasis::new(1).unwrap();
        let model = SystemParams::default().lindblad_model(&b).unwrap();
        assert!(steady_state(&model, 0.0).is_err());
        let opts = SolverOptions {
            trace_row: 99,
            ..Default::default()
        };
        assert!(steady_state_with(&model, &opts).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = Mat::<c64>::zeros(2, 2);
        m[(0, 0)] = c(1.2, 0.0);
        m[(1, 1)] = c(-0.2, 0.0);
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotPositive { .. })));
        let mut m = Mat::<c64>::zeros(2, 2);
        m[(0, 0)] = c(0.5, 0.0);
        m[(1, 1)] = c(0.5, 0.0);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::new(Mat::<c64>::zeros(2, 2)).is_err());
        DensityMatrix::vacuum(3).validate().unwrap();
    }

    #[test]
    fn trace_distance_of_orthogonal_states() {
        let a = DensityMatrix::basis_state(3, 0);
        let b = DensityMatrix::basis_state(3, 2);
        assert!((a.trace_distance(&b).unwrap() - 1.0).abs() < 1e-14);
        assert!(a.trace_distance(&a).unwrap() < 1e-15);
    }

    #[test]
    fn undriven_truncation_converges_immediately() {
        let p = SystemParams::default().with_drive(c(0.0, 0.0));
        let (rho, report) =
            converge_truncation(&p, &[Observable::SeedOccupation], 0.01, 1, 6, &SolverOptions::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.steps.len(), 2);
        assert_eq!(report.converged_at(), Some(2));
        assert!(rho.trace_distance(&DensityMatrix::vacuum(rho.dim())).unwrap() < 1e-12);
    }

    #[test]
    fn truncation_limit_reports_non_convergence() {
        let p = SystemParams::default().with_drive(c(2.5, 0.0)).with_g_eff(0.1);
        let err = converge_truncation(&p, &[Observable::SeedOccupation], 1e-6, 1, 2, &SolverOptions::default())
            .unwrap_err();
        match err {
            Error::NotConverged { report } => {
                assert!(!report.converged);
                assert_eq!(report.final_n_max, 2);
                assert_eq!(report.steps.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn pump(g_kerr: f64, f_p: c64) -> PumpParams {
        PumpParams {
            pump_detuning: 0.4,
            f_p,
            gamma_wg: 0.5,
            gamma_p: 1.0,
            g_kerr,
            n_max_pump: 8,
        }
    }

    #[test]
    fn linear_pump_matches_lorentzian_amplitude() {
        let p = pump(0.0, c(1.2, -0.4));
        let st = pump_steady_state(&p, 1e-9).unwrap();
        let alpha = p.linear_amplitude();
        assert!((st.alpha - alpha).norm() < 1e-8);
        assert!((st.occupation - alpha.norm_sqr()).abs() < 1e-8);
    }

    #[test]
    fn undriven_pump_is_empty() {
        let st = pump_steady_state(&pump(0.3, c(0.0, 0.0)), 1e-9).unwrap();
        assert!(st.alpha.norm() < 1e-12);
        assert!(st.occupation.abs() < 1e-12);
    }

    #[test]
    fn kerr_pump_is_below_linear_occupation_on_blue_side() {
        // Positive Kerr shift pushes the resonance away from a drive at
        // positive detuning, so the occupation drops.
        let p = pump(0.2, c(1.5, 0.0));
        let st = pump_steady_state(&p, 1e-9).unwrap();
        assert!(st.occupation < p.linear_amplitude().norm_sqr());
        assert!(st.occupation > 0.0);
        assert!((st.xpm_shift(0.5) - 0.5 * st.occupation).abs() < 1e-15);
        assert!((st.effective_coupling(2.0).norm() - 2.0 * st.alpha.norm()).abs() < 1e-15);
    }
}
