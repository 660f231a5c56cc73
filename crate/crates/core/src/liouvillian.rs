//! Lindblad generator, both as an assembled sparse superoperator and as a
//! matrix-free map on dense density matrices.
//!
//! Vectorization is column stacking: `vec(ρ)[i + d·j] = ρ[i, j]`, so that
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.

use faer::{Mat, MatRef};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

#[derive(Debug, Clone)]
struct Jump {
    op: SparseOperator,
    adjoint: SparseOperator,
    number: SparseOperator,
    rate: f64,
}

/// Hamiltonian plus one-photon loss channels `(L, Γ)`.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    hamiltonian: SparseOperator,
    jumps: Vec<Jump>,
    /// `H − (i/2) Σ Γ L†L`.
    effective: SparseOperator,
    effective_adjoint: SparseOperator,
}

impl LindbladModel {
    pub fn new(hamiltonian: SparseOperator, jump_ops: Vec<(SparseOperator, f64)>) -> Result<Self> {
        if !hamiltonian.is_square() {
            return Err(Error::DimensionMismatch {
                expected: hamiltonian.rows(),
                found: hamiltonian.cols(),
            });
        }
        let dim = hamiltonian.rows();
        let mut jumps = Vec::with_capacity(jump_ops.len());
        let mut effective = hamiltonian.clone();
        for (op, rate) in jump_ops {
            if op.rows() != dim || op.cols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: if op.rows() != dim { op.rows() } else { op.cols() },
                });
            }
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::InvalidParameter(format!("loss rate must be finite and >= 0, got {rate}")));
            }
            let adjoint = op.adjoint();
            let number = adjoint.matmul(&op)?;
            effective = effective.add(&number.scale(c64::new(0.0, -0.5 * rate)))?;
            jumps.push(Jump {
                op,
                adjoint,
                number,
                rate,
            });
        }
        let effective_adjoint = effective.adjoint();
        Ok(Self {
            hamiltonian,
            jumps,
            effective,
            effective_adjoint,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    pub fn hamiltonian(&self) -> &SparseOperator {
        &self.hamiltonian
    }

    pub fn jump_ops(&self) -> impl Iterator<Item = (&SparseOperator, f64)> {
        self.jumps.iter().map(|j| (&j.op, j.rate))
    }

    /// Non-Hermitian no-jump Hamiltonian `H − (i/2) Σ Γ L†L`.
    pub fn effective_hamiltonian(&self) -> &SparseOperator {
        &self.effective
    }

    /// Upper bound on the induced ∞-norm of the generator; used to scale
    /// residual tolerances.
    pub fn scale(&self) -> f64 {
        let h = 2.0 * self.hamiltonian.norm_inf();
        let d: f64 = self
            .jumps
            .iter()
            .map(|j| j.rate * (j.op.norm_inf() * j.adjoint.norm_inf() + j.number.norm_inf()))
            .sum();
        (h + d).max(f64::MIN_POSITIVE)
    }

    /// `𝓛[ρ]` computed with sparse–dense products only.
    pub fn apply(&self, rho: MatRef<'_, c64>) -> Result<Mat<c64>> {
        let d = self.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: if rho.nrows() != d { rho.nrows() } else { rho.ncols() },
            });
        }
        let mut out = Mat::<c64>::zeros(d, d);
        self.apply_into(rho, &mut out);
        Ok(out)
    }

    /// `out = 𝓛[ρ]`; shapes are assumed to match.
    pub(crate) fn apply_into(&self, rho: MatRef<'_, c64>, out: &mut Mat<c64>) {
        let minus_i = c64::new(0.0, -1.0);
        let plus_i = c64::new(0.0, 1.0);
        out.fill(c64::new(0.0, 0.0));
        // −i(H_eff ρ − ρ H_eff†)
        self.effective.mul_dense_into(rho, minus_i, out.as_mut());
        self.effective_adjoint.dense_mul_into(rho, plus_i, out.as_mut());
        for j in &self.jumps {
            if j.rate == 0.0 {
                continue;
            }
            let l_rho = j.op.mul_dense(rho);
            j.adjoint
                .dense_mul_into(l_rho.as_ref(), c64::new(j.rate, 0.0), out.as_mut());
        }
    }
}

/// Sparse `dim² × dim²` matrix of the generator over column-stacked states.
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    matrix: SparseOperator,
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn into_matrix(self) -> SparseOperator {
        self.matrix
    }

    /// Applies to `ρ` through its column-stacked vector.
    pub fn apply(&self, rho: MatRef<'_, c64>) -> Result<Mat<c64>> {
        let d = self.dim;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.nrows(),
            });
        }
        let v = vec_of(rho);
        let out = self.matrix.mul_vec(&v);
        Ok(unvec(&out, d))
    }

    /// Largest `|Σ_k 𝓛[(k,k), col]|` over columns; zero for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let mut sums = vec![c64::new(0.0, 0.0); d * d];
        for k in 0..d {
            for (col, v) in self.matrix.row(k + d * k) {
                sums[col] += v;
            }
        }
        sums.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Dense copy; only allowed for `dim ≤ 64`.
    pub fn to_dense(&self) -> Result<Mat<c64>> {
        if self.dim > 64 {
            return Err(Error::InvalidParameter(format!(
                "dense superoperator refused for dim {} > 64",
                self.dim
            )));
        }
        Ok(self.matrix.to_dense())
    }
}

/// Assembles `𝓛 = −i(I⊗H − Hᵀ⊗I) + Σ Γ[L̄⊗L − ½ I⊗L†L − ½ (L†L)ᵀ⊗I]`.
pub fn vectorize(model: &LindbladModel) -> Superoperator {
    let d = model.dim();
    let id = SparseOperator::identity(d);
    let h = &model.hamiltonian;
    let mut l = id
        .kron(h)
        .sub(&h.transpose().kron(&id))
        .expect("square operators")
        .scale(c64::new(0.0, -1.0));
    for j in &model.jumps {
        if j.rate == 0.0 {
            continue;
        }
        let jump = j.op.conj().kron(&j.op);
        let left = id.kron(&j.number).scale_real(0.5);
        let right = j.number.transpose().kron(&id).scale_real(0.5);
        let term = jump
            .sub(&left)
            .and_then(|t| t.sub(&right))
            .expect("square operators")
            .scale_real(j.rate);
        l = l.add(&term).expect("square operators");
    }
    Superoperator { dim: d, matrix: l }
}

/// Column-stacked vector of a square matrix.
pub fn vec_of(m: MatRef<'_, c64>) -> Vec<c64> {
    let (r, c) = (m.nrows(), m.ncols());
    let mut v = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Inverse of [`vec_of`] for a `d × d` matrix.
pub fn unvec(v: &[c64], d: usize) -> Mat<c64> {
    assert_eq!(v.len(), d * d);
    Mat::from_fn(d, d, |i, j| v[i + d * j])
}
