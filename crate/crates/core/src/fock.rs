//! Truncated two-mode Fock space for the seed and idler resonances.
//!
//! The idler keeps `n_max` photons and the seed `2 * n_max` by default, since
//! population only reaches the idler through the conversion of two seed
//! photons. States are flattened row-major with the seed index varying
//! fastest: `index = n_s + (seed_cutoff + 1) * n_i`.

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Default cap on the number of superoperator entries, `dim²`.
pub const DEFAULT_SUPEROPERATOR_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Seed,
    Idler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockBasis {
    n_max: usize,
    seed_cutoff: usize,
    dim: usize,
}

impl FockBasis {
    /// Basis with the default asymmetric cutoff `seed_cutoff = 2 * n_max`.
    pub fn new(n_max: usize) -> Result<Self> {
        Self::build(n_max, None, DEFAULT_SUPEROPERATOR_LIMIT)
    }

    pub fn with_seed_cutoff(n_max: usize, seed_cutoff: usize) -> Result<Self> {
        Self::build(n_max, Some(seed_cutoff), DEFAULT_SUPEROPERATOR_LIMIT)
    }

    /// Full constructor; `superoperator_limit` bounds `dim²`.
    pub fn build(n_max: usize, seed_cutoff: Option<usize>, superoperator_limit: usize) -> Result<Self> {
        let seed_cutoff = seed_cutoff.unwrap_or(2 * n_max);
        let dim = (seed_cutoff + 1)
            .checked_mul(n_max + 1)
            .ok_or_else(|| Error::InvalidParameter("basis dimension overflows".into()))?;
        let entries = dim.saturating_mul(dim);
        if entries > superoperator_limit {
            return Err(Error::InfeasibleTruncation {
                n_max,
                dim,
                entries,
                limit: superoperator_limit,
            });
        }
        Ok(Self {
            n_max,
            seed_cutoff,
            dim,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn seed_cutoff(&self) -> usize {
        self.seed_cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self, mode: Mode) -> usize {
        match mode {
            Mode::Seed => self.seed_cutoff,
            Mode::Idler => self.n_max,
        }
    }

    pub fn index(&self, n_seed: usize, n_idler: usize) -> Option<usize> {
        (n_seed <= self.seed_cutoff && n_idler <= self.n_max)
            .then(|| n_seed + (self.seed_cutoff + 1) * n_idler)
    }

    /// Inverse of [`FockBasis::index`].
    pub fn state(&self, index: usize) -> (usize, usize) {
        assert!(index < self.dim, "index {index} outside basis of dim {}", self.dim);
        let stride = self.seed_cutoff + 1;
        (index % stride, index / stride)
    }

    /// All `(n_s, n_i)` pairs in flat-index order.
    pub fn states(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.dim).map(move |k| self.state(k))
    }

    fn occupation(&self, index: usize, mode: Mode) -> usize {
        let (s, i) = self.state(index);
        match mode {
            Mode::Seed => s,
            Mode::Idler => i,
        }
    }

    /// `â|n⟩ = √n|n−1⟩` on `mode`, identity on the other mode.
    pub fn annihilator(&self, mode: Mode) -> SparseOperator {
        let triplets: Vec<_> = self
            .states()
            .enumerate()
            .filter_map(|(col, (s, i))| {
                let (s2, i2, n) = match mode {
                    Mode::Seed if s > 0 => (s - 1, i, s),
                    Mode::Idler if i > 0 => (s, i - 1, i),
                    _ => return None,
                };
                let row = self.index(s2, i2).expect("lowered state stays in basis");
                Some((row, col, c64::new((n as f64).sqrt(), 0.0)))
            })
            .collect();
        SparseOperator::from_triplets(self.dim, self.dim, &triplets).expect("indices in range")
    }

    pub fn creator(&self, mode: Mode) -> SparseOperator {
        self.annihilator(mode).adjoint()
    }

    pub fn number_operator(&self, mode: Mode) -> SparseOperator {
        self.diagonal_operator(|k| self.occupation(k, mode) as f64)
    }

    /// `â†²â²`, diagonal with entries `n(n−1)`.
    pub fn pair_operator(&self, mode: Mode) -> SparseOperator {
        self.diagonal_operator(|k| {
            let n = self.occupation(k, mode) as f64;
            n * (n - 1.0)
        })
    }

    pub fn identity(&self) -> SparseOperator {
        SparseOperator::identity(self.dim)
    }

    fn diagonal_operator(&self, f: impl Fn(usize) -> f64) -> SparseOperator {
        let diag: Vec<c64> = (0..self.dim).map(|k| c64::new(f(k), 0.0)).collect();
        SparseOperator::from_diagonal(&diag)
    }
}

/// Ladder operator of a single truncated mode with `cutoff + 1` levels.
pub fn single_mode_annihilator(cutoff: usize) -> SparseOperator {
    let triplets: Vec<_> = (1..=cutoff)
        .map(|n| (n - 1, n, c64::new((n as f64).sqrt(), 0.0)))
        .collect();
    SparseOperator::from_triplets(cutoff + 1, cutoff + 1, &triplets).expect("indices in range")
}
