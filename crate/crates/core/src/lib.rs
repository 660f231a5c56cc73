//! Steady states and photon statistics of a driven seed–idler pair with an
//! effective second-order coupling, obtained from a strongly pumped Kerr
//! photonic molecule, plus the ring-comb and material estimates that go with it.
//!
//! Rates are in units of the seed linewidth Γ_s and ħ = 1 throughout, except
//! in [`materials`] and [`comb`], which work in SI units.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comb;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod krylov;
pub mod liouvillian;
pub mod materials;
pub mod model;
pub mod observables;
pub mod sparse;
pub mod steady;

pub use error::{Error, Result};
pub use fock::{FockBasis, Mode};
pub use liouvillian::{LindbladModel, Superoperator};
pub use model::{FullModelParams, PumpParams, SystemParams};
pub use sparse::SparseOperator;
pub use steady::{DensityMatrix, SolverOptions};

pub use faer::{c64, Mat, MatRef};
