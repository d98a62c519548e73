//! Truncated multimode Fock space: ladder and field operators, spectral
//! interval projectors and density matrices.

mod basis;
mod operators;
mod spectral;
mod state;

use thiserror::Error;

use crate::lattice::LatticeError;

pub use basis::{build_basis, FockBasis, DEFAULT_DIMENSION_CAP};
pub use operators::{
    annihilator, below_cutoff_projector, commutator_residual, field_operator, free_hamiltonian,
    hermiticity_residual, ladder_matrices, momentum_operator, operator_norm, quadrature, CommutatorResidual,
    OperatorMatrix, SmearedOperator,
};
pub use spectral::{
    bin_partition, edge_snap, interval_projector, spectral_family, spectral_labels, BinPartition, Spectrum,
};
pub use state::{excitation_state, lueders_channel, vacuum_density, StateDensity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("Fock dimension of {modes} modes at n_max={n_max} exceeds the cap {cap}")]
    DimensionCap { modes: usize, n_max: usize, cap: usize },
    #[error("mode {0} is not in the basis")]
    UnknownMode(i64),
    #[error("smearing `{device}` leaves {weight:.4} of its Parseval weight outside the active modes (threshold {threshold})")]
    ModeLeakage { device: String, weight: f64, threshold: f64 },
    #[error("projectors do not sum to the identity (residual {0:e})")]
    IncompleteFamily(f64),
    #[error("operator is not Hermitian (residual {0:e})")]
    NotHermitian(f64),
    #[error("invalid bin partition: delta_max={delta_max}, n_bins={n_bins}")]
    InvalidPartition { delta_max: f64, n_bins: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}
