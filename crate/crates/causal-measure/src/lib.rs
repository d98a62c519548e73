//! Sequential projective measurements of a lattice-regularized free scalar
//! field in 1+1 dimensions, ordered either by lab time or by light-cone
//! precedence between device parts.
//!
//! The crate is organised bottom up:
//!
//! * [`geometry`]: light-cone precedence, device splitting, causal layers.
//! * [`lattice`]: modes, smearing transforms and exact mode-sum oracles.
//! * [`fock`]: truncated Fock space, field operators, spectral projectors.
//! * [`analytic`]: closed-form vacuum and one-particle outcome densities.
//! * [`rules`]: outcome tables under both ordering rules and signaling audits.
//! * [`scenario`]: JSON scenario files and the command implementations.

pub mod analytic;
pub mod fock;
pub mod geometry;
pub mod lattice;
pub mod rules;
pub mod scenario;

pub use num_complex::Complex64;

/// Dense complex matrix used for every operator and density.
pub type CMatrix = nalgebra::DMatrix<Complex64>;

/// Largest entry modulus of a complex matrix.
pub trait MaxAbs {
    fn max_abs(&self) -> f64;
}

impl MaxAbs for CMatrix {
    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}
