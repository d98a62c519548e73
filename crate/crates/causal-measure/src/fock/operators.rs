use num_complex::Complex64;
use serde::Serialize;

use super::{FockBasis, FockError};
use crate::lattice::{field_amplitudes, smear_transform, ModeTable, SmearingFunction};
use crate::CMatrix;

/// Largest `|M - M^dagger|` entry.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A finite operator on a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: CMatrix,
    pub hermitian: bool,
}

impl OperatorMatrix {
    /// Wraps `matrix` as a Hermitian operator, rejecting entries off by 1e-12 or more.
    pub fn hermitian(matrix: CMatrix) -> Result<Self, FockError> {
        let r = hermiticity_residual(&matrix);
        if r >= 1e-12 {
            return Err(FockError::NotHermitian(r));
        }
        Ok(Self { matrix, hermitian: true })
    }

    pub fn general(matrix: CMatrix) -> Self {
        Self { matrix, hermitian: false }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Truncated `(a, a^dagger)` for one active mode.
pub fn ladder_matrices(basis: &FockBasis, mode: i64) -> Result<(CMatrix, CMatrix), FockError> {
    let slot = basis.slot(mode).ok_or(FockError::UnknownMode(mode))?;
    let a = annihilator(basis, slot);
    let ad = a.adjoint();
    Ok((a, ad))
}

/// Annihilator of the mode in position `slot`.
pub fn annihilator(basis: &FockBasis, slot: usize) -> CMatrix {
    let d = basis.dimension();
    let stride = basis.stride(slot);
    let mut a = CMatrix::zeros(d, d);
    for i in 0..d {
        let n = basis.occupancy(i, slot);
        if n > 0 {
            a[(i - stride, i)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
    }
    a
}

/// `sum_m c_m b_m + h.c.` over the basis modes, one coefficient per slot.
pub fn quadrature(basis: &FockBasis, coeffs: &[Complex64]) -> CMatrix {
    assert_eq!(coeffs.len(), basis.n_modes(), "one coefficient per mode");
    let d = basis.dimension();
    let mut m = CMatrix::zeros(d, d);
    for (slot, &c) in coeffs.iter().enumerate() {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let stride = basis.stride(slot);
        for i in 0..d {
            let n = basis.occupancy(i, slot);
            if n > 0 {
                let s = (n as f64).sqrt();
                m[(i - stride, i)] += c * s;
                m[(i, i - stride)] += c.conj() * s;
            }
        }
    }
    m
}

/// A field or momentum operator together with its mode-restriction loss.
#[derive(Debug, Clone)]
pub struct SmearedOperator {
    pub operator: OperatorMatrix,
    /// Parseval weight of the smearing outside the active modes, as a fraction.
    pub discarded_weight: f64,
}

fn discarded_weight(f: &SmearingFunction, basis: &FockBasis, modes: &ModeTable) -> Result<f64, FockError> {
    let ft = smear_transform(f, modes)?;
    let total: f64 = ft.iter().map(|a| a.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let kept: f64 = modes
        .modes
        .iter()
        .zip(&ft)
        .filter(|(m, _)| basis.slot(m.n).is_some())
        .map(|(_, a)| a.norm_sqr())
        .sum();
    Ok(((total - kept) / total).max(0.0))
}

fn active_coefficients(
    basis: &FockBasis,
    modes: &ModeTable,
    amplitudes: &[Complex64],
) -> Result<Vec<Complex64>, FockError> {
    basis
        .active_modes()
        .iter()
        .map(|&n| modes.position(n).map(|i| amplitudes[i]).ok_or(FockError::UnknownMode(n)))
        .collect()
}

fn smeared(
    basis: &FockBasis,
    modes: &ModeTable,
    f: &SmearingFunction,
    coeffs: Vec<Complex64>,
    leakage_threshold: f64,
) -> Result<SmearedOperator, FockError> {
    let discarded_weight = discarded_weight(f, basis, modes)?;
    if discarded_weight > leakage_threshold {
        return Err(FockError::ModeLeakage {
            device: f.device_id.clone(),
            weight: discarded_weight,
            threshold: leakage_threshold,
        });
    }
    let operator = OperatorMatrix { matrix: quadrature(basis, &coeffs), hermitian: true };
    Ok(SmearedOperator { operator, discarded_weight })
}

/// `Phi(f, t)` on the active plane-wave modes.
pub fn field_operator(
    basis: &FockBasis,
    modes: &ModeTable,
    f: &SmearingFunction,
    t: f64,
    leakage_threshold: f64,
) -> Result<SmearedOperator, FockError> {
    let alpha = field_amplitudes(f, t, modes)?;
    let coeffs = active_coefficients(basis, modes, &alpha)?;
    smeared(basis, modes, f, coeffs, leakage_threshold)
}

/// `Pi(f, t) = d Phi(f, t) / dt`.
pub fn momentum_operator(
    basis: &FockBasis,
    modes: &ModeTable,
    f: &SmearingFunction,
    t: f64,
    leakage_threshold: f64,
) -> Result<SmearedOperator, FockError> {
    let alpha = field_amplitudes(f, t, modes)?;
    let pi: Vec<Complex64> =
        alpha.iter().zip(&modes.modes).map(|(a, m)| *a * Complex64::new(0.0, -m.omega)).collect();
    let coeffs = active_coefficients(basis, modes, &pi)?;
    smeared(basis, modes, f, coeffs, leakage_threshold)
}

/// Normal-ordered `H = sum_k omega_k a_k^dagger a_k`.
pub fn free_hamiltonian(basis: &FockBasis, modes: &ModeTable) -> Result<CMatrix, FockError> {
    let omegas: Vec<f64> = basis
        .active_modes()
        .iter()
        .map(|&n| modes.position(n).map(|i| modes.modes[i].omega).ok_or(FockError::UnknownMode(n)))
        .collect::<Result<_, _>>()?;
    let d = basis.dimension();
    let diag = (0..d)
        .map(|i| Complex64::new(omegas.iter().enumerate().map(|(s, w)| w * basis.occupancy(i, s) as f64).sum(), 0.0));
    Ok(CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, diag)))
}

/// Projector onto states whose every occupancy is below the cutoff.
pub fn below_cutoff_projector(basis: &FockBasis) -> CMatrix {
    let d = basis.dimension();
    let diag = (0..d).map(|i| {
        let inside = (0..basis.n_modes()).all(|s| basis.occupancy(i, s) < basis.n_max());
        Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
    });
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, diag))
}

/// Summary of an operator's truncation behaviour.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CommutatorResidual {
    /// Operator norm of the full truncated commutator minus `i c`.
    pub full: f64,
    /// Same, restricted to the below-cutoff subspace.
    pub below_cutoff: f64,
}

/// Compares `[x, y]` with `i c Id` in the truncated space.
pub fn commutator_residual(basis: &FockBasis, x: &CMatrix, y: &CMatrix, c: f64) -> CommutatorResidual {
    let d = basis.dimension();
    let comm = x * y - y * x - CMatrix::identity(d, d) * Complex64::new(0.0, c);
    let q = below_cutoff_projector(basis);
    let restricted = &q * &comm * &q;
    CommutatorResidual { full: operator_norm(&comm), below_cutoff: operator_norm(&restricted) }
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}
