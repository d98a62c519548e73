use nalgebra::DVector;
use num_complex::Complex64;

use super::{FockBasis, FockError, Spectrum};
use crate::{CMatrix, MaxAbs};

/// A density matrix on a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDensity {
    pub rho: CMatrix,
}

impl StateDensity {
    /// Checks unit trace, hermiticity and positivity to 1e-10.
    pub fn new(rho: CMatrix) -> Result<Self, FockError> {
        let s = Self { rho };
        s.validate()?;
        Ok(s)
    }

    pub fn pure(psi: &DVector<Complex64>) -> Result<Self, FockError> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(FockError::InvalidState("zero state vector".into()));
        }
        let v = psi / Complex64::new(norm, 0.0);
        Self::new(&v * v.adjoint())
    }

    pub fn validate(&self) -> Result<(), FockError> {
        let tr = self.rho.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(FockError::InvalidState(format!("trace {tr}")));
        }
        if (&self.rho - self.rho.adjoint()).max_abs() > 1e-10 {
            return Err(FockError::InvalidState("not Hermitian".into()));
        }
        let min = Spectrum::of(&self.rho).values.first().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(FockError::InvalidState(format!("negative eigenvalue {min}")));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.rho.nrows()
    }

    /// `Tr[rho A]`.
    pub fn expectation(&self, a: &CMatrix) -> Complex64 {
        (&self.rho * a).trace()
    }
}

/// `|0...0><0...0|`.
pub fn vacuum_density(basis: &FockBasis) -> StateDensity {
    let d = basis.dimension();
    let mut rho = CMatrix::zeros(d, d);
    rho[(0, 0)] = Complex64::new(1.0, 0.0);
    StateDensity { rho }
}

/// Normalized `prod_j (sum_m c_jm b_m^dagger) |0>` for a list of creation
/// amplitude vectors over the basis modes.
pub fn excitation_state(basis: &FockBasis, creations: &[Vec<Complex64>]) -> Result<StateDensity, FockError> {
    if creations.len() > basis.n_max() {
        return Err(FockError::InvalidState(format!(
            "{} excitations need n_max >= {}, have {}",
            creations.len(),
            creations.len(),
            basis.n_max()
        )));
    }
    let d = basis.dimension();
    let mut psi = DVector::zeros(d);
    psi[0] = Complex64::new(1.0, 0.0);
    for c in creations {
        let mut next = DVector::zeros(d);
        for (slot, &amp) in c.iter().enumerate() {
            if amp == Complex64::new(0.0, 0.0) {
                continue;
            }
            let stride = basis.stride(slot);
            for i in 0..d {
                let n = basis.occupancy(i, slot);
                if n < basis.n_max() {
                    next[i + stride] += amp * ((n + 1) as f64).sqrt() * psi[i];
                }
            }
        }
        psi = next;
    }
    StateDensity::pure(&psi)
}

/// `rho -> sum_b P_b rho P_b` for a complete projector family.
pub fn lueders_channel(rho: &StateDensity, projectors: &[CMatrix]) -> Result<StateDensity, FockError> {
    let d = rho.dimension();
    let sum = projectors.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p);
    let residual = (sum - CMatrix::identity(d, d)).max_abs();
    if residual > 1e-8 {
        return Err(FockError::IncompleteFamily(residual));
    }
    let out = projectors.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p * &rho.rho * p);
    Ok(StateDensity { rho: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilator, bin_partition, quadrature, spectral_family};

    #[test]
    fn vacuum_properties() {
        let b = FockBasis::abstract_modes(2, 3, 100).unwrap();
        let v = vacuum_density(&b);
        assert_eq!(v.rho.trace().re, 1.0);
        assert_eq!(&v.rho * &v.rho, v.rho);
        for s in 0..2 {
            assert_eq!((annihilator(&b, s) * &v.rho).max_abs(), 0.0);
        }
        v.validate().unwrap();
    }

    #[test]
    fn single_excitation_is_number_one() {
        let b = FockBasis::abstract_modes(2, 2, 100).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let s = excitation_state(&b, &[vec![Complex64::new(0.0, 0.0), one]]).unwrap();
        let a = annihilator(&b, 1);
        let n = a.adjoint() * &a;
        assert!((s.expectation(&n).re - 1.0).abs() < 1e-14);
        assert!(excitation_state(&b, &[vec![one, one], vec![one, one], vec![one, one]]).is_err());
    }

    #[test]
    fn lueders_identity_and_trace() {
        let b = FockBasis::abstract_modes(1, 4, 100).unwrap();
        let c = Complex64::new(0.3, 0.2);
        let rho = excitation_state(&b, &[vec![c]]).unwrap();
        let id = CMatrix::identity(5, 5);
        assert_eq!(lueders_channel(&rho, &[id]).unwrap(), rho);
        let x = quadrature(&b, &[Complex64::new(0.7, 0.1)]);
        let fam = spectral_family(&x, &bin_partition(1.0, 5).unwrap());
        let out = lueders_channel(&rho, &fam).unwrap();
        assert!((out.rho.trace().re - 1.0).abs() < 1e-12);
        out.validate().unwrap();
        assert!(matches!(lueders_channel(&rho, &fam[1..]), Err(FockError::IncompleteFamily(_))));
    }

    #[test]
    fn lueders_invisible_to_commuting_observable() {
        // X and X^2 commute, so measuring X first leaves <X^2> unchanged
        let b = FockBasis::abstract_modes(1, 5, 100).unwrap();
        let x = quadrature(&b, &[Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)]);
        let x2 = &x * &x;
        let rho = excitation_state(&b, &[vec![Complex64::new(0.6, 0.8)]]).unwrap();
        let fam = spectral_family(&x, &bin_partition(1.5, 6).unwrap());
        let after = lueders_channel(&rho, &fam).unwrap();
        assert!((after.expectation(&x2) - rho.expectation(&x2)).norm() < 1e-12);
    }
}
