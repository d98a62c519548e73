use serde::{Deserialize, Serialize};

use super::FockError;
use crate::lattice::ModeTable;

/// Default bound on the Fock dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 16384;

/// Tensor-product Fock basis with a per-mode occupancy cutoff.
///
/// Flat indices are mixed-radix numbers with the first mode most
/// significant, so operators on mode 0 act on the outermost block structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockBasis {
    active_modes: Vec<i64>,
    n_max: usize,
    dimension: usize,
}

impl FockBasis {
    /// Basis over abstract modes labelled `0..n_modes`.
    pub fn abstract_modes(n_modes: usize, n_max: usize, cap: usize) -> Result<Self, FockError> {
        let labels: Vec<i64> = (0..n_modes as i64).collect();
        Self::with_labels(labels, n_max, cap)
    }

    fn with_labels(active_modes: Vec<i64>, n_max: usize, cap: usize) -> Result<Self, FockError> {
        let levels = n_max + 1;
        let mut dimension: usize = 1;
        for _ in &active_modes {
            dimension = dimension.checked_mul(levels).filter(|&d| d <= cap).ok_or(FockError::DimensionCap {
                modes: active_modes.len(),
                n_max,
                cap,
            })?;
        }
        Ok(Self { active_modes, n_max, dimension })
    }

    pub fn active_modes(&self) -> &[i64] {
        &self.active_modes
    }

    pub fn n_modes(&self) -> usize {
        self.active_modes.len()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    /// Position of a mode label inside the basis.
    pub fn slot(&self, mode: i64) -> Option<usize> {
        self.active_modes.iter().position(|&m| m == mode)
    }

    /// Flat-index stride of the mode in position `slot`.
    pub fn stride(&self, slot: usize) -> usize {
        self.levels().pow((self.n_modes() - 1 - slot) as u32)
    }

    pub fn encode(&self, occupancy: &[usize]) -> Option<usize> {
        if occupancy.len() != self.n_modes() || occupancy.iter().any(|&n| n > self.n_max) {
            return None;
        }
        Some(occupancy.iter().fold(0, |acc, &n| acc * self.levels() + n))
    }

    pub fn decode(&self, index: usize) -> Option<Vec<usize>> {
        if index >= self.dimension {
            return None;
        }
        let mut out = vec![0; self.n_modes()];
        let mut rest = index;
        for slot in (0..self.n_modes()).rev() {
            out[slot] = rest % self.levels();
            rest /= self.levels();
        }
        Some(out)
    }

    /// Occupancy of the mode in position `slot` for a flat index.
    pub fn occupancy(&self, index: usize, slot: usize) -> usize {
        (index / self.stride(slot)) % self.levels()
    }
}

/// Basis over the listed plane-wave modes of `modes`.
pub fn build_basis(modes: &ModeTable, active_modes: &[i64], n_max: usize, cap: usize) -> Result<FockBasis, FockError> {
    for &m in active_modes {
        if modes.position(m).is_none() {
            return Err(FockError::UnknownMode(m));
        }
    }
    FockBasis::with_labels(active_modes.to_vec(), n_max, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_mode_table, LatticeSpec};

    fn table() -> ModeTable {
        build_mode_table(&LatticeSpec::new(16, 0.5, 1.0).unwrap(), false).unwrap()
    }

    #[test]
    fn dimensions() {
        let t = table();
        assert_eq!(build_basis(&t, &[0], 3, DEFAULT_DIMENSION_CAP).unwrap().dimension(), 4);
        assert_eq!(build_basis(&t, &[-1, 0, 1], 2, DEFAULT_DIMENSION_CAP).unwrap().dimension(), 27);
        let eight: Vec<i64> = (-4..4).collect();
        assert!(matches!(build_basis(&t, &eight, 7, DEFAULT_DIMENSION_CAP), Err(FockError::DimensionCap { .. })));
        assert!(matches!(build_basis(&t, &[99], 1, DEFAULT_DIMENSION_CAP), Err(FockError::UnknownMode(99))));
        assert_eq!(FockBasis::abstract_modes(0, 5, 10).unwrap().dimension(), 1);
    }

    #[test]
    fn codec_bijection() {
        let b = FockBasis::abstract_modes(3, 2, 100).unwrap();
        for i in 0..b.dimension() {
            let occ = b.decode(i).unwrap();
            assert_eq!(b.encode(&occ), Some(i));
            for s in 0..3 {
                assert_eq!(b.occupancy(i, s), occ[s]);
            }
        }
        assert_eq!(b.encode(&[0, 0, 3]), None);
        assert_eq!(b.decode(27), None);
    }
}
