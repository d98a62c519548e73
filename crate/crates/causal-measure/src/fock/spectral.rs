use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FockError;
use crate::CMatrix;

/// Eigenvalues ascending, eigenvectors as matching columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn of(op: &CMatrix) -> Self {
        let d = op.nrows();
        if d == 0 {
            return Self { values: Vec::new(), vectors: CMatrix::zeros(0, 0) };
        }
        // symmetrize so roundoff in the input cannot leak into the solver
        let h = (op + op.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn radius(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Projector onto the eigenvectors whose labels satisfy `keep`.
    pub fn projector_where(&self, keep: impl Fn(usize) -> bool) -> CMatrix {
        let d = self.values.len();
        let cols: Vec<usize> = (0..d).filter(|&i| keep(i)).collect();
        let mut p = CMatrix::zeros(d, d);
        for &c in &cols {
            let v = self.vectors.column(c);
            p += v * v.adjoint();
        }
        p
    }
}

/// Half-open outcome bins covering the real line.
///
/// `n_bins` counts every bin. One bin is the whole line, two bins split at 0,
/// and three or more put `n_bins - 2` uniform bins over `[-delta_max, delta_max)`
/// between two unbounded end bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPartition {
    pub delta_max: f64,
    pub n_bins: usize,
    pub edges: Vec<f64>,
    pub width: f64,
}

/// Builds the partition; `n_bins = 0` or non-positive `delta_max` is rejected.
pub fn bin_partition(delta_max: f64, n_bins: usize) -> Result<BinPartition, FockError> {
    if n_bins == 0 || !(delta_max > 0.0 && delta_max.is_finite()) {
        return Err(FockError::InvalidPartition { delta_max, n_bins });
    }
    let (edges, width) = match n_bins {
        1 => (Vec::new(), 2.0 * delta_max),
        2 => (vec![0.0], delta_max),
        _ => {
            let w = 2.0 * delta_max / (n_bins - 2) as f64;
            let mut e: Vec<f64> = (0..n_bins - 1).map(|i| -delta_max + w * i as f64).collect();
            *e.last_mut().expect("n_bins >= 3") = delta_max;
            (e, w)
        }
    };
    Ok(BinPartition { delta_max, n_bins, edges, width })
}

impl BinPartition {
    /// Bin of `v`; values within `snap` of an edge count as on the edge.
    pub fn bin_of_snapped(&self, v: f64, snap: f64) -> usize {
        self.edges.partition_point(|&e| e <= v + snap)
    }

    pub fn bin_of(&self, v: f64) -> usize {
        self.bin_of_snapped(v, 0.0)
    }

    /// `[lo, hi)` of bin `i` with infinite ends.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { f64::NEG_INFINITY } else { self.edges[i - 1] };
        let hi = if i == self.edges.len() { f64::INFINITY } else { self.edges[i] };
        (lo, hi)
    }

    /// Point value used for composition: the midpoint, or edge -/+ width/2 on end bins.
    pub fn representative(&self, i: usize) -> f64 {
        match (i, self.edges.len()) {
            (_, 0) => 0.0,
            (0, _) => self.edges[0] - self.width / 2.0,
            (i, n) if i == n => self.edges[n - 1] + self.width / 2.0,
            (i, _) => 0.5 * (self.edges[i - 1] + self.edges[i]),
        }
    }

    pub fn representatives(&self) -> Vec<f64> {
        (0..self.n_bins).map(|i| self.representative(i)).collect()
    }
}

/// Snapping tolerance for a spectrum of the given radius.
pub fn edge_snap(radius: f64) -> f64 {
    1e-9 * (1.0 + radius)
}

/// Bin labels of every eigenvalue of `spec`.
pub fn spectral_labels(spec: &Spectrum, bins: &BinPartition) -> Vec<usize> {
    let snap = edge_snap(spec.radius());
    spec.values.iter().map(|&v| bins.bin_of_snapped(v, snap)).collect()
}

/// Sum of eigenprojectors of `op` with eigenvalue in `[lo, hi)`.
pub fn interval_projector(op: &CMatrix, lo: f64, hi: f64) -> CMatrix {
    let spec = Spectrum::of(op);
    let snap = edge_snap(spec.radius());
    spec.projector_where(|i| {
        let v = spec.values[i];
        let above = lo == f64::NEG_INFINITY || v + snap >= lo;
        let below = hi == f64::INFINITY || v + snap < hi;
        above && below
    })
}

/// One projector per bin of `bins`, from a single decomposition.
pub fn spectral_family(op: &CMatrix, bins: &BinPartition) -> Vec<CMatrix> {
    let spec = Spectrum::of(op);
    let labels = spectral_labels(&spec, bins);
    (0..bins.n_bins).map(|b| spec.projector_where(|i| labels[i] == b)).collect()
}
