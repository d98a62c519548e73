//! Fock representations of the part fields.
//!
//! Every part field becomes `Phi_p = sum_m beta_pm b_m + h.c. + (W xi)_p` on a
//! truncated set of oscillators `b_m`, with `xi` a standard normal vector that
//! is integrated by Gauss-Hermite quadrature.
//!
//! The canonical frame drops the (small) commutators between causally
//! unrelated parts, so those parts commute exactly after truncation. Each
//! connected cluster of the remaining commutator graph must have rank two and
//! becomes one oscillator `(x, p)`; central remainders are classical. The
//! dropped commutators are reported as the microcausality residual.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use super::plan::{FrameKind, InitialState, MeasurementPlan, PreparedPart};
use super::RulesError;
use crate::fock::{excitation_state, vacuum_density, FockBasis, FockError};
use crate::lattice::{smear_transform, ModeTable};
use crate::CMatrix;

#[derive(Debug, Clone, Serialize)]
pub struct Representation {
    pub requested: FrameKind,
    pub kind: FrameKind,
    #[serde(skip)]
    pub basis: FockBasis,
    #[serde(skip)]
    pub coeffs: Vec<Vec<Complex64>>,
    #[serde(skip)]
    pub loadings: Vec<Vec<f64>>,
    /// Number of classical dimensions.
    pub rank: usize,
    #[serde(skip)]
    pub initial: CMatrix,
    #[serde(skip)]
    pub quadrature: Vec<(f64, f64)>,
    pub max_discarded_weight: f64,
    pub notes: Vec<String>,
}

impl Representation {
    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn n_nodes(&self) -> usize {
        self.quadrature.len().pow(self.rank as u32)
    }

    /// Truncated quantum part of `Phi_p`.
    pub fn operator(&self, p: usize) -> CMatrix {
        crate::fock::quadrature(&self.basis, &self.coeffs[p])
    }

    /// `c` with `[Phi_p, Phi_q] = i c` below the occupancy cutoff.
    pub fn commutator(&self, p: usize, q: usize) -> f64 {
        let s: Complex64 = self.coeffs[p].iter().zip(&self.coeffs[q]).map(|(a, b)| a * b.conj()).sum();
        2.0 * s.im
    }

    /// Untruncated vacuum covariance `Re <Phi_p Phi_q>` implied by the frame.
    pub fn covariance(&self, p: usize, q: usize) -> f64 {
        let quantum: Complex64 = self.coeffs[p].iter().zip(&self.coeffs[q]).map(|(a, b)| a * b.conj()).sum();
        let classical: f64 = self.loadings[p].iter().zip(&self.loadings[q]).map(|(a, b)| a * b).sum();
        quantum.re + classical
    }

    /// Classical shift of every part at quadrature node `index`, with its weight.
    pub fn node(&self, index: usize) -> (Vec<f64>, f64) {
        let q = self.quadrature.len();
        let mut xi = vec![0.0; self.rank];
        let mut w = 1.0;
        let mut rest = index;
        for x in xi.iter_mut().rev() {
            let (node, weight) = self.quadrature[rest % q];
            *x = node;
            w *= weight;
            rest /= q;
        }
        let shifts = self.loadings.iter().map(|row| row.iter().zip(&xi).map(|(a, b)| a * b).sum()).collect();
        (shifts, w)
    }
}

/// Probabilists' Gauss-Hermite rule with `q` nodes (Golub-Welsch).
pub fn gauss_hermite(q: usize) -> Vec<(f64, f64)> {
    let q = q.max(1);
    let j = DMatrix::from_fn(q, q, |r, c| if r + 1 == c || c + 1 == r { (r.max(c) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(j);
    let mut nodes: Vec<(f64, f64)> =
        (0..q).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)] * eig.eigenvectors[(0, i)])).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    nodes.iter().map(|&(x, w)| (x, w / total)).collect()
}

pub(crate) fn build_representation(
    plan: &MeasurementPlan,
    modes: &ModeTable,
    alpha: &DMatrix<Complex64>,
    parts: &[PreparedPart],
    unrelated: &[Vec<bool>],
) -> Result<Representation, RulesError> {
    let cfg = &plan.frame;
    let excitations = match &plan.initial {
        InitialState::Vacuum => Vec::new(),
        InitialState::Excitation { modes: ks } => ks.clone(),
    };
    let mut notes = Vec::new();
    let rep = match cfg.kind {
        FrameKind::Canonical if excitations.is_empty() => match canonical(plan, alpha, unrelated)? {
            Ok(rep) => rep,
            Err(reason) => {
                notes.push(format!("canonical frame unavailable ({reason}); using the effective frame"));
                effective(plan, modes, alpha, &excitations)?
            }
        },
        FrameKind::Canonical => {
            notes.push("excited initial states use the effective frame".into());
            effective(plan, modes, alpha, &excitations)?
        }
        FrameKind::Effective => effective(plan, modes, alpha, &excitations)?,
        FrameKind::Lattice => lattice(plan, modes, alpha, parts, &excitations)?,
    };
    let mut rep = rep;
    rep.notes.extend(notes);
    let q = cfg.quadrature_nodes.unwrap_or(cfg.n_max + 1);
    rep.quadrature = if rep.rank == 0 { vec![(0.0, 1.0)] } else { gauss_hermite(q) };
    let total = (rep.quadrature.len() as f64).powi(rep.rank as i32);
    if total > cfg.max_total_nodes as f64 {
        return Err(RulesError::TooManyNodes { nodes: total, cap: cfg.max_total_nodes });
    }
    Ok(rep)
}

fn eigh(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    if m.is_empty() {
        return (Vec::new(), DMatrix::zeros(m.nrows(), m.ncols()));
    }
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// Rows of `W` with `W W^T = c`, dropping directions below `1e-12 * max`.
fn factor_psd(c: &DMatrix<f64>) -> (Vec<Vec<f64>>, f64) {
    let (vals, vecs) = eigh(c);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = vals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let mut keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-12 * top.max(1e-300)).collect();
    keep.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let rows = (0..c.nrows()).map(|r| keep.iter().map(|&i| vecs[(r, i)] * vals[i].sqrt()).collect()).collect();
    (rows, min)
}

fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = eigh(m);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (i, &v) in vals.iter().enumerate() {
        if v.abs() > 1e-12 * top.max(1e-300) {
            let col = vecs.column(i);
            out += (col * col.transpose()) / v;
        }
    }
    out
}

fn union_find_components(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if edge(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

type FrameResult = Result<Result<Representation, String>, RulesError>;

fn canonical(plan: &MeasurementPlan, alpha: &DMatrix<Complex64>, unrelated: &[Vec<bool>]) -> FrameResult {
    let n = alpha.nrows();
    let g = alpha * alpha.adjoint();
    let gamma = g.map(|z| z.re);
    let sigma: Vec<f64> = (0..n).map(|p| gamma[(p, p)].max(0.0).sqrt()).collect();
    let omega = DMatrix::from_fn(n, n, |p, q| if unrelated[p][q] || p == q { 0.0 } else { 2.0 * g[(p, q)].im });
    let edge = |p: usize, q: usize| omega[(p, q)].abs() > 1e-12 * (sigma[p] * sigma[q]).max(1e-300);
    let clusters: Vec<Vec<usize>> = union_find_components(n, edge).into_iter().filter(|c| c.len() > 1).collect();

    let m = clusters.len();
    let mut t = DMatrix::zeros(n, 2 * m);
    let mut r = DMatrix::zeros(2 * m, n);
    for (k, c) in clusters.iter().enumerate() {
        let (mut i, mut j) = (c[0], c[1]);
        for &a in c {
            for &b in c {
                if omega[(a, b)].abs() > omega[(i, j)].abs() {
                    (i, j) = (a, b);
                }
            }
        }
        let w = omega[(i, j)];
        r[(2 * k, i)] = 1.0;
        r[(2 * k + 1, j)] = 1.0 / w;
        for &l in c {
            t[(l, 2 * k)] = omega[(l, j)] / w;
            t[(l, 2 * k + 1)] = -omega[(l, i)];
        }
        let scale = c.iter().flat_map(|&a| c.iter().map(move |&b| (a, b))).fold(0.0f64, |s, (a, b)| {
            s.max(omega[(a, b)].abs())
        });
        for &a in c {
            for &b in c {
                let implied = t[(a, 2 * k)] * t[(b, 2 * k + 1)] - t[(a, 2 * k + 1)] * t[(b, 2 * k)];
                if (implied - omega[(a, b)]).abs() > 1e-9 * scale {
                    return Ok(Err(format!("a commutator cluster of {} parts has rank above two", c.len())));
                }
            }
        }
    }

    let z = DMatrix::identity(n, n) - &t * &r;
    let s_qq = &r * &gamma * r.transpose();
    let s_qz = &r * &gamma * z.transpose();
    let s_zz = &z * &gamma * z.transpose();
    let mcoef = &s_qz * pseudo_inverse(&s_zz);
    let cond = &s_qq - &mcoef * s_qz.transpose();

    let mut pure = DMatrix::zeros(2 * m, 2 * m);
    let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); m]; n];
    for k in 0..m {
        let (a, b, c) = (cond[(2 * k, 2 * k)], cond[(2 * k, 2 * k + 1)], cond[(2 * k + 1, 2 * k + 1)]);
        let det = a * c - b * b;
        if !(det >= 0.25 * (1.0 - 1e-9)) {
            return Ok(Err(format!("cluster {k} violates the uncertainty bound (det {det:.3e})")));
        }
        let f = 1.0 / (2.0 * det.sqrt());
        let (ga, gb, gc) = (a * f, b * f, c * f);
        pure[(2 * k, 2 * k)] = ga;
        pure[(2 * k, 2 * k + 1)] = gb;
        pure[(2 * k + 1, 2 * k)] = gb;
        pure[(2 * k + 1, 2 * k + 1)] = gc;
        // symplectic square root of 2 gamma
        let s11 = (2.0 * ga).sqrt();
        let s21 = 2.0 * gb / s11;
        let s22 = (2.0 * gc - s21 * s21).max(0.0).sqrt();
        for l in 0..n {
            let (ta, tb) = (t[(l, 2 * k)], t[(l, 2 * k + 1)]);
            let (ap, bp) = (ta * s11 + tb * s21, tb * s22);
            coeffs[l][k] = Complex64::new(ap, -bp) / std::f64::consts::SQRT_2;
        }
    }

    let noise = &cond - &pure;
    let (_, noise_min) = factor_psd(&noise);
    let noise_scale = noise.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if noise_min < -1e-9 * noise_scale {
        return Ok(Err(format!("conditional noise is not positive (min eigenvalue {noise_min:.3e})")));
    }
    let lift = &t * &mcoef + DMatrix::identity(n, n);
    let classical = &t * &noise * t.transpose() + &lift * &s_zz * lift.transpose();
    let (loadings, _) = factor_psd(&classical);
    let rank = loadings.first().map_or(0, Vec::len);

    let basis = FockBasis::abstract_modes(m, plan.frame.n_max, plan.frame.dimension_cap)?;
    let initial = vacuum_density(&basis).rho;
    Ok(Ok(Representation {
        requested: plan.frame.kind,
        kind: FrameKind::Canonical,
        basis,
        coeffs,
        loadings,
        rank,
        initial,
        quadrature: Vec::new(),
        max_discarded_weight: 0.0,
        notes: Vec::new(),
    }))
}

fn effective(
    plan: &MeasurementPlan,
    modes: &ModeTable,
    alpha: &DMatrix<Complex64>,
    excitations: &[i64],
) -> Result<Representation, RulesError> {
    let (n, k) = (alpha.nrows(), alpha.ncols());
    let mut cols: Vec<nalgebra::DVector<Complex64>> = (0..n).map(|p| alpha.row(p).transpose().conjugate()).collect();
    let mut ex_idx = Vec::new();
    for &e in excitations {
        let i = modes.position(e).ok_or(FockError::UnknownMode(e))?;
        let mut v = nalgebra::DVector::zeros(k);
        v[i] = Complex64::new(1.0, 0.0);
        cols.push(v);
        ex_idx.push(i);
    }
    let (u, r) = if cols.is_empty() {
        (CMatrix::zeros(k, 0), 0)
    } else {
        let x = CMatrix::from_columns(&cols);
        let svd = x.svd(true, false);
        let s = &svd.singular_values;
        let top = s.max();
        let mut keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 1e-10 * top).collect();
        keep.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        let full = svd.u.expect("requested U");
        let u = CMatrix::from_fn(k, keep.len(), |row, c| full[(row, keep[c])]);
        (u, keep.len())
    };
    let beta = alpha * &u;
    let coeffs = (0..n).map(|p| beta.row(p).iter().copied().collect()).collect();
    let basis = FockBasis::abstract_modes(r, plan.frame.n_max, plan.frame.dimension_cap)?;
    let initial = if ex_idx.is_empty() {
        vacuum_density(&basis).rho
    } else {
        let creations: Vec<Vec<Complex64>> = ex_idx.iter().map(|&i| (0..r).map(|m| u[(i, m)].conj()).collect()).collect();
        excitation_state(&basis, &creations)?.rho
    };
    Ok(Representation {
        requested: plan.frame.kind,
        kind: FrameKind::Effective,
        basis,
        coeffs,
        loadings: vec![Vec::new(); n],
        rank: 0,
        initial,
        quadrature: Vec::new(),
        max_discarded_weight: 0.0,
        notes: Vec::new(),
    })
}

fn lattice(
    plan: &MeasurementPlan,
    modes: &ModeTable,
    alpha: &DMatrix<Complex64>,
    parts: &[PreparedPart],
    excitations: &[i64],
) -> Result<Representation, RulesError> {
    let active: Vec<i64> = match &plan.frame.active_modes {
        Some(a) => a.clone(),
        None => modes.modes.iter().map(|m| m.n).collect(),
    };
    let idx: Vec<usize> = active.iter().map(|&n| modes.position(n).ok_or(FockError::UnknownMode(n))).collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for p in parts {
        let ft = smear_transform(&p.smearing, modes)?;
        let total: f64 = ft.iter().map(|a| a.norm_sqr()).sum();
        if total == 0.0 {
            continue;
        }
        let kept: f64 = idx.iter().map(|&i| ft[i].norm_sqr()).sum();
        let lost = ((total - kept) / total).max(0.0);
        if lost > plan.tolerances.mode_leakage {
            return Err(FockError::ModeLeakage {
                device: p.part.part_id.clone(),
                weight: lost,
                threshold: plan.tolerances.mode_leakage,
            }
            .into());
        }
        worst = worst.max(lost);
    }
    let coeffs = (0..alpha.nrows()).map(|p| idx.iter().map(|&i| alpha[(p, i)]).collect()).collect();
    let basis = crate::fock::build_basis(modes, &active, plan.frame.n_max, plan.frame.dimension_cap)?;
    let initial = if excitations.is_empty() {
        vacuum_density(&basis).rho
    } else {
        let creations = excitations
            .iter()
            .map(|&e| {
                let s = basis.slot(e).ok_or(FockError::UnknownMode(e))?;
                let mut v = vec![Complex64::new(0.0, 0.0); basis.n_modes()];
                v[s] = Complex64::new(1.0, 0.0);
                Ok(v)
            })
            .collect::<Result<Vec<_>, FockError>>()?;
        excitation_state(&basis, &creations)?.rho
    };
    Ok(Representation {
        requested: plan.frame.kind,
        kind: FrameKind::Lattice,
        basis,
        coeffs,
        loadings: vec![Vec::new(); alpha.nrows()],
        rank: 0,
        initial,
        quadrature: Vec::new(),
        max_discarded_weight: worst,
        notes: Vec::new(),
    })
}
