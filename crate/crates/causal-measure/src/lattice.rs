//! Periodic-lattice regularization of the free Klein-Gordon field in 1+1D.
//!
//! Sites sit at `x_j = (j - N/2) a`, modes at `k_n = 2 pi n / L` for
//! `n in [-N/2, N/2)`, with the continuum dispersion `omega = sqrt(k^2 + m^2)`.
//! The smeared field is
//! `Phi(f, t) = sum_k alpha_k a_k + h.c.`, `alpha_k = conj(f~(k)) e^{-i omega t} / sqrt(2 omega L)`,
//! with `f~(k) = a sum_j f_j e^{-i k x_j}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Span;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid lattice: {0}")]
    InvalidSpec(String),
    #[error("massless lattice has a zero mode; acknowledge its exclusion explicitly")]
    MasslessZeroMode,
    #[error("smearing for `{0}` has support outside the lattice")]
    SupportOutsideLattice(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_sites: usize,
    pub spacing: f64,
    pub mass: f64,
}

impl LatticeSpec {
    pub fn new(n_sites: usize, spacing: f64, mass: f64) -> Result<Self, LatticeError> {
        if n_sites == 0 || !n_sites.is_multiple_of(2) {
            return Err(LatticeError::InvalidSpec(format!("n_sites must be positive and even, got {n_sites}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(LatticeError::InvalidSpec(format!("spacing must be positive, got {spacing}")));
        }
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(LatticeError::InvalidSpec(format!("mass must be non-negative, got {mass}")));
        }
        Ok(Self { n_sites, spacing, mass })
    }

    pub fn box_length(&self) -> f64 {
        self.n_sites as f64 * self.spacing
    }

    pub fn site_position(&self, j: usize) -> f64 {
        (j as f64 - (self.n_sites / 2) as f64) * self.spacing
    }

    pub fn site_positions(&self) -> Vec<f64> {
        (0..self.n_sites).map(|j| self.site_position(j)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub n: i64,
    pub k: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    pub spec: LatticeSpec,
    pub modes: Vec<Mode>,
}

impl ModeTable {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn box_length(&self) -> f64 {
        self.spec.box_length()
    }

    pub fn position(&self, n: i64) -> Option<usize> {
        self.modes.iter().position(|m| m.n == n)
    }

    /// A table holding only the listed mode indices, in the given order.
    pub fn restricted(&self, indices: &[i64]) -> Option<ModeTable> {
        let modes = indices.iter().map(|&n| self.position(n).map(|i| self.modes[i])).collect::<Option<_>>()?;
        Some(ModeTable { spec: self.spec, modes })
    }
}

/// Builds the mode table. A massless lattice needs `exclude_zero_mode`.
pub fn build_mode_table(spec: &LatticeSpec, exclude_zero_mode: bool) -> Result<ModeTable, LatticeError> {
    let spec = LatticeSpec::new(spec.n_sites, spec.spacing, spec.mass)?;
    if spec.mass == 0.0 && !exclude_zero_mode {
        return Err(LatticeError::MasslessZeroMode);
    }
    let half = (spec.n_sites / 2) as i64;
    let l = spec.box_length();
    let modes = (-half..half)
        .filter(|&n| !(n == 0 && spec.mass == 0.0))
        .map(|n| {
            let k = 2.0 * PI * n as f64 / l;
            Mode { n, k, omega: (k * k + spec.mass * spec.mass).sqrt() }
        })
        .collect();
    Ok(ModeTable { spec, modes })
}

/// Named smearing profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    /// `cos^2(pi (x - center) / width)` on `|x - center| < width / 2`.
    Bump { center: f64, width: f64 },
    /// Constant on the sites of the region, normalized so `a sum_j f_j = 1`.
    Uniform,
    /// Explicit site samples over the whole lattice.
    Samples { values: Vec<f64> },
}

/// Real site samples of a device's test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmearingFunction {
    pub device_id: String,
    pub samples: Vec<f64>,
}

impl SmearingFunction {
    pub fn new(device_id: impl Into<String>, samples: Vec<f64>, spec: &LatticeSpec) -> Result<Self, LatticeError> {
        let device_id = device_id.into();
        if samples.len() != spec.n_sites || samples.iter().any(|v| !v.is_finite()) {
            return Err(LatticeError::SupportOutsideLattice(device_id));
        }
        Ok(Self { device_id, samples })
    }

    /// Samples `profile` on the lattice sites inside `[x_lo, x_hi]`.
    pub fn from_profile(
        device_id: impl Into<String>,
        profile: &Profile,
        x_lo: f64,
        x_hi: f64,
        spec: &LatticeSpec,
    ) -> Result<Self, LatticeError> {
        let device_id = device_id.into();
        let a = spec.spacing;
        let (first, last) = (spec.site_position(0), spec.site_position(spec.n_sites - 1));
        if x_lo < first - 1e-9 * a || x_hi > last + 1e-9 * a {
            return Err(LatticeError::SupportOutsideLattice(device_id));
        }
        let region = Span::closed(x_lo, x_hi);
        let tol = 1e-9 * a;
        let inside: Vec<bool> = spec.site_positions().iter().map(|&x| region.contains(x, tol)).collect();
        let samples = match profile {
            Profile::Bump { center, width } => spec
                .site_positions()
                .iter()
                .zip(&inside)
                .map(|(&x, &ok)| {
                    let u = (x - center) / width;
                    if ok && u.abs() < 0.5 {
                        (PI * u).cos().powi(2)
                    } else {
                        0.0
                    }
                })
                .collect(),
            Profile::Uniform => {
                let count = inside.iter().filter(|&&b| b).count();
                if count == 0 {
                    return Err(LatticeError::SupportOutsideLattice(device_id));
                }
                let v = 1.0 / (a * count as f64);
                inside.iter().map(|&ok| if ok { v } else { 0.0 }).collect()
            }
            Profile::Samples { values } => {
                if values.len() != spec.n_sites {
                    return Err(LatticeError::SupportOutsideLattice(device_id));
                }
                if values.iter().zip(&inside).any(|(&v, &ok)| v != 0.0 && !ok) {
                    return Err(LatticeError::SupportOutsideLattice(device_id));
                }
                values.clone()
            }
        };
        Self::new(device_id, samples, spec)
    }

    /// Restriction to the lattice sites inside `span`.
    pub fn restrict(&self, part_id: impl Into<String>, span: &Span, spec: &LatticeSpec) -> Self {
        let tol = 1e-9 * spec.spacing;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(j, &v)| if span.contains(spec.site_position(j), tol) { v } else { 0.0 })
            .collect();
        Self { device_id: part_id.into(), samples }
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }

    /// `a sum_j f_j g_j`.
    pub fn inner(&self, other: &Self, spec: &LatticeSpec) -> f64 {
        spec.spacing * self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// `f~(k) = a sum_j f_j e^{-i k x_j}` for every mode in the table.
pub fn smear_transform(f: &SmearingFunction, modes: &ModeTable) -> Result<Vec<Complex64>, LatticeError> {
    let spec = &modes.spec;
    if f.samples.len() != spec.n_sites {
        return Err(LatticeError::SupportOutsideLattice(f.device_id.clone()));
    }
    let xs = spec.site_positions();
    Ok(modes
        .modes
        .iter()
        .map(|m| {
            let s: Complex64 = f
                .samples
                .iter()
                .zip(&xs)
                .filter(|(v, _)| **v != 0.0)
                .map(|(&v, &x)| Complex64::from_polar(v, -m.k * x))
                .sum();
            s * spec.spacing
        })
        .collect())
}

/// Coefficients `alpha_k` of `a_k` in `Phi(f, t)`.
pub fn field_amplitudes(f: &SmearingFunction, t: f64, modes: &ModeTable) -> Result<Vec<Complex64>, LatticeError> {
    let l = modes.box_length();
    Ok(smear_transform(f, modes)?
        .into_iter()
        .zip(&modes.modes)
        .map(|(ft, m)| ft.conj() * Complex64::from_polar(1.0, -m.omega * t) / (2.0 * m.omega * l).sqrt())
        .collect())
}

/// `c` with `[Phi(f, t_f), Phi(g, t_g)] = i c`:
/// `c = sum_k Im(conj(f~) g~ e^{-i omega (t_f - t_g)}) / (omega L)`.
pub fn pauli_jordan(
    f: &SmearingFunction,
    t_f: f64,
    g: &SmearingFunction,
    t_g: f64,
    modes: &ModeTable,
) -> Result<f64, LatticeError> {
    let (ff, gg) = (smear_transform(f, modes)?, smear_transform(g, modes)?);
    let l = modes.box_length();
    Ok(ff
        .iter()
        .zip(&gg)
        .zip(&modes.modes)
        .map(|((a, b), m)| (a.conj() * b * Complex64::from_polar(1.0, -m.omega * (t_f - t_g))).im / (m.omega * l))
        .sum())
}

/// `sigma^2 = (1 / 2L) sum_k |f~(k)|^2 / omega_k`.
pub fn vacuum_variance(f: &SmearingFunction, modes: &ModeTable) -> Result<f64, LatticeError> {
    let l = modes.box_length();
    Ok(smear_transform(f, modes)?.iter().zip(&modes.modes).map(|(a, m)| a.norm_sqr() / m.omega).sum::<f64>()
        / (2.0 * l))
}

/// `E_0 = (1/2) sum_k omega_k`.
pub fn vacuum_energy(modes: &ModeTable) -> f64 {
    0.5 * modes.modes.iter().map(|m| m.omega).sum::<f64>()
}

/// Share of Parseval weight carried by the top third of `|k|`.
pub fn high_k_fraction(f: &SmearingFunction, modes: &ModeTable) -> Result<f64, LatticeError> {
    let ft = smear_transform(f, modes)?;
    let k_max = modes.modes.iter().map(|m| m.k.abs()).fold(0.0, f64::max);
    let total: f64 = ft.iter().map(|a| a.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let high: f64 =
        ft.iter().zip(&modes.modes).filter(|(_, m)| m.k.abs() > 2.0 * k_max / 3.0).map(|(a, _)| a.norm_sqr()).sum();
    Ok(high / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize, a: f64, m: f64) -> ModeTable {
        build_mode_table(&LatticeSpec::new(n, a, m).unwrap(), false).unwrap()
    }

    #[test]
    fn small_table() {
        let t = table(4, 1.0, 1.0);
        let ks: Vec<f64> = t.modes.iter().map(|m| m.k).collect();
        assert_eq!(ks.len(), 4);
        for (k, want) in ks.iter().zip([-PI, -PI / 2.0, 0.0, PI / 2.0]) {
            assert!((k - want).abs() < 1e-15);
        }
        assert_eq!(t.modes[2].omega, 1.0);
        let t2 = table(4, 1.0, 2.0);
        assert_eq!(t2.modes[2].omega, 2.0);
    }

    #[test]
    fn massless_zero_mode() {
        let spec = LatticeSpec::new(4, 1.0, 0.0).unwrap();
        assert_eq!(build_mode_table(&spec, false), Err(LatticeError::MasslessZeroMode));
        let t = build_mode_table(&spec, true).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.modes.iter().all(|m| m.omega > 0.0));
    }

    #[test]
    fn invalid_specs() {
        assert!(LatticeSpec::new(5, 1.0, 1.0).is_err());
        assert!(LatticeSpec::new(4, 0.0, 1.0).is_err());
        assert!(LatticeSpec::new(4, 1.0, -1.0).is_err());
    }

    #[test]
    fn delta_and_uniform_transforms() {
        let t = table(8, 0.5, 1.0);
        let mut s = vec![0.0; 8];
        s[4] = 1.0 / 0.5;
        let f = SmearingFunction::new("d", s, &t.spec).unwrap();
        for a in smear_transform(&f, &t).unwrap() {
            assert!((a - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
        let u = SmearingFunction::from_profile("u", &Profile::Uniform, -1.0, 1.0, &t.spec).unwrap();
        let zero = t.position(0).unwrap();
        assert!((smear_transform(&u, &t).unwrap()[zero] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn support_outside_lattice() {
        let spec = LatticeSpec::new(8, 0.5, 1.0).unwrap();
        assert!(matches!(
            SmearingFunction::from_profile("x", &Profile::Uniform, -3.0, 0.0, &spec),
            Err(LatticeError::SupportOutsideLattice(_))
        ));
        assert!(SmearingFunction::new("x", vec![0.0; 3], &spec).is_err());
    }

    #[test]
    fn energy_examples() {
        let spec = LatticeSpec::new(2, 1.0, 1.0).unwrap();
        let one = ModeTable { spec, modes: vec![Mode { n: 0, k: 0.0, omega: 1.0 }] };
        assert_eq!(vacuum_energy(&one), 0.5);
        let two = ModeTable {
            spec,
            modes: vec![Mode { n: 0, k: 0.0, omega: 1.0 }, Mode { n: 1, k: 0.0, omega: 2.0 }],
        };
        assert_eq!(vacuum_energy(&two), 1.5);
    }

    #[test]
    fn zero_and_scaled_variance() {
        let t = table(16, 0.5, 1.0);
        let z = SmearingFunction::new("z", vec![0.0; 16], &t.spec).unwrap();
        assert_eq!(vacuum_variance(&z, &t).unwrap(), 0.0);
        let f = SmearingFunction::from_profile("b", &Profile::Bump { center: 0.0, width: 2.0 }, -1.0, 1.0, &t.spec)
            .unwrap();
        let g = SmearingFunction { samples: f.samples.iter().map(|v| 3.0 * v).collect(), ..f.clone() };
        let (s1, s3) = (vacuum_variance(&f, &t).unwrap(), vacuum_variance(&g, &t).unwrap());
        assert!((s3 - 9.0 * s1).abs() < 1e-12 * s3);
    }

    #[test]
    fn equal_time_commutator_vanishes() {
        let t = table(32, 0.25, 1.0);
        let f = SmearingFunction::from_profile("f", &Profile::Uniform, -1.0, 0.0, &t.spec).unwrap();
        let g = SmearingFunction::from_profile("g", &Profile::Uniform, -0.5, 1.5, &t.spec).unwrap();
        assert!(pauli_jordan(&f, 0.7, &g, 0.7, &t).unwrap().abs() < 1e-15);
        let c = pauli_jordan(&f, 0.0, &g, 1.0, &t).unwrap();
        let d = pauli_jordan(&g, 1.0, &f, 0.0, &t).unwrap();
        assert!(c.abs() > 1e-3);
        assert!((c + d).abs() < 1e-15);
    }
}
