//! Closed-form outcome distributions used as oracles for the Fock engine.

use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::lattice::{smear_transform, vacuum_variance, LatticeError, ModeTable, SmearingFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("caustic: |sin(omega t)| < 1e-9 at omega={omega}, t={t}")]
    CausticSingularity { omega: f64, t: f64 },
    #[error("omega must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("smearing has zero vacuum variance")]
    ZeroSmearing,
    #[error("mode {0} is not in the table")]
    UnknownMode(i64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Eigenstate kernel coefficients of one oscillator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelPair {
    pub omega: f64,
    pub t: f64,
    /// `omega / tan(omega t)`
    pub a: f64,
    /// `omega / sin(omega t)`
    pub b: f64,
    /// `sqrt(omega / (2 pi |sin(omega t)|))`
    pub c_abs: f64,
}

pub fn kernels(omega: f64, t: f64) -> Result<KernelPair, AnalyticError> {
    if !(omega > 0.0) {
        return Err(AnalyticError::NonPositiveFrequency(omega));
    }
    let (s, c) = (omega * t).sin_cos();
    if s.abs() < 1e-9 {
        return Err(AnalyticError::CausticSingularity { omega, t });
    }
    Ok(KernelPair {
        omega,
        t,
        a: omega * c / s,
        b: omega / s,
        c_abs: (omega / (2.0 * std::f64::consts::PI * s.abs())).sqrt(),
    })
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal CDF evaluated at `x / sigma`, with infinite ends handled.
fn cdf_u(x: f64, sigma: f64) -> f64 {
    match x {
        f64::NEG_INFINITY => 0.0,
        f64::INFINITY => 1.0,
        _ => std_normal().cdf(x / sigma),
    }
}

/// `u phi(u)` at `u = x / sigma`, zero at infinite ends.
fn u_pdf(x: f64, sigma: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let u = x / sigma;
    u * std_normal().pdf(u)
}

/// Mass of `N(0, sigma^2)` over `[lo, hi)`.
pub fn gaussian_mass(sigma: f64, lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    // evaluate in the tail nearer zero to keep precision
    if lo >= 0.0 {
        cdf_u(-lo, sigma) - cdf_u(-hi, sigma)
    } else {
        cdf_u(hi, sigma) - cdf_u(lo, sigma)
    }
}

/// `<0| P_[lo,hi)(Phi(f)) |0>`, the `N(0, sigma^2)` mass with
/// `sigma^2 = <f omega^-1 f> / 2`. No time argument: the vacuum is stationary.
pub fn vacuum_projector_expectation(
    f: &SmearingFunction,
    lo: f64,
    hi: f64,
    modes: &ModeTable,
) -> Result<f64, AnalyticError> {
    let s2 = vacuum_variance(f, modes)?;
    if s2 <= 0.0 {
        return Err(AnalyticError::ZeroSmearing);
    }
    Ok(gaussian_mass(s2.sqrt(), lo, hi))
}

/// Outcome density of `Phi(f)` in the one-particle state `|1_k>`.
///
/// Two `J` derivatives of the generating functional give the characteristic
/// function `exp(-sigma^2 J^2 / 2) (1 - |alpha_k|^2 J^2)`, whose transform is
/// `N(0, sigma^2)(x) [1 - r + r x^2 / sigma^2]` with `r = |alpha_k|^2 / sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneParticleDensity {
    pub sigma: f64,
    pub r: f64,
}

impl OneParticleDensity {
    pub fn new(f: &SmearingFunction, k: i64, modes: &ModeTable) -> Result<Self, AnalyticError> {
        let i = modes.position(k).ok_or(AnalyticError::UnknownMode(k))?;
        let s2 = vacuum_variance(f, modes)?;
        if s2 <= 0.0 {
            return Err(AnalyticError::ZeroSmearing);
        }
        let ft = smear_transform(f, modes)?[i];
        let m = modes.modes[i];
        let alpha2 = ft.norm_sqr() / (2.0 * m.omega * modes.box_length());
        Ok(Self { sigma: s2.sqrt(), r: alpha2 / s2 })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let u = x / self.sigma;
        std_normal().pdf(u) / self.sigma * (1.0 - self.r + self.r * u * u)
    }

    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if lo >= hi {
            return 0.0;
        }
        gaussian_mass(self.sigma, lo, hi) - self.r * (u_pdf(hi, self.sigma) - u_pdf(lo, self.sigma))
    }

    pub fn second_moment(&self) -> f64 {
        self.sigma * self.sigma * (1.0 + 2.0 * self.r)
    }
}

/// `<1_k| P_[lo,hi)(Phi(f)) |1_k>`.
pub fn one_particle_projector_expectation(
    f: &SmearingFunction,
    lo: f64,
    hi: f64,
    k: i64,
    modes: &ModeTable,
) -> Result<f64, AnalyticError> {
    Ok(OneParticleDensity::new(f, k, modes)?.mass(lo, hi))
}

/// `|psi_t(phi)|^2` for a unit-mass oscillator vacuum propagated with the
/// eigenstate kernel `C exp(i A (phi^2 + phi'^2) / 2 - i B phi phi')`.
///
/// The Gaussian integral over `phi'` is done in closed form; the finite
/// prefactors `|C|^2` and `sqrt(2 pi / |omega - i A|)` cancel against each other.
pub fn kernel_evolved_vacuum_density(omega: f64, t: f64, phi: f64) -> Result<f64, AnalyticError> {
    use num_complex::Complex64;
    let k = kernels(omega, t)?;
    let z = Complex64::new(omega, -k.a);
    let norm0 = (omega / std::f64::consts::PI).sqrt().sqrt();
    let amp = Complex64::new(k.c_abs * norm0, 0.0)
        * (Complex64::new(2.0 * std::f64::consts::PI, 0.0) / z).sqrt()
        * (Complex64::new(-k.b * k.b * phi * phi, 0.0) / (2.0 * z)).exp();
    Ok(amp.norm_sqr())
}

/// Mass of [`kernel_evolved_vacuum_density`] over a finite interval by
/// composite Simpson integration with `panels` panels.
pub fn kernel_vacuum_mass(omega: f64, t: f64, lo: f64, hi: f64, panels: usize) -> Result<f64, AnalyticError> {
    let n = panels.max(2) & !1;
    let h = (hi - lo) / n as f64;
    let mut s = kernel_evolved_vacuum_density(omega, t, lo)? + kernel_evolved_vacuum_density(omega, t, hi)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * kernel_evolved_vacuum_density(omega, t, lo + h * i as f64)?;
    }
    Ok(s * h / 3.0)
}
