use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::frame::{build_representation, Representation};
use super::RulesError;
use crate::fock::{bin_partition, BinPartition, DEFAULT_DIMENSION_CAP};
use crate::geometry::{layer_parts, parts_spacelike, split_devices, CausalLayers, DevicePart, Region};
use crate::lattice::{build_mode_table, field_amplitudes, LatticeSpec, ModeTable, SmearingFunction};

/// How part values combine into a device outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    Linear,
    Product,
    SumOfSquares,
}

impl Composition {
    pub fn apply(&self, values: &[f64]) -> f64 {
        match self {
            Self::Linear => values.iter().sum(),
            Self::Product => values.iter().product(),
            Self::SumOfSquares => values.iter().map(|v| v * v).sum(),
        }
    }

    /// Natural scale of the device outcome given part standard deviations.
    pub fn scale(&self, part_sigmas: &[f64], device_sigma: f64) -> f64 {
        match self {
            Self::Linear => device_sigma,
            Self::Product => part_sigmas.iter().product(),
            Self::SumOfSquares => part_sigmas.iter().map(|s| s * s).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Lab-time order of whole devices.
    Standard,
    /// Light-cone layers of device parts.
    Intrinsic,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Standard => "standard",
            Self::Intrinsic => "intrinsic",
        })
    }
}

impl FromStr for Rule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Self::Standard),
            "intrinsic" => Ok(Self::Intrinsic),
            other => Err(format!("unknown rule `{other}`, expected standard or intrinsic")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinScale {
    /// `delta_max` is in units of the observable's natural scale.
    #[default]
    Sigma,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub n_bins: usize,
    pub delta_max: f64,
    #[serde(default)]
    pub scale: BinScale,
}

impl BinSpec {
    pub fn resolve(&self, natural_scale: f64) -> Result<BinPartition, RulesError> {
        let unit = match self.scale {
            BinScale::Sigma => natural_scale,
            BinScale::Absolute => 1.0,
        };
        Ok(bin_partition(self.delta_max * unit, self.n_bins)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub region: Region,
    pub smearing: SmearingFunction,
    pub bins: BinSpec,
    /// Part-level bins; defaults to `bins` applied at each part's own scale.
    pub part_bins: Option<BinSpec>,
    pub selective: bool,
    pub composition: Composition,
}

impl DeviceSpec {
    pub fn id(&self) -> &str {
        &self.region.device_id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// One oscillator per non-commuting cluster of parts plus classical noise.
    #[default]
    Canonical,
    /// Orthonormal modes spanning the part amplitudes.
    Effective,
    /// Plane-wave lattice modes.
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    #[serde(default)]
    pub kind: FrameKind,
    pub n_max: usize,
    /// Plane-wave modes kept by the lattice frame; all modes if absent.
    #[serde(default)]
    pub active_modes: Option<Vec<i64>>,
    #[serde(default = "default_cap")]
    pub dimension_cap: usize,
    /// Gauss-Hermite nodes per classical dimension; `n_max + 1` if absent.
    #[serde(default)]
    pub quadrature_nodes: Option<usize>,
    #[serde(default = "default_max_nodes")]
    pub max_total_nodes: usize,
}

fn default_cap() -> usize {
    DEFAULT_DIMENSION_CAP
}

fn default_max_nodes() -> usize {
    1_000_000
}

impl FrameConfig {
    pub fn new(kind: FrameKind, n_max: usize) -> Self {
        Self {
            kind,
            n_max,
            active_modes: None,
            dimension_cap: DEFAULT_DIMENSION_CAP,
            quadrature_nodes: None,
            max_total_nodes: default_max_nodes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Vacuum,
    /// `prod_k a_k^dagger |0>` over plane-wave mode indices, normalized.
    Excitation { modes: Vec<i64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Largest normalized same-layer commutator accepted.
    #[serde(default = "d_eps_max")]
    pub epsilon_max: f64,
    #[serde(default = "d_leak")]
    pub mode_leakage: f64,
    #[serde(default = "d_highk")]
    pub high_k_warn: f64,
    /// Calibrated constant `c` in `TV <= c * epsilon_trunc`.
    #[serde(default = "d_c")]
    pub signaling_c: f64,
}

fn d_eps_max() -> f64 {
    0.05
}
fn d_leak() -> f64 {
    0.01
}
fn d_highk() -> f64 {
    0.10
}
fn d_c() -> f64 {
    5.0
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { epsilon_max: d_eps_max(), mode_leakage: d_leak(), high_k_warn: d_highk(), signaling_c: d_c() }
    }
}

/// Everything needed to compute outcome tables.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    pub lattice: LatticeSpec,
    pub exclude_zero_mode: bool,
    pub frame: FrameConfig,
    pub devices: Vec<DeviceSpec>,
    pub initial: InitialState,
    pub rule: Rule,
    pub tolerances: Tolerances,
}

/// A device part with its smearing and outcome bins.
#[derive(Debug, Clone)]
pub struct PreparedPart {
    pub part: DevicePart,
    pub device: usize,
    pub smearing: SmearingFunction,
    pub sigma: f64,
    pub bins: BinPartition,
}

/// A plan after splitting, layering and building the Fock representation.
#[derive(Debug, Clone)]
pub struct PreparedPlan {
    pub plan: MeasurementPlan,
    pub modes: ModeTable,
    pub parts: Vec<PreparedPart>,
    pub layers: CausalLayers,
    /// Part indices of every device, in part order.
    pub device_parts: Vec<Vec<usize>>,
    pub device_bins: Vec<BinPartition>,
    pub device_sigma: Vec<f64>,
    /// `Tr[rho0 Phi_p Phi_q]` over all lattice modes.
    pub gram: DMatrix<Complex64>,
    /// `unrelated[p][q]`: parts cannot influence each other.
    pub unrelated: Vec<Vec<bool>>,
    pub representation: Representation,
}

impl PreparedPlan {
    pub fn device_index(&self, id: &str) -> Result<usize, RulesError> {
        self.plan.devices.iter().position(|d| d.id() == id).ok_or_else(|| RulesError::UnknownDevice(id.into()))
    }

    pub fn part_index(&self, id: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.part.part_id == id)
    }

    /// `c` in `[Phi_p, Phi_q] = i c` over all lattice modes.
    pub fn lattice_commutator(&self, p: usize, q: usize) -> f64 {
        2.0 * self.gram[(p, q)].im
    }

    pub fn is_split(&self) -> bool {
        self.device_parts.iter().any(|ps| ps.len() > 1)
    }
}

/// Splits devices, layers parts, resolves bins and builds the representation.
pub fn prepare(plan: &MeasurementPlan) -> Result<PreparedPlan, RulesError> {
    let modes = build_mode_table(&plan.lattice, plan.exclude_zero_mode)?;
    let regions: Vec<Region> = plan.devices.iter().map(|d| d.region.clone()).collect();
    let split = split_devices(&regions)?;
    let layers = layer_parts(&split)?;

    let mut device_parts = vec![Vec::new(); plan.devices.len()];
    let mut smearings = Vec::with_capacity(split.len());
    let mut alphas = Vec::with_capacity(split.len());
    for (i, part) in split.iter().enumerate() {
        let d = plan.devices.iter().position(|d| d.id() == part.parent).expect("parts come from devices");
        device_parts[d].push(i);
        let f = plan.devices[d].smearing.restrict(part.part_id.clone(), &part.span, &plan.lattice);
        alphas.push(field_amplitudes(&f, part.t, &modes)?);
        smearings.push((d, f));
    }

    let k = modes.len();
    let alpha = DMatrix::from_fn(split.len(), k, |p, m| alphas[p][m]);
    let gram = &alpha * alpha.adjoint();
    let sigma: Vec<f64> = (0..split.len()).map(|p| gram[(p, p)].re.max(0.0).sqrt()).collect();

    let mut device_bins = Vec::with_capacity(plan.devices.len());
    let mut device_sigma = Vec::with_capacity(plan.devices.len());
    for (d, dev) in plan.devices.iter().enumerate() {
        let ps = &device_parts[d];
        let var: f64 = ps.iter().flat_map(|&p| ps.iter().map(move |&q| (p, q))).map(|(p, q)| gram[(p, q)].re).sum();
        let s = var.max(0.0).sqrt();
        let part_s: Vec<f64> = ps.iter().map(|&p| sigma[p]).collect();
        device_sigma.push(s);
        let scale = dev.composition.scale(&part_s, s);
        device_bins.push(dev.bins.resolve(nonzero_scale(scale, dev.id())?)?);
    }

    let mut parts = Vec::with_capacity(split.len());
    for ((part, (d, smearing)), &s) in split.into_iter().zip(smearings).zip(&sigma) {
        let dev = &plan.devices[d];
        let spec = dev.part_bins.unwrap_or(dev.bins);
        let scale = if s > 0.0 { s } else { device_sigma[d] };
        let bins = spec.resolve(nonzero_scale(scale, &part.part_id)?)?;
        parts.push(PreparedPart { part, device: d, smearing, sigma: s, bins });
    }

    let n = parts.len();
    let unrelated: Vec<Vec<bool>> =
        (0..n).map(|p| (0..n).map(|q| p != q && parts_spacelike(&parts[p].part, &parts[q].part)).collect()).collect();

    let representation = build_representation(plan, &modes, &alpha, &parts, &unrelated)?;
    Ok(PreparedPlan {
        plan: plan.clone(),
        modes,
        parts,
        layers,
        device_parts,
        device_bins,
        device_sigma,
        gram,
        unrelated,
        representation,
    })
}

fn nonzero_scale(s: f64, id: &str) -> Result<f64, RulesError> {
    if s > 0.0 && s.is_finite() {
        Ok(s)
    } else {
        Err(RulesError::InvalidPlan(format!("`{id}` has zero field variance; its smearing misses every lattice site")))
    }
}
