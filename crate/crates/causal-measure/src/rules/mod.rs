//! Outcome probabilities under lab-time (standard) and light-cone layer
//! (intrinsic) ordering, and signaling audits between spacelike devices.

mod engine;
mod frame;
mod plan;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::fock::{BinPartition, FockBasis, FockError};
use crate::geometry::{parts_spacelike, GeometryError};
use crate::lattice::LatticeError;
use crate::{CMatrix, MaxAbs};

pub use engine::{joint_eigenbasis, run, Measurement, Nonselective, Program};
pub use frame::{gauss_hermite, Representation};
pub use plan::{
    prepare, BinScale, BinSpec, Composition, DeviceSpec, FrameConfig, FrameKind, InitialState, MeasurementPlan,
    PreparedPart, PreparedPlan, Rule, Tolerances,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RulesError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("projector {0} in the sequence is not an orthogonal projector")]
    NotAProjector(usize),
    #[error("devices `{0}` and `{1}` share a lab time but their normalized commutator is {2:.3e}")]
    TieGroupNotCommuting(String, String, f64),
    #[error("same-layer parts `{0}` and `{1}` have normalized commutator {2:.3e} above epsilon_max {3}")]
    LayerCommutationViolation(String, String, f64, f64),
    #[error("composed value {0} falls outside every device bin")]
    CompositionBinMismatch(f64),
    #[error("devices `{0}` and `{1}` are not spacelike separated")]
    NotSpacelike(String, String),
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("device `{0}` needs linear composition")]
    NotLinear(String),
    #[error("parts of `{0}` do not commute in a frame with classical noise")]
    NoisyNonCommuting(String),
    #[error("part `{0}` cannot join its device's first part: it is causally related to `{1}` in between")]
    NotGatherable(String, String),
    #[error("{nodes} quadrature nodes exceed the cap {cap}")]
    TooManyNodes { nodes: f64, cap: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// Truncation and representation metrics attached to every table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationDiagnostics {
    pub frame_requested: FrameKind,
    pub frame: FrameKind,
    pub fock_modes: usize,
    pub fock_dimension: usize,
    pub n_max: usize,
    pub classical_rank: usize,
    pub quadrature_nodes: usize,
    /// Largest normalized commutator between causally unrelated parts,
    /// taking the larger of the full lattice value and the represented value.
    pub epsilon_trunc: f64,
    /// Same maximum restricted to parts sharing a layer.
    pub epsilon_layer: f64,
    /// Largest normalized lattice commutator between causally unrelated parts.
    pub microcausality_residual: f64,
    /// Largest normalized represented commutator between causally unrelated parts.
    pub representation_residual: f64,
    /// Kolmogorov distance between a truncated vacuum quadrature and its Gaussian.
    pub cutoff_residual: f64,
    pub max_discarded_weight: f64,
    pub notes: Vec<String>,
}

/// Kolmogorov distance between the spectral measure of the truncated
/// `(a + a^dagger) / sqrt 2` in the vacuum and `N(0, 1/2)`.
pub fn cutoff_residual(n_max: usize) -> f64 {
    let n = n_max + 1;
    let j = DMatrix::from_fn(n, n, |r, c| if r + 1 == c || c + 1 == r { (r.max(c) as f64 / 2.0).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(j);
    let mut nodes: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let gauss = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let mut cum = 0.0;
    let mut worst: f64 = 0.0;
    for (x, w) in nodes {
        let g = gauss.cdf(x);
        worst = worst.max((g - cum).abs());
        cum += w;
        worst = worst.max((g - cum).abs());
    }
    worst
}

pub fn diagnostics(pp: &PreparedPlan) -> TruncationDiagnostics {
    let rep = &pp.representation;
    let depth = pp.layers.depth_of();
    let n = pp.parts.len();
    let (mut eps, mut eps_layer, mut micro, mut repr) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in 0..n {
        for q in p + 1..n {
            if !pp.unrelated[p][q] {
                continue;
            }
            let s = pp.parts[p].sigma * pp.parts[q].sigma;
            if s == 0.0 {
                continue;
            }
            let lat = pp.lattice_commutator(p, q).abs() / s;
            let rc = rep.commutator(p, q).abs() / s;
            micro = micro.max(lat);
            repr = repr.max(rc);
            eps = eps.max(lat.max(rc));
            if depth[pp.parts[p].part.part_id.as_str()] == depth[pp.parts[q].part.part_id.as_str()] {
                eps_layer = eps_layer.max(lat.max(rc));
            }
        }
    }
    TruncationDiagnostics {
        frame_requested: rep.requested,
        frame: rep.kind,
        fock_modes: rep.n_modes(),
        fock_dimension: rep.dimension(),
        n_max: rep.basis.n_max(),
        classical_rank: rep.rank,
        quadrature_nodes: rep.n_nodes(),
        epsilon_trunc: eps,
        epsilon_layer: eps_layer,
        microcausality_residual: micro,
        representation_residual: repr,
        cutoff_residual: cutoff_residual(rep.basis.n_max()),
        max_discarded_weight: rep.max_discarded_weight,
        notes: rep.notes.clone(),
    }
}

/// Joint outcome probabilities of the selective devices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeTable {
    pub rule: Rule,
    pub devices: Vec<String>,
    pub n_bins: Vec<usize>,
    /// Row-major over `devices`.
    pub probabilities: Vec<f64>,
    pub diagnostics: TruncationDiagnostics,
}

impl OutcomeTable {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.probabilities.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn marginal(&self, device: &str) -> Option<Vec<f64>> {
        let pos = self.devices.iter().position(|d| d == device)?;
        let inner: usize = self.n_bins[pos + 1..].iter().product();
        let mut out = vec![0.0; self.n_bins[pos]];
        for (i, p) in self.probabilities.iter().enumerate() {
            out[(i / inner) % self.n_bins[pos]] += p;
        }
        Some(out)
    }

    /// Bin indices of flat entry `i`.
    pub fn labels(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_bins.len()];
        for (slot, &n) in self.n_bins.iter().enumerate().rev() {
            out[slot] = i % n;
            i /= n;
        }
        out
    }

    /// Largest entrywise difference to a table over the same devices.
    pub fn max_difference(&self, other: &OutcomeTable) -> f64 {
        self.probabilities.iter().zip(&other.probabilities).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Half the L1 distance.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `Tr[P_n ... P_1 rho P_1 ... P_n]`.
pub fn wigner_probability(rho: &CMatrix, projectors: &[CMatrix]) -> Result<f64, RulesError> {
    let d = rho.nrows();
    let mut m = CMatrix::identity(d, d);
    for (i, p) in projectors.iter().enumerate() {
        if (p * p - p).max_abs() > 1e-8 || (p - p.adjoint()).max_abs() > 1e-8 {
            return Err(RulesError::NotAProjector(i));
        }
        m = p * m;
    }
    Ok((&m * rho * m.adjoint()).trace().re)
}

/// Device bin of `f` evaluated on part-bin representatives.
pub fn compose_outcomes(composition: Composition, parts: &[(&BinPartition, usize)], device: &BinPartition) -> usize {
    let values: Vec<f64> = parts.iter().map(|(b, i)| b.representative(*i)).collect();
    device.bin_of(composition.apply(&values))
}

/// Options for a single table evaluation.
#[derive(Debug, Clone, Default)]
pub struct TableOptions {
    /// Overrides the selective flag of every device.
    pub selective: Option<Vec<bool>>,
    /// Device whose steps are skipped.
    pub skip: Option<usize>,
    pub nonselective: Nonselective,
    /// Intrinsic rule only: explicit part order, which must respect the layers.
    pub part_order: Option<Vec<usize>>,
    /// Intrinsic rule only: a split Linear device is measured once, on the sum
    /// of its exact part values, at the position of its first part.
    pub exact_linear: bool,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Device(usize),
    Part(usize),
}

fn selective_flags(pp: &PreparedPlan, opts: &TableOptions) -> Vec<bool> {
    let mut flags = opts.selective.clone().unwrap_or_else(|| pp.plan.devices.iter().map(|d| d.selective).collect());
    if let Some(s) = opts.skip {
        flags[s] = false;
    }
    flags
}

fn normalized(pp: &PreparedPlan, p: usize, q: usize, c: f64) -> f64 {
    let s = pp.parts[p].sigma * pp.parts[q].sigma;
    if s == 0.0 {
        0.0
    } else {
        c.abs() / s
    }
}

/// Pushes one stage group, naming the device whose measurement cannot be formed.
fn push_group(pp: &PreparedPlan, program: &mut Program, group: &[Measurement], devices: &[usize]) -> Result<(), RulesError> {
    program
        .push(&pp.representation, group)
        .map_err(|i| RulesError::NoisyNonCommuting(pp.plan.devices[devices[i]].id().to_string()))
}

fn finish(pp: &PreparedPlan, rule: Rule, flags: &[bool], probabilities: Vec<f64>) -> OutcomeTable {
    let devices: Vec<usize> = (0..flags.len()).filter(|&d| flags[d]).collect();
    OutcomeTable {
        rule,
        devices: devices.iter().map(|&d| pp.plan.devices[d].id().to_string()).collect(),
        n_bins: devices.iter().map(|&d| pp.device_bins[d].n_bins).collect(),
        probabilities,
        diagnostics: diagnostics(pp),
    }
}

/// Whole devices in lab-time order, ties in file order.
pub fn standard_rule_table(pp: &PreparedPlan) -> Result<OutcomeTable, RulesError> {
    table_with(pp, Rule::Standard, &TableOptions::default())
}

/// Device parts layer by layer, device outcomes composed from part outcomes.
pub fn intrinsic_rule_table(pp: &PreparedPlan) -> Result<OutcomeTable, RulesError> {
    table_with(pp, Rule::Intrinsic, &TableOptions::default())
}

pub fn rule_table(pp: &PreparedPlan, rule: Rule) -> Result<OutcomeTable, RulesError> {
    table_with(pp, rule, &TableOptions::default())
}

pub fn table_with(pp: &PreparedPlan, rule: Rule, opts: &TableOptions) -> Result<OutcomeTable, RulesError> {
    let flags = selective_flags(pp, opts);
    let probabilities = match rule {
        Rule::Standard => standard_probabilities(pp, &flags, opts)?,
        Rule::Intrinsic => intrinsic_probabilities(pp, &flags, opts)?,
    };
    Ok(finish(pp, rule, &flags, probabilities))
}

fn standard_probabilities(pp: &PreparedPlan, flags: &[bool], opts: &TableOptions) -> Result<Vec<f64>, RulesError> {
    let devs = &pp.plan.devices;
    let mut order: Vec<usize> = (0..devs.len()).filter(|&d| Some(d) != opts.skip).collect();
    order.sort_by(|&a, &b| devs[a].region.t.total_cmp(&devs[b].region.t).then(a.cmp(&b)));

    let eps_max = pp.plan.tolerances.epsilon_max;
    for (i, &a) in order.iter().enumerate() {
        for &b in &order[i + 1..] {
            if devs[a].region.t != devs[b].region.t {
                continue;
            }
            for &p in &pp.device_parts[a] {
                for &q in &pp.device_parts[b] {
                    let r = normalized(pp, p, q, pp.representation.commutator(p, q));
                    if r > eps_max {
                        return Err(RulesError::TieGroupNotCommuting(devs[a].id().into(), devs[b].id().into(), r));
                    }
                }
            }
        }
    }

    let slot_of: Vec<Option<usize>> = {
        let mut next = 0;
        flags
            .iter()
            .map(|&f| {
                f.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let mut program = Program::new((0..devs.len()).filter(|&d| flags[d]).map(|d| pp.device_bins[d].n_bins).collect());
    // a tie group shares one lab time
    for tie in order.chunk_by(|&a, &b| devs[a].region.t == devs[b].region.t) {
        let group: Vec<Measurement> = tie
            .iter()
            .map(|&d| Measurement {
                fields: pp.device_parts[d].clone(),
                composition: devs[d].composition,
                bins: pp.device_bins[d].clone(),
                record: slot_of[d],
            })
            .collect();
        push_group(pp, &mut program, &group, tie)?;
    }
    Ok(run(&program, &pp.representation, opts.nonselective))
}

fn layer_order(pp: &PreparedPlan, opts: &TableOptions) -> Result<Vec<usize>, RulesError> {
    let depth = pp.layers.depth_of();
    let layer_of = |p: usize| depth[pp.parts[p].part.part_id.as_str()];
    match &opts.part_order {
        None => Ok(pp
            .layers
            .layers
            .iter()
            .flatten()
            .map(|id| pp.part_index(id).expect("layered parts exist"))
            .collect()),
        Some(order) => {
            let mut seen = order.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != pp.parts.len() || order.len() != pp.parts.len() || seen.last() != pp.parts.len().checked_sub(1).as_ref() {
                return Err(RulesError::InvalidPlan("part order must list every part once".into()));
            }
            if order.windows(2).any(|w| layer_of(w[0]) > layer_of(w[1])) {
                return Err(RulesError::InvalidPlan("part order must respect the causal layers".into()));
            }
            Ok(order.clone())
        }
    }
}

/// Joint outcomes of single-part devices and of the parts of split devices.
struct PartTable {
    raw: Vec<f64>,
    slot_bins: Vec<usize>,
    part_slot: Vec<Option<usize>>,
    /// Devices recorded with device bins.
    device_level: Vec<bool>,
}

impl PartTable {
    fn decode(&self, mut i: usize, labels: &mut [usize]) {
        for s in (0..self.slot_bins.len()).rev() {
            labels[s] = i % self.slot_bins[s];
            i /= self.slot_bins[s];
        }
    }
}

fn part_table(pp: &PreparedPlan, flags: &[bool], opts: &TableOptions) -> Result<PartTable, RulesError> {
    let diag = diagnostics(pp);
    if diag.epsilon_layer > pp.plan.tolerances.epsilon_max {
        let depth = pp.layers.depth_of();
        let worst = (0..pp.parts.len())
            .flat_map(|p| (0..pp.parts.len()).map(move |q| (p, q)))
            .filter(|&(p, q)| {
                p < q && depth[pp.parts[p].part.part_id.as_str()] == depth[pp.parts[q].part.part_id.as_str()]
            })
            .max_by(|&(a, b), &(c, d)| {
                let r1 = normalized(pp, a, b, pp.lattice_commutator(a, b)).max(normalized(pp, a, b, pp.representation.commutator(a, b)));
                let r2 = normalized(pp, c, d, pp.lattice_commutator(c, d)).max(normalized(pp, c, d, pp.representation.commutator(c, d)));
                r1.total_cmp(&r2)
            })
            .expect("a violation needs a pair");
        return Err(RulesError::LayerCommutationViolation(
            pp.parts[worst.0].part.part_id.clone(),
            pp.parts[worst.1].part.part_id.clone(),
            diag.epsilon_layer,
            pp.plan.tolerances.epsilon_max,
        ));
    }

    let devs = &pp.plan.devices;
    let gathered: Vec<bool> = (0..devs.len())
        .map(|d| opts.exact_linear && pp.device_parts[d].len() > 1 && devs[d].composition == Composition::Linear)
        .collect();
    let mut slots = Vec::new();
    let mut part_slot = vec![None; pp.parts.len()];
    for d in (0..devs.len()).filter(|&d| flags[d]) {
        let ps = &pp.device_parts[d];
        if ps.len() == 1 || gathered[d] {
            for &p in ps {
                part_slot[p] = Some(slots.len());
            }
            slots.push(Slot::Device(d));
        } else {
            for &p in ps {
                part_slot[p] = Some(slots.len());
                slots.push(Slot::Part(p));
            }
        }
    }
    let slot_bins: Vec<usize> = slots
        .iter()
        .map(|s| match *s {
            Slot::Device(d) => pp.device_bins[d].n_bins,
            Slot::Part(p) => pp.parts[p].bins.n_bins,
        })
        .collect();

    let mut program = Program::new(slot_bins);
    let depth = pp.layers.depth_of();
    let order: Vec<usize> =
        layer_order(pp, opts)?.into_iter().filter(|&p| Some(pp.parts[p].device) != opts.skip).collect();
    let leads = gathered_leads(pp, &order, &gathered)?;
    for layer in order.chunk_by(|&p, &q| {
        depth[pp.parts[p].part.part_id.as_str()] == depth[pp.parts[q].part.part_id.as_str()]
    }) {
        let mut group = Vec::new();
        let mut devices = Vec::new();
        for &p in layer {
            let d = pp.parts[p].device;
            let m = if gathered[d] {
                if leads[d] != Some(p) {
                    continue;
                }
                Measurement {
                    fields: pp.device_parts[d].clone(),
                    composition: Composition::Linear,
                    bins: pp.device_bins[d].clone(),
                    record: part_slot[p],
                }
            } else if pp.device_parts[d].len() == 1 {
                Measurement { fields: vec![p], composition: devs[d].composition, bins: pp.device_bins[d].clone(), record: part_slot[p] }
            } else {
                Measurement { fields: vec![p], composition: Composition::Linear, bins: pp.parts[p].bins.clone(), record: part_slot[p] }
            };
            group.push(m);
            devices.push(d);
        }
        push_group(pp, &mut program, &group, &devices)?;
    }
    let raw = run(&program, &pp.representation, opts.nonselective);
    let device_level = (0..devs.len()).map(|d| pp.device_parts[d].len() == 1 || gathered[d]).collect();
    Ok(PartTable { raw, slot_bins: program.slot_bins().to_vec(), part_slot, device_level })
}

/// First part of every gathered device, after checking that each later part
/// may move up to it: it must be unrelated to every part it passes.
fn gathered_leads(pp: &PreparedPlan, order: &[usize], gathered: &[bool]) -> Result<Vec<Option<usize>>, RulesError> {
    let mut leads = vec![None; gathered.len()];
    for (i, &p) in order.iter().enumerate() {
        let d = pp.parts[p].device;
        if !gathered[d] || leads[d].is_some() {
            continue;
        }
        leads[d] = Some(p);
        for (j, &q) in order.iter().enumerate().skip(i + 1) {
            if pp.parts[q].device != d {
                continue;
            }
            if let Some(&r) = order[i + 1..j].iter().find(|&&r| pp.parts[r].device != d && !pp.unrelated[q][r]) {
                return Err(RulesError::NotGatherable(pp.parts[q].part.part_id.clone(), pp.parts[r].part.part_id.clone()));
            }
        }
    }
    Ok(leads)
}

fn intrinsic_probabilities(pp: &PreparedPlan, flags: &[bool], opts: &TableOptions) -> Result<Vec<f64>, RulesError> {
    let table = part_table(pp, flags, opts)?;
    let devs = &pp.plan.devices;
    let selective: Vec<usize> = (0..devs.len()).filter(|&d| flags[d]).collect();
    let dev_bins: Vec<usize> = selective.iter().map(|&d| pp.device_bins[d].n_bins).collect();
    let mut out = vec![0.0; dev_bins.iter().product()];
    let part_slot = &table.part_slot;
    let mut labels = vec![0usize; table.slot_bins.len()];
    for (i, &prob) in table.raw.iter().enumerate() {
        if prob == 0.0 {
            continue;
        }
        table.decode(i, &mut labels);
        let mut index = 0;
        for &d in &selective {
            let ps = &pp.device_parts[d];
            let bin = if table.device_level[d] {
                labels[part_slot[ps[0]].expect("selective slot")]
            } else {
                let parts: Vec<(&BinPartition, usize)> =
                    ps.iter().map(|&p| (&pp.parts[p].bins, labels[part_slot[p].expect("selective slot")])).collect();
                compose_outcomes(devs[d].composition, &parts, &pp.device_bins[d])
            };
            index = index * pp.device_bins[d].n_bins + bin;
        }
        out[index] += prob;
    }
    Ok(out)
}

/// Range of `composition` over a box of part intervals.
fn composed_range(composition: Composition, boxes: &[(f64, f64)]) -> (f64, f64) {
    match composition {
        Composition::Linear => boxes.iter().fold((0.0, 0.0), |(l, h), (a, b)| (l + a, h + b)),
        Composition::SumOfSquares => boxes.iter().fold((0.0, 0.0), |(l, h), &(a, b)| {
            let lo = if a <= 0.0 && b >= 0.0 { 0.0 } else { (a * a).min(b * b) };
            (l + lo, h + (a * a).max(b * b))
        }),
        Composition::Product => boxes.iter().fold((1.0, 1.0), |(l, h), &(a, b)| {
            let c = [l * a, l * b, h * a, h * b];
            if c.iter().any(|v| v.is_nan()) {
                return (f64::NEG_INFINITY, f64::INFINITY);
            }
            (c.iter().copied().fold(f64::INFINITY, f64::min), c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        }),
    }
}

/// Intrinsic-rule probability, per split selective device, of part outcomes
/// whose composed value range straddles a device bin edge.
///
/// Outside these outcomes the composed bin equals the bin of the exact
/// composed value, so the sum over devices bounds the binning error of a table.
pub fn composition_ambiguity(pp: &PreparedPlan) -> Result<Vec<(String, f64)>, RulesError> {
    let flags = selective_flags(pp, &TableOptions::default());
    let table = part_table(pp, &flags, &TableOptions::default())?;
    let split: Vec<usize> = (0..flags.len()).filter(|&d| flags[d] && pp.device_parts[d].len() > 1).collect();
    let mut mass = vec![0.0; split.len()];
    let mut labels = vec![0usize; table.slot_bins.len()];
    for (i, &prob) in table.raw.iter().enumerate() {
        table.decode(i, &mut labels);
        for (k, &d) in split.iter().enumerate() {
            let boxes: Vec<(f64, f64)> = pp.device_parts[d]
                .iter()
                .map(|&p| pp.parts[p].bins.interval(labels[table.part_slot[p].expect("selective part")]))
                .collect();
            let (lo, hi) = composed_range(pp.plan.devices[d].composition, &boxes);
            if pp.device_bins[d].edges.iter().any(|&e| lo < e && e < hi) {
                mass[k] += prob;
            }
        }
    }
    Ok(split.iter().zip(mass).map(|(&d, m)| (pp.plan.devices[d].id().to_string(), m)).collect())
}

/// Y's outcome distribution with X measured nonselectively versus X absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalingReport {
    pub source: String,
    pub target: String,
    pub rule: Rule,
    pub total_variation: f64,
    pub epsilon_trunc: f64,
    /// `signaling_c * epsilon_trunc`.
    pub bound: f64,
    pub with_source: Vec<f64>,
    pub without_source: Vec<f64>,
    pub diagnostics: TruncationDiagnostics,
}

pub fn signaling_audit(pp: &PreparedPlan, rule: Rule, source: &str, target: &str) -> Result<SignalingReport, RulesError> {
    let (x, y) = (pp.device_index(source)?, pp.device_index(target)?);
    let spacelike = x != y
        && pp.device_parts[x]
            .iter()
            .all(|&p| pp.device_parts[y].iter().all(|&q| parts_spacelike(&pp.parts[p].part, &pp.parts[q].part)));
    if !spacelike {
        return Err(RulesError::NotSpacelike(source.into(), target.into()));
    }
    let mut selective = vec![false; pp.plan.devices.len()];
    selective[y] = true;
    let with = table_with(pp, rule, &TableOptions { selective: Some(selective.clone()), ..Default::default() })?;
    let without = table_with(pp, rule, &TableOptions { selective: Some(selective), skip: Some(x), ..Default::default() })?;
    let (a, b) = (with.probabilities, without.probabilities);
    let diagnostics = with.diagnostics;
    Ok(SignalingReport {
        source: source.into(),
        target: target.into(),
        rule,
        total_variation: total_variation(&a, &b),
        epsilon_trunc: diagnostics.epsilon_trunc,
        bound: pp.plan.tolerances.signaling_c * diagnostics.epsilon_trunc,
        with_source: a,
        without_source: b,
        diagnostics,
    })
}

/// Mismatch between a device projector and the composed part projectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizationResidual {
    /// `max_c ||P_c - sum_{c1+c2 in c} P_c1 P_c2||`.
    pub operator_norm: f64,
    /// Vacuum probability carried by eigenvectors assigned to different bins.
    pub vacuum_weighted: f64,
}

/// Compares the device interval projectors of a linear device with the
/// midpoint-composed products of its part projectors.
///
/// Same-time parts have a real Gram matrix, so a real orthonormal frame
/// writes every part as a combination of position quadratures. The parts
/// then commute exactly after truncation and both sides are diagonal in one
/// basis; the residual is pure binning error.
pub fn part_factorization_check(
    pp: &PreparedPlan,
    device: &str,
    part_bins: Option<&[BinPartition]>,
) -> Result<FactorizationResidual, RulesError> {
    let d = pp.device_index(device)?;
    let dev = &pp.plan.devices[d];
    if dev.composition != Composition::Linear {
        return Err(RulesError::NotLinear(device.into()));
    }
    let ps = &pp.device_parts[d];
    let bins: Vec<BinPartition> = match part_bins {
        Some(b) if b.len() == ps.len() => b.to_vec(),
        Some(_) => return Err(RulesError::InvalidPlan("one part partition per part".into())),
        None => ps.iter().map(|&p| pp.parts[p].bins.clone()).collect(),
    };
    if ps.len() == 1 && bins[0] == pp.device_bins[d] {
        return Ok(FactorizationResidual { operator_norm: 0.0, vacuum_weighted: 0.0 });
    }

    let g = DMatrix::from_fn(ps.len(), ps.len(), |i, j| pp.gram[(ps[i], ps[j])].re);
    let eig = SymmetricEigen::new(g.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let keep: Vec<usize> = (0..ps.len()).filter(|&i| eig.eigenvalues[i] > 1e-12 * top).collect();
    let basis = FockBasis::abstract_modes(keep.len(), pp.plan.frame.n_max, pp.plan.frame.dimension_cap)?;
    let ops: Vec<CMatrix> = (0..ps.len())
        .map(|i| {
            let coeffs: Vec<Complex64> = keep
                .iter()
                .map(|&m| Complex64::new(eig.eigenvectors[(i, m)] * eig.eigenvalues[m].sqrt(), 0.0))
                .collect();
            crate::fock::quadrature(&basis, &coeffs)
        })
        .collect();
    let (v, values) = joint_eigenbasis(&ops).ok_or_else(|| RulesError::NoisyNonCommuting(device.into()))?;
    let dim = basis.dimension();
    let mut mismatched = 0.0;
    let mut any = false;
    for i in 0..dim {
        let actual: f64 = values.iter().map(|v| v[i]).sum();
        let radius = values.iter().map(|v| v[i].abs()).sum::<f64>();
        let exact = pp.device_bins[d].bin_of_snapped(actual, crate::fock::edge_snap(radius));
        let parts: Vec<(&BinPartition, usize)> = bins
            .iter()
            .zip(&values)
            .map(|(b, v)| (b, b.bin_of_snapped(v[i], crate::fock::edge_snap(v[i].abs()))))
            .collect();
        let composed = compose_outcomes(Composition::Linear, &parts, &pp.device_bins[d]);
        if exact != composed {
            any = true;
            mismatched += v[(0, i)].norm_sqr();
        }
    }
    Ok(FactorizationResidual { operator_norm: if any { 1.0 } else { 0.0 }, vacuum_weighted: mismatched })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::bin_partition;

    #[test]
    fn composition_examples() {
        let b = bin_partition(1.0, 4).unwrap();
        let dev = bin_partition(10.0, 22).unwrap();
        let p = bin_partition(1.0, 6).unwrap();
        // parts at midpoints 0.5 and -0.5
        let (i, j) = (p.bin_of(0.6), p.bin_of(-0.6));
        assert_eq!((p.representative(i), p.representative(j)), (0.75, -0.75));
        let k = compose_outcomes(Composition::Linear, &[(&b, 2), (&b, 1)], &dev);
        assert_eq!(k, dev.bin_of(0.0));
        let two = bin_partition(4.0, 10).unwrap();
        assert_eq!((two.representative(6), two.representative(7)), (1.5, 2.5));
        let k = compose_outcomes(Composition::Product, &[(&two, 6), (&two, 7)], &dev);
        assert_eq!(k, dev.bin_of(3.75));
    }

    #[test]
    fn wigner_basics() {
        let d = 3;
        let rho = CMatrix::from_fn(d, d, |i, j| Complex64::new(if i == j { 1.0 / 3.0 } else { 0.0 }, 0.0));
        let id = CMatrix::identity(d, d);
        assert!((wigner_probability(&rho, &[id.clone(), id.clone()]).unwrap() - 1.0).abs() < 1e-15);
        let mut p = CMatrix::zeros(d, d);
        p[(0, 0)] = Complex64::new(1.0, 0.0);
        assert!((wigner_probability(&rho, &[p.clone()]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let half = &id * Complex64::new(0.5, 0.0);
        assert_eq!(wigner_probability(&rho, &[half]), Err(RulesError::NotAProjector(0)));
    }

    #[test]
    fn cutoff_residual_shrinks() {
        let r: Vec<f64> = [1, 3, 7, 15].iter().map(|&n| cutoff_residual(n)).collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
        assert!(r[0] > 0.3);
    }

    #[test]
    fn tv_distance() {
        assert_eq!(total_variation(&[0.5, 0.5], &[1.0, 0.0]), 0.5);
        assert_eq!(total_variation(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
    }
}
