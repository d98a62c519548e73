//! Light-cone precedence, device splitting and layering in 1+1 dimensions.
//!
//! Regions are spatial intervals at a single lab time. Forward cones are
//! closed, so a null boundary counts as causally connected. When a device is
//! cut by a cone boundary, the boundary point goes to the piece inside the
//! cone and the outside piece is open at that end.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for comparing interval endpoints.
const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("region `{0}` is degenerate: x_lo must be below x_hi and t finite")]
    DegenerateRegion(String),
    #[error("duplicate device id `{0}`")]
    DuplicateDevice(String),
    #[error("precedence relation contains a cycle through `{0}`")]
    CycleDetected(String),
    #[error("parts `{0}` and `{1}` share a layer but are not spacelike separated")]
    LayerNotSpacelike(String, String),
}

/// A device's spacetime extent: an interval at one lab time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub device_id: String,
    pub t: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Region {
    pub fn new(device_id: impl Into<String>, t: f64, x_lo: f64, x_hi: f64) -> Result<Self, GeometryError> {
        let device_id = device_id.into();
        if !(t.is_finite() && x_lo.is_finite() && x_hi.is_finite()) || x_lo >= x_hi {
            return Err(GeometryError::DegenerateRegion(device_id));
        }
        Ok(Self { device_id, t, x_lo, x_hi })
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    fn span(&self) -> Span {
        Span::closed(self.x_lo, self.x_hi)
    }
}

/// An interval with explicit endpoint closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Span {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo - tol } else { x > self.lo + tol };
        let below = if self.hi_closed { x <= self.hi + tol } else { x < self.hi - tol };
        above && below
    }

    /// True if `self` lies inside the closed interval `[lo, hi]`.
    fn within(&self, lo: f64, hi: f64) -> bool {
        self.lo >= lo - EDGE_TOL && self.hi <= hi + EDGE_TOL
    }

    /// True if `self` meets the closed interval `[lo, hi]` in more than a point
    /// that `self` excludes.
    fn meets(&self, lo: f64, hi: f64) -> bool {
        if self.hi < lo - EDGE_TOL || self.lo > hi + EDGE_TOL {
            return false;
        }
        if (self.hi - lo).abs() <= EDGE_TOL && !self.hi_closed {
            return false;
        }
        if (self.lo - hi).abs() <= EDGE_TOL && !self.lo_closed {
            return false;
        }
        true
    }
}

/// Spatial section at `t_query` of the closed forward cone of `r`.
///
/// Returns `None` unless `t_query` is strictly later than `r.t`.
pub fn forward_cone_section(r: &Region, t_query: f64) -> Option<(f64, f64)> {
    let dt = t_query - r.t;
    (dt > 0.0).then_some((r.x_lo - dt, r.x_hi + dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precedence {
    Full,
    Partial,
    None,
}

/// Light-cone precedence of `a` over `b`.
pub fn precedes(a: &Region, b: &Region) -> Precedence {
    span_precedence(a.t, a.span(), b.t, b.span())
}

fn span_precedence(ta: f64, a: Span, tb: f64, b: Span) -> Precedence {
    let dt = tb - ta;
    if dt <= 0.0 {
        return Precedence::None;
    }
    let (lo, hi) = (a.lo - dt, a.hi + dt);
    // An open endpoint of `a` pulls the cone boundary in by an excluded point.
    let cone = Span { lo, hi, lo_closed: a.lo_closed, hi_closed: a.hi_closed };
    if b.within(cone.lo, cone.hi) && endpoint_ok(&b, &cone) {
        Precedence::Full
    } else if b.meets(cone.lo, cone.hi) && touching_ok(&b, &cone) {
        Precedence::Partial
    } else {
        Precedence::None
    }
}

/// `b` inside `cone` also requires shared endpoints to be included by the cone.
fn endpoint_ok(b: &Span, cone: &Span) -> bool {
    let lo_ok = !((b.lo - cone.lo).abs() <= EDGE_TOL && b.lo_closed && !cone.lo_closed);
    let hi_ok = !((b.hi - cone.hi).abs() <= EDGE_TOL && b.hi_closed && !cone.hi_closed);
    lo_ok && hi_ok
}

/// A single shared boundary point only counts if both sides include it.
fn touching_ok(b: &Span, cone: &Span) -> bool {
    if (b.lo - cone.hi).abs() <= EDGE_TOL {
        return b.lo_closed && cone.hi_closed;
    }
    if (b.hi - cone.lo).abs() <= EDGE_TOL {
        return b.hi_closed && cone.lo_closed;
    }
    true
}

/// A causally homogeneous fragment of a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePart {
    pub part_id: String,
    pub parent: String,
    pub t: f64,
    pub span: Span,
    pub predecessors: BTreeSet<String>,
}

impl DevicePart {
    pub fn x_lo(&self) -> f64 {
        self.span.lo
    }

    pub fn x_hi(&self) -> f64 {
        self.span.hi
    }
}

/// Precedence between two parts, honouring open endpoints.
pub fn part_precedence(a: &DevicePart, b: &DevicePart) -> Precedence {
    span_precedence(a.t, a.span, b.t, b.span)
}

/// True if neither part can influence the other.
pub fn parts_spacelike(a: &DevicePart, b: &DevicePart) -> bool {
    part_precedence(a, b) == Precedence::None && part_precedence(b, a) == Precedence::None
}

/// Splits every device into parts that lie wholly inside or wholly outside
/// the forward cone of every part of every earlier device.
pub fn split_devices(regions: &[Region]) -> Result<Vec<DevicePart>, GeometryError> {
    let mut seen = BTreeSet::new();
    for r in regions {
        if !seen.insert(r.device_id.as_str()) {
            return Err(GeometryError::DuplicateDevice(r.device_id.clone()));
        }
        Region::new(r.device_id.clone(), r.t, r.x_lo, r.x_hi)?;
    }

    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&i, &j| regions[i].t.total_cmp(&regions[j].t).then(i.cmp(&j)));

    let mut done: Vec<DevicePart> = Vec::new();
    let mut by_device: BTreeMap<usize, Vec<DevicePart>> = BTreeMap::new();
    for &i in &order {
        let r = &regions[i];
        let earlier: Vec<&DevicePart> = done.iter().filter(|p| p.t < r.t).collect();

        let mut pieces = vec![r.span()];
        for p in &earlier {
            let dt = r.t - p.t;
            let (lo, hi) = (p.span.lo - dt, p.span.hi + dt);
            pieces = pieces
                .into_iter()
                .flat_map(|s| cut(s, lo, p.span.lo_closed, true))
                .flat_map(|s| cut(s, hi, p.span.hi_closed, false))
                .collect();
        }

        let mut parts: Vec<DevicePart> = pieces
            .into_iter()
            .map(|span| {
                let mut part = DevicePart {
                    part_id: String::new(),
                    parent: r.device_id.clone(),
                    t: r.t,
                    span,
                    predecessors: BTreeSet::new(),
                };
                part.predecessors = earlier
                    .iter()
                    .filter(|p| part_precedence(p, &part) == Precedence::Full)
                    .map(|p| p.part_id.clone())
                    .collect();
                part
            })
            .collect();
        parts.sort_by(|a, b| {
            a.predecessors.len().cmp(&b.predecessors.len()).then(a.span.lo.total_cmp(&b.span.lo))
        });
        let single = parts.len() == 1;
        for (n, part) in parts.iter_mut().enumerate() {
            part.part_id = if single { r.device_id.clone() } else { format!("{}{}", r.device_id, n + 1) };
        }
        done.extend(parts.iter().cloned());
        by_device.insert(i, parts);
    }

    Ok(by_device.into_values().flatten().collect())
}

/// Cuts `s` at a cone boundary `x`. `is_left_edge` tells whether the cone
/// interior lies to the right of `x`. The boundary point stays with the
/// inside piece; zero-width pieces are never produced.
fn cut(s: Span, x: f64, cone_closed: bool, is_left_edge: bool) -> Vec<Span> {
    if x <= s.lo + EDGE_TOL || x >= s.hi - EDGE_TOL {
        return vec![s];
    }
    // inside-closed unless the generating part excluded that endpoint
    let inside_gets_point = cone_closed;
    let (left_closed_hi, right_closed_lo) = if is_left_edge {
        (!inside_gets_point, inside_gets_point)
    } else {
        (inside_gets_point, !inside_gets_point)
    };
    vec![
        Span { lo: s.lo, hi: x, lo_closed: s.lo_closed, hi_closed: left_closed_hi },
        Span { lo: x, hi: s.hi, lo_closed: right_closed_lo, hi_closed: s.hi_closed },
    ]
}

/// The intrinsic option sets S^1, S^2, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalLayers {
    pub layers: Vec<Vec<String>>,
}

impl CausalLayers {
    /// Layer index of every part.
    pub fn depth_of(&self) -> BTreeMap<&str, usize> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().map(move |p| (p.as_str(), i)))
            .collect()
    }
}

/// Longest-path layering of the part precedence relation.
pub fn layer_parts(parts: &[DevicePart]) -> Result<CausalLayers, GeometryError> {
    let index: BTreeMap<&str, usize> = parts.iter().enumerate().map(|(i, p)| (p.part_id.as_str(), i)).collect();
    let mut depth: Vec<Option<usize>> = vec![None; parts.len()];

    fn visit(
        i: usize,
        parts: &[DevicePart],
        index: &BTreeMap<&str, usize>,
        depth: &mut [Option<usize>],
        stack: &mut Vec<bool>,
    ) -> Result<usize, GeometryError> {
        if let Some(d) = depth[i] {
            return Ok(d);
        }
        if stack[i] {
            return Err(GeometryError::CycleDetected(parts[i].part_id.clone()));
        }
        stack[i] = true;
        let mut d = 0;
        for pred in &parts[i].predecessors {
            if let Some(&j) = index.get(pred.as_str()) {
                d = d.max(visit(j, parts, index, depth, stack)? + 1);
            }
        }
        stack[i] = false;
        depth[i] = Some(d);
        Ok(d)
    }

    let mut stack = vec![false; parts.len()];
    for i in 0..parts.len() {
        visit(i, parts, &index, &mut depth, &mut stack)?;
    }

    let n_layers = depth.iter().flatten().max().map_or(0, |d| d + 1);
    let mut layers = vec![Vec::new(); n_layers];
    for (p, d) in parts.iter().zip(&depth) {
        layers[d.expect("all parts visited")].push(p.part_id.clone());
    }

    for layer in &layers {
        for (a, pa) in layer.iter().enumerate() {
            for pb in &layer[a + 1..] {
                let (x, y) = (&parts[index[pa.as_str()]], &parts[index[pb.as_str()]]);
                if !parts_spacelike(x, y) {
                    return Err(GeometryError::LayerNotSpacelike(pa.clone(), pb.clone()));
                }
            }
        }
    }
    Ok(CausalLayers { layers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub device_id: Option<String>,
    pub message: String,
}

/// Warns when a cone section over the scenario's time span would wrap the
/// periodic box.
pub fn validate_arrangement(regions: &[Region], box_length: f64) -> Vec<Diagnostic> {
    let Some(t_min) = regions.iter().map(|r| r.t).min_by(f64::total_cmp) else {
        return Vec::new();
    };
    let t_max = regions.iter().map(|r| r.t).max_by(f64::total_cmp).unwrap_or(t_min);
    let span = t_max - t_min;
    regions
        .iter()
        .filter_map(|r| {
            let width = r.width() + 2.0 * span;
            (width > box_length / 2.0).then(|| Diagnostic {
                device_id: Some(r.device_id.clone()),
                message: format!(
                    "cone of `{}` spans {width} over time span {span}, above half the box length {}",
                    r.device_id,
                    box_length / 2.0
                ),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorkin() -> Vec<Region> {
        vec![
            Region::new("A", 0.0, -4.0, -3.0).unwrap(),
            Region::new("B", 2.0, -2.0, 2.0).unwrap(),
            Region::new("C", 3.0, 2.5, 3.5).unwrap(),
        ]
    }

    #[test]
    fn cone_sections() {
        let r = Region::new("a", 0.0, -4.0, -3.0).unwrap();
        assert_eq!(forward_cone_section(&r, 2.0), Some((-6.0, -1.0)));
        let r = Region::new("a", 5.0, 0.0, 1.0).unwrap();
        assert_eq!(forward_cone_section(&r, 5.0), None);
        let r = Region::new("a", 0.0, 0.0, 1.0).unwrap();
        assert_eq!(forward_cone_section(&r, 1.0), Some((-1.0, 2.0)));
    }

    #[test]
    fn precedence_examples() {
        let r = sorkin();
        assert_eq!(precedes(&r[0], &r[1]), Precedence::Partial);
        assert_eq!(precedes(&r[0], &r[2]), Precedence::None);
        let a = Region::new("a", 0.0, 0.0, 1.0).unwrap();
        let b = Region::new("b", 0.0, 0.0, 1.0).unwrap();
        assert_eq!(precedes(&a, &b), Precedence::None);
        let b = Region::new("b", 5.0, 0.0, 1.0).unwrap();
        assert_eq!(precedes(&a, &b), Precedence::Full);
    }

    #[test]
    fn sorkin_split() {
        let parts = split_devices(&sorkin()).unwrap();
        let ids: Vec<&str> = parts.iter().map(|p| p.part_id.as_str()).collect();
        assert_eq!(ids, ["A", "B1", "B2", "C1", "C2"]);
        let b1 = &parts[1];
        assert_eq!((b1.x_lo(), b1.x_hi(), b1.span.lo_closed), (-1.0, 2.0, false));
        let b2 = &parts[2];
        assert_eq!((b2.x_lo(), b2.x_hi(), b2.span.hi_closed), (-2.0, -1.0, true));
        assert_eq!(b2.predecessors.iter().collect::<Vec<_>>(), ["A"]);
        let c1 = &parts[3];
        assert_eq!((c1.x_lo(), c1.span.lo_closed), (3.0, false));
        assert!(c1.predecessors.is_empty());
        let c2 = &parts[4];
        assert_eq!(c2.predecessors.iter().collect::<Vec<_>>(), ["B1"]);
    }

    #[test]
    fn sorkin_layers() {
        let layers = layer_parts(&split_devices(&sorkin()).unwrap()).unwrap();
        assert_eq!(layers.layers, vec![vec!["A", "B1", "C1"], vec!["B2", "C2"]]);
    }

    #[test]
    fn single_and_full_chain() {
        let one = split_devices(&[Region::new("X", 0.0, 0.0, 1.0).unwrap()]).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].predecessors.is_empty());

        let chain = [
            Region::new("a", 0.0, 0.0, 1.0).unwrap(),
            Region::new("b", 2.0, 0.0, 1.0).unwrap(),
            Region::new("c", 4.0, 0.0, 1.0).unwrap(),
        ];
        let parts = split_devices(&chain).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[1].predecessors.iter().collect::<Vec<_>>(), ["a"]);
        let layers = layer_parts(&parts).unwrap();
        assert_eq!(layers.layers, vec![vec!["a"], vec!["b"], vec!["c"]]);
    }

    #[test]
    fn all_spacelike_single_layer() {
        let regs = [
            Region::new("a", 0.0, 0.0, 1.0).unwrap(),
            Region::new("b", 1.0, 5.0, 6.0).unwrap(),
            Region::new("c", 0.5, -9.0, -8.0).unwrap(),
        ];
        let layers = layer_parts(&split_devices(&regs).unwrap()).unwrap();
        assert_eq!(layers.layers.len(), 1);
        assert_eq!(layers.layers[0].len(), 3);
    }

    #[test]
    fn point_contact_does_not_split() {
        // cone of `a` at t=1 is [-1, 2]; `b` touches it only at x=2
        let regs = [Region::new("a", 0.0, 0.0, 1.0).unwrap(), Region::new("b", 1.0, 2.0, 3.0).unwrap()];
        let parts = split_devices(&regs).unwrap();
        assert_eq!(parts.len(), 2);
        assert!(parts[1].predecessors.is_empty());
    }

    #[test]
    fn degenerate_and_duplicate() {
        assert!(matches!(Region::new("a", 0.0, 1.0, 1.0), Err(GeometryError::DegenerateRegion(_))));
        let r = Region { device_id: "a".into(), t: 0.0, x_lo: 0.0, x_hi: 1.0 };
        assert!(matches!(split_devices(&[r.clone(), r]), Err(GeometryError::DuplicateDevice(_))));
    }

    #[test]
    fn arrangement_warnings() {
        let regs = [Region::new("a", 0.0, 0.0, 1.0).unwrap(), Region::new("b", 4.0, 3.0, 4.0).unwrap()];
        assert!(validate_arrangement(&regs, 64.0).is_empty());
        let regs = [Region::new("a", 0.0, 0.0, 1.0).unwrap(), Region::new("b", 40.0, 3.0, 4.0).unwrap()];
        assert!(!validate_arrangement(&regs, 64.0).is_empty());
        assert!(validate_arrangement(&[], 64.0).is_empty());
    }
}
