//! Versioned JSON scenarios and the commands that run them.
//!
//! Parsing happens in stages so every failure has a precise kind: malformed
//! JSON is a [`ScenarioError::Parse`] with a line and column, a wrong
//! `schema_version` is [`ScenarioError::SchemaVersionMismatch`], and type or
//! semantic problems are collected into one [`ScenarioError::Validation`].

mod run;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytic::AnalyticError;
use crate::geometry::{validate_arrangement, Region};
use crate::lattice::{build_mode_table, high_k_fraction, LatticeSpec, Profile, SmearingFunction};
use crate::rules::{
    BinSpec, Composition, DeviceSpec, FrameConfig, InitialState, MeasurementPlan, Rule, RulesError, Tolerances,
};

pub use run::{
    kernel_table, run_audit, run_kernels, run_order, run_simulate, run_validate, Check, KernelRow, RunOptions,
    ValidationReport,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema_version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: String, expected: u32 },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("unacknowledged warnings (pass --acknowledge-warnings):\n  - {}", .0.join("\n  - "))]
    Warnings(Vec<String>),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("numerical tolerance breach: {0}")]
    Tolerance(String),
}

impl ScenarioError {
    /// 2 for input problems, 3 for numerical tolerance breaches, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => 1,
            Self::Parse { .. } | Self::SchemaVersionMismatch { .. } | Self::Validation(_) | Self::Warnings(_) => 2,
            Self::Tolerance(_) => 3,
            Self::Analytic(_) => 3,
            Self::Rules(e) => match e {
                RulesError::TieGroupNotCommuting(..)
                | RulesError::LayerCommutationViolation(..)
                | RulesError::CompositionBinMismatch(_)
                | RulesError::Fock(crate::fock::FockError::ModeLeakage { .. })
                | RulesError::Fock(crate::fock::FockError::IncompleteFamily(_))
                | RulesError::Fock(crate::fock::FockError::NotHermitian(_))
                | RulesError::NotAProjector(_) => 3,
                _ => 2,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub n_sites: usize,
    pub spacing: f64,
    pub mass: f64,
    /// Required for `mass = 0`.
    #[serde(default)]
    pub exclude_zero_mode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub id: String,
    pub t: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub smearing: Profile,
    pub bins: BinSpec,
    #[serde(default)]
    pub part_bins: Option<BinSpec>,
    #[serde(default = "yes")]
    pub selective: bool,
    #[serde(default = "linear")]
    pub composition: Composition,
}

fn yes() -> bool {
    true
}

fn linear() -> Composition {
    Composition::Linear
}

fn standard() -> Rule {
    Rule::Standard
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditPair {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub description: String,
    pub lattice: LatticeConfig,
    pub basis: FrameConfig,
    pub devices: Vec<DeviceConfig>,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default = "standard")]
    pub rule: Rule,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub audit: Option<AuditPair>,
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    match value.get("schema_version") {
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => {}
        Some(v) => return Err(ScenarioError::SchemaVersionMismatch { found: v.to_string(), expected: SCHEMA_VERSION }),
        None => return Err(ScenarioError::Validation(vec!["missing field `schema_version`".into()])),
    }
    let scenario: Scenario =
        serde_json::from_value(value).map_err(|e| ScenarioError::Validation(vec![e.to_string()]))?;
    let violations = scenario.violations();
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Validation(violations))
    }
}

impl Scenario {
    fn lattice_spec(&self) -> Option<LatticeSpec> {
        LatticeSpec::new(self.lattice.n_sites, self.lattice.spacing, self.lattice.mass).ok()
    }

    /// Every semantic problem, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let l = &self.lattice;
        if l.n_sites == 0 || !l.n_sites.is_multiple_of(2) {
            out.push(format!("lattice.n_sites must be a positive even integer, got {}", l.n_sites));
        }
        if !(l.spacing > 0.0 && l.spacing.is_finite()) {
            out.push(format!("lattice.spacing must be positive, got {}", l.spacing));
        }
        if !(l.mass >= 0.0 && l.mass.is_finite()) {
            out.push(format!("lattice.mass must be non-negative, got {}", l.mass));
        }
        if l.mass == 0.0 && !l.exclude_zero_mode {
            out.push("lattice.mass is 0: set lattice.exclude_zero_mode to drop the zero mode".into());
        }
        if self.basis.n_max == 0 {
            out.push("basis.n_max must be at least 1".into());
        }
        if self.basis.quadrature_nodes == Some(0) {
            out.push("basis.quadrature_nodes must be at least 1".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("epsilon_max", t.epsilon_max),
            ("mode_leakage", t.mode_leakage),
            ("high_k_warn", t.high_k_warn),
            ("signaling_c", t.signaling_c),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("tolerances.{name} must be positive, got {v}"));
            }
        }

        let spec = self.lattice_spec();
        let modes = spec.as_ref().and_then(|s| build_mode_table(s, l.exclude_zero_mode).ok());
        let known = |n: &i64| modes.as_ref().is_none_or(|m| m.position(*n).is_some());
        if let Some(active) = &self.basis.active_modes {
            if active.is_empty() {
                out.push("basis.active_modes must not be empty".into());
            }
            for n in active.iter().filter(|n| !known(n)) {
                out.push(format!("basis.active_modes: mode {n} is not on the lattice"));
            }
        }
        if let InitialState::Excitation { modes: ex } = &self.initial_state {
            for n in ex.iter().filter(|n| !known(n)) {
                out.push(format!("initial_state.modes: mode {n} is not on the lattice"));
            }
            if ex.len() > self.basis.n_max {
                out.push(format!("initial_state has {} quanta but basis.n_max is {}", ex.len(), self.basis.n_max));
            }
        }

        let mut ids = BTreeSet::new();
        for (i, d) in self.devices.iter().enumerate() {
            let name = if d.id.is_empty() { format!("devices[{i}]") } else { format!("device `{}`", d.id) };
            if d.id.is_empty() {
                out.push(format!("{name}: id must not be empty"));
            } else if !ids.insert(d.id.as_str()) {
                out.push(format!("{name}: duplicate id"));
            }
            if Region::new(d.id.clone(), d.t, d.x_lo, d.x_hi).is_err() {
                out.push(format!("{name}: needs finite t and x_lo < x_hi"));
            }
            for (field, b) in [("bins", Some(&d.bins)), ("part_bins", d.part_bins.as_ref())] {
                let Some(b) = b else { continue };
                if b.n_bins == 0 {
                    out.push(format!("{name}: {field}.n_bins must be at least 1"));
                }
                if b.n_bins >= 3 && !(b.delta_max > 0.0 && b.delta_max.is_finite()) {
                    out.push(format!("{name}: {field}.delta_max must be positive"));
                }
            }
            if let Some(spec) = &spec {
                match SmearingFunction::from_profile(d.id.clone(), &d.smearing, d.x_lo, d.x_hi, spec) {
                    Ok(f) if f.is_zero() => out.push(format!("{name}: smearing vanishes on every lattice site")),
                    Ok(_) => {}
                    Err(e) => out.push(format!("{name}: smearing: {e}")),
                }
            }
        }
        if let Some(a) = &self.audit {
            for id in [&a.source, &a.target] {
                if !ids.contains(id.as_str()) {
                    out.push(format!("audit refers to unknown device `{id}`"));
                }
            }
        }
        out
    }

    /// Arrangement and smoothness warnings that need acknowledgement.
    pub fn warnings(&self) -> Vec<String> {
        let Some(spec) = self.lattice_spec() else { return Vec::new() };
        let regions: Vec<Region> = self.regions();
        let mut out: Vec<String> =
            validate_arrangement(&regions, spec.box_length()).into_iter().map(|d| d.message).collect();
        if let Ok(modes) = build_mode_table(&spec, self.lattice.exclude_zero_mode) {
            for d in &self.devices {
                let Ok(f) = SmearingFunction::from_profile(d.id.clone(), &d.smearing, d.x_lo, d.x_hi, &spec) else {
                    continue;
                };
                if let Ok(frac) = high_k_fraction(&f, &modes) {
                    if frac > self.tolerances.high_k_warn {
                        out.push(format!(
                            "device `{}`: {:.1}% of the smearing weight sits in the top third of |k|",
                            d.id,
                            100.0 * frac
                        ));
                    }
                }
            }
        }
        out
    }

    fn regions(&self) -> Vec<Region> {
        self.devices.iter().map(|d| Region { device_id: d.id.clone(), t: d.t, x_lo: d.x_lo, x_hi: d.x_hi }).collect()
    }

    /// Builds the measurement plan, optionally under a different rule.
    pub fn plan(&self, rule: Option<Rule>) -> Result<MeasurementPlan, ScenarioError> {
        let violations = self.violations();
        if !violations.is_empty() {
            return Err(ScenarioError::Validation(violations));
        }
        let lattice = LatticeSpec::new(self.lattice.n_sites, self.lattice.spacing, self.lattice.mass)
            .map_err(|e| ScenarioError::Validation(vec![e.to_string()]))?;
        let mut devices = Vec::with_capacity(self.devices.len());
        for d in &self.devices {
            let region = Region::new(d.id.clone(), d.t, d.x_lo, d.x_hi).map_err(RulesError::from)?;
            let smearing = SmearingFunction::from_profile(d.id.clone(), &d.smearing, d.x_lo, d.x_hi, &lattice)
                .map_err(RulesError::from)?;
            devices.push(DeviceSpec {
                region,
                smearing,
                bins: d.bins,
                part_bins: d.part_bins,
                selective: d.selective,
                composition: d.composition,
            });
        }
        Ok(MeasurementPlan {
            lattice,
            exclude_zero_mode: self.lattice.exclude_zero_mode,
            frame: self.basis.clone(),
            devices,
            initial: self.initial_state.clone(),
            rule: rule.unwrap_or(self.rule),
            tolerances: self.tolerances,
        })
    }

    /// The scenario with every default filled in, as pretty JSON.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of [`Scenario::resolved_json`].
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.resolved_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "lattice": {"n_sites": 32, "spacing": 0.25, "mass": 1.0},
        "basis": {"n_max": 4},
        "devices": [
            {"id": "A", "t": 0.0, "x_lo": -1.0, "x_hi": 1.0,
             "smearing": {"profile": "bump", "center": 0.0, "width": 2.0},
             "bins": {"n_bins": 4, "delta_max": 1.0}}
        ]
    }"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let s = parse_scenario_str(MINIMAL).unwrap();
        assert_eq!(s.rule, Rule::Standard);
        assert!(s.devices[0].selective);
        assert_eq!(s.devices[0].composition, Composition::Linear);
        let again = parse_scenario_str(&s.resolved_json()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.sha256(), s.sha256());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_scenario_str("{\n  \"schema_version\": 1,\n  oops\n}").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 3, .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn schema_version_checked() {
        let text = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(parse_scenario_str(&text), Err(ScenarioError::SchemaVersionMismatch { .. })));
    }

    #[test]
    fn missing_mass_is_named() {
        let text = MINIMAL.replace(", \"mass\": 1.0", "");
        match parse_scenario_str(&text) {
            Err(ScenarioError::Validation(v)) => assert!(v[0].contains("mass"), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_composition_rejected() {
        let text = MINIMAL.replace("\"bins\": {", "\"composition\": \"cubic\", \"bins\": {");
        match parse_scenario_str(&text) {
            Err(ScenarioError::Validation(v)) => assert!(v[0].contains("cubic"), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_violations_listed() {
        let text = MINIMAL
            .replace("\"n_sites\": 32", "\"n_sites\": 31")
            .replace("\"x_lo\": -1.0, \"x_hi\": 1.0", "\"x_lo\": 1.0, \"x_hi\": -1.0");
        match parse_scenario_str(&text) {
            Err(ScenarioError::Validation(v)) => {
                assert!(v.iter().any(|m| m.contains("n_sites")), "{v:?}");
                assert!(v.iter().any(|m| m.contains("x_lo < x_hi")), "{v:?}");
            }
            other => panic!("{other:?}"),
        }
    }
}
