#![allow(dead_code)]

use std::path::PathBuf;

use causal_measure::analytic::vacuum_projector_expectation;
use causal_measure::fock::{bin_partition, build_basis, field_operator, spectral_family, BinPartition, StateDensity};
use causal_measure::lattice::{build_mode_table, LatticeSpec, ModeTable, Profile, SmearingFunction};
use causal_measure::rules::{prepare, PreparedPlan, Rule};
use causal_measure::scenario::{parse_scenario, parse_scenario_str, Scenario};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn bundled(name: &str) -> Scenario {
    parse_scenario(scenario_path(name)).expect("bundled scenario parses")
}

pub fn prepared(s: &Scenario, rule: Option<Rule>) -> PreparedPlan {
    prepare(&s.plan(rule).expect("plan")).expect("prepare")
}

/// Edits a bundled scenario through its JSON form.
pub fn edited(name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> Scenario {
    let mut v: serde_json::Value = serde_json::from_str(&bundled(name).resolved_json()).unwrap();
    edit(&mut v);
    parse_scenario_str(&v.to_string()).expect("edited scenario parses")
}

pub fn bump(id: &str, center: f64, width: f64, spec: &LatticeSpec) -> SmearingFunction {
    SmearingFunction::from_profile(id, &Profile::Bump { center, width }, center - width / 2.0, center + width / 2.0, spec)
        .unwrap()
}

/// A one-mode lattice problem: the mode table restricted to mode `n`.
pub struct OneMode {
    pub modes: ModeTable,
    pub f: SmearingFunction,
    pub n: i64,
}

pub fn one_mode(n: i64) -> OneMode {
    let spec = LatticeSpec::new(32, 0.25, 1.0).unwrap();
    let all = build_mode_table(&spec, false).unwrap();
    let f = bump("f", -0.5, 2.0, &spec);
    OneMode { modes: all.restricted(&[n]).unwrap(), f, n }
}

/// Per-bin `Tr[rho P_bin(Phi(f, t))]` in a one-mode Fock space.
pub fn fock_bin_masses(m: &OneMode, n_max: usize, t: f64, bins: &BinPartition, state: impl Fn(&causal_measure::fock::FockBasis) -> StateDensity) -> Vec<f64> {
    let basis = build_basis(&m.modes, &[m.n], n_max, 1 << 20).unwrap();
    let phi = field_operator(&basis, &m.modes, &m.f, t, 1.0).unwrap();
    let rho = state(&basis);
    spectral_family(&phi.operator.matrix, bins).iter().map(|p| rho.expectation(p).re).collect()
}

pub fn analytic_vacuum_masses(m: &OneMode, bins: &BinPartition) -> Vec<f64> {
    (0..bins.n_bins)
        .map(|i| {
            let (lo, hi) = bins.interval(i);
            vacuum_projector_expectation(&m.f, lo, hi, &m.modes).unwrap()
        })
        .collect()
}

pub fn oracle_bins(m: &OneMode) -> BinPartition {
    let sigma = causal_measure::lattice::vacuum_variance(&m.f, &m.modes).unwrap().sqrt();
    bin_partition(3.0 * sigma, 12).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
