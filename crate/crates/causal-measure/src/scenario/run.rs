use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::{Scenario, ScenarioError, SCHEMA_VERSION};
use crate::analytic::{kernels, AnalyticError};
use crate::fock::BinPartition;
use crate::geometry::{layer_parts, split_devices, Region};
use crate::lattice::build_mode_table;
use crate::rules::{
    cutoff_residual, prepare, rule_table, signaling_audit, table_with, total_variation, Composition, Nonselective,
    OutcomeTable, PreparedPlan, Rule, RulesError, SignalingReport, TableOptions,
};

/// Floor under `c * epsilon_trunc` for floating-point roundoff in TV sums.
const ROUNDOFF_FLOOR: f64 = 1e-12;
/// Largest acceptable vacuum-quadrature Kolmogorov distance at the chosen cutoff.
pub const CUTOFF_RESIDUAL_MAX: f64 = 0.25;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Overrides the scenario's rule.
    pub rule: Option<Rule>,
    pub acknowledge_warnings: bool,
    /// Audit pair; the scenario's `audit` block is used when absent.
    pub source: Option<String>,
    pub target: Option<String>,
}

struct Emitter<'a> {
    dir: &'a Path,
    sha: String,
    written: Vec<PathBuf>,
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

impl<'a> Emitter<'a> {
    fn new(dir: &'a Path, scenario: &Scenario) -> Result<Self, ScenarioError> {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut em = Self { dir, sha: scenario.sha256(), written: Vec::new() };
        em.write("scenario.resolved.json", scenario.resolved_json() + "\n")?;
        Ok(em)
    }

    fn write(&mut self, name: &str, body: String) -> Result<(), ScenarioError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), ScenarioError> {
        let mut buf = format!("# schema_version: {SCHEMA_VERSION}\n# scenario_sha256: {}\n", self.sha).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let fail = |e: csv::Error| ScenarioError::Io { path: name.into(), message: e.to_string() };
            w.write_record(header).map_err(fail)?;
            for r in rows {
                w.write_record(r).map_err(fail)?;
            }
            w.flush().map_err(|e| io(Path::new(name), e))?;
        }
        self.write(name, String::from_utf8(buf).expect("csv output is utf-8"))
    }

    fn json(&mut self, name: &str, mut body: serde_json::Value) -> Result<(), ScenarioError> {
        body["schema_version"] = json!(SCHEMA_VERSION);
        body["scenario_sha256"] = json!(self.sha);
        self.write(name, serde_json::to_string_pretty(&body).expect("report serializes") + "\n")
    }
}

fn io(path: &Path, e: std::io::Error) -> ScenarioError {
    ScenarioError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn require_acknowledged(s: &Scenario, opts: &RunOptions) -> Result<(), ScenarioError> {
    let w = s.warnings();
    if w.is_empty() || opts.acknowledge_warnings {
        Ok(())
    } else {
        Err(ScenarioError::Warnings(w))
    }
}

fn regions(s: &Scenario) -> Vec<Region> {
    s.regions()
}

/// Device parts and their causal layers.
pub fn run_order(s: &Scenario, opts: &RunOptions) -> Result<Vec<PathBuf>, ScenarioError> {
    require_acknowledged(s, opts)?;
    let parts = split_devices(&regions(s)).map_err(RulesError::from)?;
    let layers = layer_parts(&parts).map_err(RulesError::from)?;
    let depth = layers.depth_of();
    let mut em = Emitter::new(&opts.out, s)?;
    let header: Vec<String> =
        ["part_id", "device_id", "layer", "t", "x_lo", "x_hi", "lo_closed", "hi_closed", "predecessors"]
            .map(String::from)
            .to_vec();
    let rows: Vec<Vec<String>> = parts
        .iter()
        .map(|p| {
            vec![
                p.part_id.clone(),
                p.parent.clone(),
                (depth[p.part_id.as_str()] + 1).to_string(),
                num(p.t),
                num(p.x_lo()),
                num(p.x_hi()),
                p.span.lo_closed.to_string(),
                p.span.hi_closed.to_string(),
                p.predecessors.iter().cloned().collect::<Vec<_>>().join(" "),
            ]
        })
        .collect();
    em.csv("order.csv", &header, &rows)?;
    em.json("order.json", json!({ "layers": layers.layers, "parts": parts }))?;
    Ok(em.written)
}

fn bin_rows(b: &BinPartition) -> Vec<(f64, f64, f64)> {
    (0..b.n_bins)
        .map(|i| {
            let (lo, hi) = b.interval(i);
            (lo, hi, b.representative(i))
        })
        .collect()
}

fn check_table(t: &OutcomeTable) -> Result<(), ScenarioError> {
    let total = t.total();
    if (total - 1.0).abs() > 1e-8 {
        return Err(ScenarioError::Tolerance(format!("{} table sums to {total}", t.rule)));
    }
    if t.min() < -1e-10 {
        return Err(ScenarioError::Tolerance(format!("{} table has entry {}", t.rule, t.min())));
    }
    Ok(())
}

/// Joint and marginal outcome tables under the chosen rule.
pub fn run_simulate(s: &Scenario, opts: &RunOptions) -> Result<(OutcomeTable, Vec<PathBuf>), ScenarioError> {
    require_acknowledged(s, opts)?;
    let pp = prepare(&s.plan(opts.rule)?)?;
    let table = rule_table(&pp, pp.plan.rule)?;
    let mut em = Emitter::new(&opts.out, s)?;

    let mut header = table.devices.clone();
    header.push("probability".into());
    let rows: Vec<Vec<String>> = table
        .probabilities
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r: Vec<String> = table.labels(i).iter().map(|l| l.to_string()).collect();
            r.push(num(*p));
            r
        })
        .collect();
    em.csv("outcomes.csv", &header, &rows)?;

    let mut marg_rows = Vec::new();
    let mut marginals = serde_json::Map::new();
    for id in &table.devices {
        let d = pp.device_index(id)?;
        let m = table.marginal(id).expect("device in table");
        for (i, ((lo, hi, rep), p)) in bin_rows(&pp.device_bins[d]).into_iter().zip(&m).enumerate() {
            marg_rows.push(vec![id.clone(), i.to_string(), num(lo), num(hi), num(rep), num(*p)]);
        }
        marginals.insert(id.clone(), json!({ "edges": pp.device_bins[d].edges, "probabilities": m }));
    }
    let header = ["device_id", "bin", "lo", "hi", "representative", "probability"].map(String::from).to_vec();
    em.csv("marginals.csv", &header, &marg_rows)?;
    em.json("report.json", json!({ "table": table, "marginals": marginals }))?;
    check_table(&table)?;
    Ok((table, em.written))
}

fn audit_pair(s: &Scenario, opts: &RunOptions) -> Result<(String, String), ScenarioError> {
    match (&opts.source, &opts.target, &s.audit) {
        (Some(x), Some(y), _) => Ok((x.clone(), y.clone())),
        (None, None, Some(a)) => Ok((a.source.clone(), a.target.clone())),
        _ => Err(ScenarioError::Validation(vec![
            "audit needs both --source and --target, or an `audit` block in the scenario".into(),
        ])),
    }
}

/// Total-variation signaling report for one device pair.
pub fn run_audit(s: &Scenario, opts: &RunOptions) -> Result<(SignalingReport, Vec<PathBuf>), ScenarioError> {
    require_acknowledged(s, opts)?;
    let (x, y) = audit_pair(s, opts)?;
    let pp = prepare(&s.plan(opts.rule)?)?;
    let report = signaling_audit(&pp, pp.plan.rule, &x, &y)?;
    let mut em = Emitter::new(&opts.out, s)?;
    let d = pp.device_index(&y)?;
    let rows: Vec<Vec<String>> = bin_rows(&pp.device_bins[d])
        .into_iter()
        .enumerate()
        .map(|(i, (lo, hi, _))| {
            vec![i.to_string(), num(lo), num(hi), num(report.with_source[i]), num(report.without_source[i])]
        })
        .collect();
    let header = ["bin", "lo", "hi", "with_source", "without_source"].map(String::from).to_vec();
    em.csv("audit.csv", &header, &rows)?;
    em.json(
        "audit.json",
        json!({ "report": report, "within_bound": report.total_variation <= report.bound.max(ROUNDOFF_FLOOR) }),
    )?;
    Ok((report, em.written))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value <= threshold, value, threshold, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn table_checks(pp: &PreparedPlan, rule: Rule, checks: &mut Vec<Check>) -> Option<OutcomeTable> {
    match rule_table(pp, rule) {
        Ok(t) => {
            checks.push(Check::at_most(format!("normalization/{rule}"), (t.total() - 1.0).abs(), 1e-8, "|sum - 1|"));
            checks.push(Check::at_most(format!("nonnegativity/{rule}"), -t.min(), 1e-10, "-min entry"));
            Some(t)
        }
        Err(e) => {
            checks.push(Check {
                name: format!("table/{rule}"),
                passed: false,
                value: f64::NAN,
                threshold: f64::NAN,
                detail: e.to_string(),
            });
            None
        }
    }
}

/// Runs the invariant suite at scenario scale.
pub fn run_validate(s: &Scenario, opts: &RunOptions) -> Result<(ValidationReport, Vec<PathBuf>), ScenarioError> {
    let mut checks = Vec::new();
    let warnings = s.warnings();
    checks.push(Check {
        name: "arrangement_warnings".into(),
        passed: warnings.is_empty() || opts.acknowledge_warnings,
        value: warnings.len() as f64,
        threshold: 0.0,
        detail: warnings.join("; "),
    });
    if !s.devices.is_empty() {
        suite(s, opts, &mut checks)?;
    }
    let report = ValidationReport { passed: checks.iter().all(|c| c.passed), checks };
    let mut em = Emitter::new(&opts.out, s)?;
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| vec![c.name.clone(), c.passed.to_string(), num(c.value), num(c.threshold), c.detail.clone()])
        .collect();
    let header = ["check", "passed", "value", "threshold", "detail"].map(String::from).to_vec();
    em.csv("validate.csv", &header, &rows)?;
    em.json("validate.json", json!({ "report": report }))?;
    Ok((report, em.written))
}

fn suite(s: &Scenario, opts: &RunOptions, checks: &mut Vec<Check>) -> Result<(), ScenarioError> {
    let pp = prepare(&s.plan(opts.rule)?)?;
    let tol = pp.plan.tolerances;
    let diag = crate::rules::diagnostics(&pp);
    checks.push(Check::at_most("epsilon_trunc", diag.epsilon_trunc, tol.epsilon_max, "unrelated parts"));
    checks.push(Check::at_most("epsilon_layer", diag.epsilon_layer, tol.epsilon_max, "same-layer parts"));
    checks.push(Check::at_most(
        "cutoff_residual",
        cutoff_residual(diag.n_max),
        CUTOFF_RESIDUAL_MAX,
        format!("vacuum quadrature Kolmogorov distance at n_max={}", diag.n_max),
    ));
    checks.push(Check::at_most("mode_leakage", diag.max_discarded_weight, tol.mode_leakage, "discarded Parseval weight"));

    let standard = table_checks(&pp, Rule::Standard, checks);
    let intrinsic = table_checks(&pp, Rule::Intrinsic, checks);
    if let (Some(a), Some(b), false) = (&standard, &intrinsic, pp.is_split()) {
        checks.push(Check::at_most("rule_coincidence", a.max_difference(b), 1e-9, "no device is split"));
    }

    let split_linear = (0..pp.plan.devices.len())
        .any(|d| pp.device_parts[d].len() > 1 && pp.plan.devices[d].composition == Composition::Linear);
    if let (Some(a), true) = (&standard, split_linear) {
        let exact = TableOptions { exact_linear: true, ..Default::default() };
        match table_with(&pp, Rule::Intrinsic, &exact) {
            Ok(b) => checks.push(Check::at_most(
                "linear_coincidence",
                total_variation(&a.probabilities, &b.probabilities),
                (tol.signaling_c * diag.epsilon_trunc).max(ROUNDOFF_FLOOR),
                "standard vs intrinsic with exact linear composition",
            )),
            Err(RulesError::NotGatherable(..)) => {}
            Err(e) => checks.push(Check {
                name: "linear_coincidence".into(),
                passed: false,
                value: f64::NAN,
                threshold: f64::NAN,
                detail: e.to_string(),
            }),
        }
    }

    if pp.plan.devices.iter().any(|d| !d.selective) {
        let rule = pp.plan.rule;
        let l = table_with(&pp, rule, &TableOptions::default());
        let b = table_with(&pp, rule, &TableOptions { nonselective: Nonselective::Branch, ..Default::default() });
        if let (Ok(l), Ok(b)) = (l, b) {
            checks.push(Check::at_most("lueders_vs_branch", l.max_difference(&b), 1e-10, rule.to_string()));
        }
    }

    let n = pp.plan.devices.len();
    for x in 0..n {
        for y in 0..n {
            let (xi, yi) = (pp.plan.devices[x].id(), pp.plan.devices[y].id());
            match signaling_audit(&pp, Rule::Intrinsic, xi, yi) {
                Ok(r) => checks.push(Check::at_most(
                    format!("no_signaling/{xi}->{yi}"),
                    r.total_variation,
                    r.bound.max(ROUNDOFF_FLOOR),
                    format!("TV <= {} * epsilon_trunc", tol.signaling_c),
                )),
                Err(RulesError::NotSpacelike(..)) => {}
                Err(e) => checks.push(Check {
                    name: format!("no_signaling/{xi}->{yi}"),
                    passed: false,
                    value: f64::NAN,
                    threshold: f64::NAN,
                    detail: e.to_string(),
                }),
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    pub mode: i64,
    pub k: f64,
    pub omega: f64,
    pub t: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c_abs: Option<f64>,
    pub caustic: bool,
}

/// Kernel coefficients for every active mode at every device time.
pub fn kernel_table(s: &Scenario) -> Result<Vec<KernelRow>, ScenarioError> {
    let plan = s.plan(None)?;
    let modes = build_mode_table(&plan.lattice, plan.exclude_zero_mode).map_err(RulesError::from)?;
    let modes = match &s.basis.active_modes {
        Some(active) => modes.restricted(active).expect("active modes validated"),
        None => modes,
    };
    let mut times: Vec<f64> = s.devices.iter().map(|d| d.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut rows = Vec::new();
    for &t in &times {
        for m in &modes.modes {
            let row = match kernels(m.omega, t) {
                Ok(kp) => KernelRow {
                    mode: m.n,
                    k: m.k,
                    omega: m.omega,
                    t,
                    a: Some(kp.a),
                    b: Some(kp.b),
                    c_abs: Some(kp.c_abs),
                    caustic: false,
                },
                Err(AnalyticError::CausticSingularity { .. }) => {
                    KernelRow { mode: m.n, k: m.k, omega: m.omega, t, a: None, b: None, c_abs: None, caustic: true }
                }
                Err(e) => return Err(e.into()),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn run_kernels(s: &Scenario, opts: &RunOptions) -> Result<Vec<PathBuf>, ScenarioError> {
    let rows = kernel_table(s)?;
    let mut em = Emitter::new(&opts.out, s)?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.mode.to_string(),
                num(r.k),
                num(r.omega),
                num(r.t),
                opt(r.a),
                opt(r.b),
                opt(r.c_abs),
                r.caustic.to_string(),
            ]
        })
        .collect();
    let header = ["mode", "k", "omega", "t", "A", "B", "C_abs", "caustic"].map(String::from).to_vec();
    em.csv("kernels.csv", &header, &body)?;
    Ok(em.written)
}
