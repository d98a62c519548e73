//! One line per acceptance criterion. Exits non-zero on any failure outside
//! `KNOWN_UNATTAINED`; those are printed as FAIL and never counted as passes.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use causal_measure::analytic::{kernels, one_particle_projector_expectation, AnalyticError};
use causal_measure::fock::{bin_partition, build_basis, excitation_state, field_operator, spectral_family, vacuum_density};
use causal_measure::lattice::{build_mode_table, pauli_jordan, vacuum_variance, LatticeSpec, SmearingFunction};
use causal_measure::rules::{
    composition_ambiguity, rule_table, signaling_audit, table_with, total_variation, Rule, TableOptions,
};
use causal_measure::scenario::{run_order, run_simulate, RunOptions};
use causal_measure::{CMatrix, Complex64, MaxAbs};
use common::{analytic_vacuum_masses, bundled, edited, fock_bin_masses, max_abs_diff, one_mode, oracle_bins, prepared};
use serde_json::json;

const KNOWN_UNATTAINED: [u32; 2] = [3, 4];
const C_SIGNAL: f64 = 5.0;
const STANDARD_SUM_OF_SQUARES_TV: f64 = 7.679e-3;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let e = start.elapsed();
    (e < limit, format!("{:.2}s", e.as_secs_f64()))
}

fn c1() -> Outcome {
    let start = Instant::now();
    let c: Vec<f64> = [32usize, 64, 128]
        .iter()
        .map(|&n| {
            let spec = LatticeSpec::new(n, 16.0 / n as f64, 1.0).unwrap();
            let modes = build_mode_table(&spec, false).unwrap();
            let f = common::bump("f", -1.5, 1.0, &spec);
            let g = common::bump("g", 1.5, 1.0, &spec);
            pauli_jordan(&f, 0.0, &g, 1.0, &modes).unwrap().abs()
        })
        .collect();
    let (fast, t) = within(Duration::from_secs(1), start);
    let ok = c[1] < c[0] && c[2] < c[1] && c[2] * 10.0 <= c[0] && fast;
    outcome(ok, format!("|c| at N=32,64,128: {:.3e} {:.3e} {:.3e}; {t}", c[0], c[1], c[2]))
}

fn c2() -> Outcome {
    let start = Instant::now();
    let spec = LatticeSpec::new(8, 0.5, 1.0).unwrap();
    let modes = build_mode_table(&spec, false).unwrap();
    let basis = build_basis(&modes, &[-1, 1], 6, 1 << 16).unwrap();
    let mut s = 0x2545F4914F6CDD1Du64;
    let samples = (0..8)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let f = SmearingFunction::new("r", samples, &spec).unwrap();
    let phi = field_operator(&basis, &modes, &f, 0.4, 1.0).unwrap().operator.matrix;
    let sigma = vacuum_variance(&f, &modes.restricted(&[-1, 1]).unwrap()).unwrap().sqrt();
    let fam = spectral_family(&phi, &bin_partition(3.0 * sigma, 12).unwrap());
    let d = basis.dimension();
    let (mut idem, mut orth) = (0.0f64, 0.0f64);
    let mut sum = CMatrix::zeros(d, d);
    for (i, p) in fam.iter().enumerate() {
        idem = idem.max((p * p - p).max_abs());
        for q in &fam[i + 1..] {
            orth = orth.max((p * q).max_abs());
        }
        sum += p;
    }
    let comp = (sum - CMatrix::identity(d, d)).max_abs();
    let (fast, t) = within(Duration::from_secs(10), start);
    outcome(
        idem < 1e-9 && orth < 1e-9 && comp < 1e-9 && fast,
        format!("D={d} idempotence {idem:.1e} orthogonality {orth:.1e} completeness {comp:.1e}; {t}"),
    )
}

fn schedule_outcome(errors: &[f64], invariant: f64) -> Outcome {
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let ok = decreasing && errors[2] <= 1e-4 && invariant < 1e-10;
    outcome(
        ok,
        format!(
            "max bin error at n_max=4,8,12: {:.3e} {:.3e} {:.3e} (decreasing: {decreasing}, target 1e-4); time drift {invariant:.1e}",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn c3() -> Outcome {
    let m = one_mode(1);
    let bins = oracle_bins(&m);
    let exact = analytic_vacuum_masses(&m, &bins);
    let errors: Vec<f64> =
        [4, 8, 12].iter().map(|&n| max_abs_diff(&fock_bin_masses(&m, n, 0.3, &bins, vacuum_density), &exact)).collect();
    let base = fock_bin_masses(&m, 12, 0.3, &bins, vacuum_density);
    let drift = [0.7, 1.1]
        .iter()
        .map(|&t| max_abs_diff(&base, &fock_bin_masses(&m, 12, t, &bins, vacuum_density)))
        .fold(0.0, f64::max);
    schedule_outcome(&errors, drift)
}

fn c4() -> Outcome {
    let m = one_mode(1);
    let bins = oracle_bins(&m);
    let exact: Vec<f64> = (0..bins.n_bins)
        .map(|i| {
            let (lo, hi) = bins.interval(i);
            one_particle_projector_expectation(&m.f, lo, hi, m.n, &m.modes).unwrap()
        })
        .collect();
    let state = |b: &causal_measure::fock::FockBasis| excitation_state(b, &[vec![Complex64::new(1.0, 0.0)]]).unwrap();
    let errors: Vec<f64> =
        [4, 8, 12].iter().map(|&n| max_abs_diff(&fock_bin_masses(&m, n, 0.3, &bins, state), &exact)).collect();
    let base = fock_bin_masses(&m, 12, 0.3, &bins, state);
    let drift = [0.7, 1.1].iter().map(|&t| max_abs_diff(&base, &fock_bin_masses(&m, 12, t, &bins, state))).fold(0.0, f64::max);
    schedule_outcome(&errors, drift)
}

fn c5() -> Outcome {
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in 0..10 {
        for j in 0..10 {
            let (omega, t) = (0.3 + 0.37 * i as f64, 0.05 + 0.61 * j as f64);
            if let Ok(k) = kernels(omega, t) {
                worst = worst.max((k.b * k.b - k.a * k.a - omega * omega).abs() / (1.0 + k.b * k.b));
                n += 1;
            }
        }
    }
    let caustic = [(1.0, PI), (2.0, 2.0 * PI), (3.0, 0.0)]
        .iter()
        .all(|&(w, t)| matches!(kernels(w, t), Err(AnalyticError::CausticSingularity { .. })));
    outcome(n == 100 && worst <= 1e-10 && caustic, format!("{n} points, relative residual {worst:.1e}, caustics rejected: {caustic}"))
}

fn c6() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let ok = run_order(&bundled("sorkin.json"), &RunOptions { out: dir.path().into(), ..Default::default() }).is_ok();
    let pp = prepared(&bundled("sorkin.json"), None);
    let layers = &pp.layers.layers;
    let want = [vec!["A", "B1", "C1"], vec!["B2", "C2"]];
    outcome(ok && *layers == want, format!("{layers:?}"))
}

fn c7() -> Outcome {
    let start = Instant::now();
    let pp = prepared(&bundled("sorkin.json"), None);
    let r = signaling_audit(&pp, Rule::Intrinsic, "A", "C").unwrap();
    let tv_at = |n: usize| {
        let pp = prepared(&edited("sorkin.json", |v| v["basis"]["n_max"] = json!(n)), None);
        signaling_audit(&pp, Rule::Intrinsic, "A", "C").unwrap().total_variation
    };
    let (tv3, tv5) = (tv_at(3), tv_at(5));
    let (fast, t) = within(Duration::from_secs(300), start);
    let ok = r.total_variation <= C_SIGNAL * r.epsilon_trunc && tv5 <= tv3.max(1e-13) && fast;
    outcome(
        ok,
        format!(
            "TV {:.3e} <= 5 eps = {:.3e}; TV n_max 3 -> 5: {tv3:.2e} -> {tv5:.2e} (floor 1e-13); D={}; {t}",
            r.total_variation,
            C_SIGNAL * r.epsilon_trunc,
            r.diagnostics.fock_dimension
        ),
    )
}

fn c8() -> Outcome {
    let pp = prepared(&bundled("sorkin.json"), None);
    let s = signaling_audit(&pp, Rule::Standard, "A", "C").unwrap().total_variation;
    let i = signaling_audit(&pp, Rule::Intrinsic, "A", "C").unwrap().total_variation;
    let ok = s >= 10.0 * i.max(1e-12) && (s - STANDARD_SUM_OF_SQUARES_TV).abs() < 1e-5;
    outcome(ok, format!("standard TV {s:.4e} (pinned {STANDARD_SUM_OF_SQUARES_TV:.3e}), intrinsic TV {i:.2e}"))
}

fn c9() -> Outcome {
    let pp = prepared(&bundled("sorkin_linear.json"), None);
    let st = rule_table(&pp, Rule::Standard).unwrap();
    let exact = table_with(&pp, Rule::Intrinsic, &TableOptions { exact_linear: true, ..Default::default() }).unwrap();
    let mid = rule_table(&pp, Rule::Intrinsic).unwrap();
    let eps = mid.diagnostics.epsilon_trunc;
    let amb: f64 = composition_ambiguity(&pp).unwrap().iter().map(|(_, m)| m).sum();
    let truncation = total_variation(&st.probabilities, &exact.probabilities);
    let binning = total_variation(&exact.probabilities, &mid.probabilities);
    let tv = total_variation(&st.probabilities, &mid.probabilities);
    let audits: Vec<f64> = [Rule::Standard, Rule::Intrinsic]
        .iter()
        .map(|&r| signaling_audit(&pp, r, "A", "C").unwrap().total_variation)
        .collect();
    let ok = truncation <= C_SIGNAL * eps
        && binning <= amb
        && tv <= binning + C_SIGNAL * eps
        && audits.iter().all(|&a| a <= C_SIGNAL * eps);
    outcome(
        ok,
        format!(
            "exact composition TV {truncation:.1e} <= 5 eps {:.3e}; midpoint binning TV {binning:.3e} (ambiguity mass {amb:.2}); \
             TV(A->C) standard {:.3e} intrinsic {:.3e}",
            C_SIGNAL * eps,
            audits[0],
            audits[1]
        ),
    )
}

fn c10() -> Outcome {
    let dev = |id: &str, t: f64, lo: f64, hi: f64| {
        json!({ "id": id, "t": t, "x_lo": lo, "x_hi": hi, "smearing": { "profile": "uniform" },
                "bins": { "n_bins": 7, "delta_max": 3.0 } })
    };
    let cases = [
        json!([dev("A", 0.0, -1.0, 1.0), dev("B", 5.0, -1.0, 1.0), dev("C", 0.0, 9.0, 10.0), dev("D", 2.0, 13.0, 14.0)]),
        json!([dev("L", 0.0, -7.0, -5.0), dev("M", 1.0, -1.0, 1.0), dev("R", 0.5, 5.0, 7.0)]),
    ];
    let mut worst = 0.0f64;
    for devices in cases {
        let s = edited("sorkin.json", |v| {
            v["devices"] = devices;
            v["audit"] = serde_json::Value::Null;
        });
        let pp = prepared(&s, None);
        assert!(!pp.is_split());
        let a = rule_table(&pp, Rule::Standard).unwrap();
        let b = rule_table(&pp, Rule::Intrinsic).unwrap();
        worst = worst.max(a.max_difference(&b));
    }
    outcome(worst <= 1e-9, format!("max entry difference {worst:.1e}"))
}

fn c11() -> Outcome {
    let s = bundled("sorkin.json");
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let files = pool.install(|| run_simulate(&s, &RunOptions { out: dir.path().into(), ..Default::default() })).unwrap().1;
        files.iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>()
    };
    let (one, four, again) = (run(1), run(4), run(4));
    outcome(one == four && four == again, format!("{} files compared across 1, 4, 4 threads", one.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "microcausality convergence", c1),
        (2, "projector algebra", c2),
        (3, "vacuum Gaussian oracle", c3),
        (4, "one-particle oracle", c4),
        (5, "kernel identity", c5),
        (6, "Sorkin layering", c6),
        (7, "intrinsic no-signaling", c7),
        (8, "standard-rule signaling", c8),
        (9, "linear-case coincidence", c9),
        (10, "rule coincidence without splitting", c10),
        (11, "determinism", c11),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let o = check();
        let mark = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {mark} {name}: {}", o.detail);
        if !o.passed && !KNOWN_UNATTAINED.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
