use std::path::PathBuf;

use causal_measure::rules::{prepare, signaling_audit, Rule};
use causal_measure::scenario::parse_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/sorkin.json");
    let scenario = parse_scenario(path)?;
    let pp = prepare(&scenario.plan(None)?)?;

    for rule in [Rule::Standard, Rule::Intrinsic] {
        let r = signaling_audit(&pp, rule, "A", "C")?;
        println!("{rule:>9}: TV(A -> C) = {:.3e} (bound {:.3e})", r.total_variation, r.bound);
        let shift: Vec<String> =
            r.with_source.iter().zip(&r.without_source).map(|(a, b)| format!("{:+.1e}", a - b)).collect();
        println!("           C marginal shift: {}", shift.join(" "));
    }
    Ok(())
}
