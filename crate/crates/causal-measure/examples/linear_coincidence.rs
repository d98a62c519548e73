use std::path::PathBuf;

use causal_measure::rules::{composition_ambiguity, prepare, rule_table, table_with, total_variation, Rule, TableOptions};
use causal_measure::scenario::parse_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/sorkin_linear.json");
    let pp = prepare(&parse_scenario(path)?.plan(None)?)?;

    let standard = rule_table(&pp, Rule::Standard)?;
    let midpoint = rule_table(&pp, Rule::Intrinsic)?;
    let exact = table_with(&pp, Rule::Intrinsic, &TableOptions { exact_linear: true, ..Default::default() })?;

    println!("epsilon_trunc            {:.3e}", standard.diagnostics.epsilon_trunc);
    println!("TV standard vs exact     {:.3e}", total_variation(&standard.probabilities, &exact.probabilities));
    println!("TV standard vs midpoint  {:.3e}", total_variation(&standard.probabilities, &midpoint.probabilities));
    for (device, mass) in composition_ambiguity(&pp)? {
        println!("ambiguous mass of {device}      {mass:.3}");
    }
    Ok(())
}
