//! Runs `order` and `simulate` on a bundled scenario, like the CLI does.
//!
//! `cargo run --example scenario_run -- scenarios/all_spacelike.json`

use std::path::PathBuf;

use causal_measure::scenario::{parse_scenario, run_order, run_simulate, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| manifest.join("scenarios/single_device.json"));
    let scenario = parse_scenario(&path)?;
    let out = std::env::temp_dir().join("causal-measure-example");
    let opts = RunOptions { out: out.clone(), ..Default::default() };

    run_order(&scenario, &opts)?;
    let (table, written) = run_simulate(&scenario, &opts)?;
    println!("{}: {} rule, sha256 {}", path.display(), table.rule, &scenario.sha256()[..12]);
    for id in &table.devices {
        let m = table.marginal(id).unwrap();
        let cells: Vec<String> = m.iter().map(|p| format!("{p:.3}")).collect();
        println!("{id}: {}", cells.join(" "));
    }
    for f in written {
        println!("wrote {}", f.display());
    }
    Ok(())
}
