use std::path::PathBuf;
use std::process::ExitCode;

use causal_measure::rules::Rule;
use causal_measure::scenario::{
    parse_scenario, run_audit, run_kernels, run_order, run_simulate, run_validate, RunOptions, ScenarioError,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "causal-measure", version, about = "Causally ordered field measurements on a lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split devices into parts and print their causal layers.
    Order(Common),
    /// Compute joint and marginal outcome tables.
    Simulate(Common),
    /// Compare a target's outcomes with and without a spacelike source device.
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        target: Option<String>,
    },
    /// Run the invariant suite on a scenario.
    Validate(Common),
    /// Tabulate eigenstate kernel coefficients per mode and device time.
    Kernels(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    rule: Option<Rule>,
    /// Reserved; the computation is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    acknowledge_warnings: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            rule: self.rule,
            acknowledge_warnings: self.acknowledge_warnings,
            source: None,
            target: None,
        }
    }
}

fn execute(cli: Cli) -> Result<i32, ScenarioError> {
    let (common, source, target) = match &cli.command {
        Command::Order(c) | Command::Simulate(c) | Command::Validate(c) | Command::Kernels(c) => (c, None, None),
        Command::Audit { common, source, target } => (common, source.clone(), target.clone()),
    };
    let scenario = parse_scenario(&common.scenario)?;
    let opts = RunOptions { source, target, ..common.options() };
    let (code, written) = match cli.command {
        Command::Order(_) => (0, run_order(&scenario, &opts)?),
        Command::Kernels(_) => (0, run_kernels(&scenario, &opts)?),
        Command::Simulate(_) => {
            let (table, written) = run_simulate(&scenario, &opts)?;
            let d = &table.diagnostics;
            println!(
                "{} rule: {} entries, sum {:.12}, epsilon_trunc {:.3e}, frame {:?}",
                table.rule,
                table.probabilities.len(),
                table.total(),
                d.epsilon_trunc,
                d.frame
            );
            (0, written)
        }
        Command::Audit { .. } => {
            let (r, written) = run_audit(&scenario, &opts)?;
            println!(
                "{} rule: TV({} -> {}) = {:.3e}, bound {:.3e}",
                r.rule, r.source, r.target, r.total_variation, r.bound
            );
            let breach = r.rule == Rule::Intrinsic && r.total_variation > r.bound.max(1e-12);
            (if breach { 3 } else { 0 }, written)
        }
        Command::Validate(_) => {
            let (report, written) = run_validate(&scenario, &opts)?;
            for c in &report.checks {
                println!("{} {} ({:.3e} vs {:.3e})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            (if report.passed { 0 } else { 3 }, written)
        }
    };
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(code)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
