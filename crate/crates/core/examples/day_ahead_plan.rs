//! Plans one congested day at α = 0.5 and writes the plan JSON and the
//! per-step profile CSV.
//!
//! ```text
//! cargo run -p gridplan --example day_ahead_plan -- [out_dir]
//! ```

use std::path::PathBuf;

use gridplan::planner::{plan_day, PlannerOptions};
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::{fixtures, EngineConfig};

fn main() -> gridplan::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/plans".into()));
    std::fs::create_dir_all(&out).map_err(|e| gridplan::Error::Invalid(e.to_string()))?;

    let grid = fixtures::grid14();
    let day = generate_scenario(&grid, 5, Profile::Congested, 1)?;
    let plan = plan_day(&grid, &day, 0.5, &EngineConfig::default(), PlannerOptions::default())?;

    let m = &plan.metrics;
    println!("{}: {} steps, survived {}", plan.scenario_id, plan.steps.len(), m.survived);
    println!("  remaining congestion {:.2} MWh", m.remaining_congestion_mwh);
    println!("  switching operations {}", m.switching_operations);
    println!("  redispatch {:.2} MWh, curtailment {:.2} MWh", m.redispatch_mwh, m.curtailment_mwh);

    plan.save(out.join("plan.json"))?;
    plan.save_profile_csv(out.join("profile.csv"))?;
    println!("wrote {}", out.display());
    Ok(())
}
