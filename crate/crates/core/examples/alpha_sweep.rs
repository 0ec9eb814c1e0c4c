//! Plans a suite of congested days for several α values and prints the
//! normalized comparison table next to the raw suite totals.
//!
//! ```text
//! cargo run --release -p gridplan --example alpha_sweep -- [days] [first_seed]
//! ```

use std::time::Instant;

use gridplan::fixtures;
use gridplan::planner::{compare_alphas, PlannerOptions};
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::EngineConfig;

fn main() -> gridplan::Result<()> {
    let mut args = std::env::args().skip(1);
    let days: u64 = args.next().map_or(20, |s| s.parse().expect("days"));
    let first: u64 = args.next().map_or(1, |s| s.parse().expect("first seed"));

    let grid = fixtures::grid14();
    let suite = (first..first + days)
        .map(|seed| generate_scenario(&grid, seed, Profile::Congested, 1))
        .collect::<gridplan::Result<Vec<_>>>()?;

    let started = Instant::now();
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let cmp = compare_alphas(&grid, &suite, &alphas, &EngineConfig::default(), PlannerOptions::default())?;
    let table = &cmp.table;

    println!("{} congested days, {} filtered", table.congested_days.len(), table.filtered_days.len());
    println!(
        "{:>6} {:>10} {:>10} {:>10} | {:>12} {:>9} {:>12} {:>11} {:>8}",
        "alpha", "congest%", "switch%", "redisp%", "congest MWh", "switches", "redisp MWh", "curtail MWh", "survived"
    );
    for r in &table.rows {
        println!(
            "{:>6} {:>10.2} {:>10.2} {:>10.2} | {:>12.2} {:>9} {:>12.2} {:>11.2} {:>5}/{}",
            r.label(),
            r.remaining_congestion_pct,
            r.switching_pct,
            r.redispatch_pct,
            r.remaining_congestion_mwh,
            r.switching_operations,
            r.redispatch_mwh,
            r.curtailment_mwh,
            r.survived_days,
            r.days,
        );
    }
    println!("planned in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}
