//! Steps a congested day with the agent at α = 0.5 and prints every step on
//! which it does something other than skip.

use gridplan::agent::{decide, DecisionKind};
use gridplan::engine::step;
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::{fixtures, EngineConfig, GridState};

fn main() -> gridplan::Result<()> {
    let grid = fixtures::grid14();
    let mut cfg = EngineConfig::default();
    cfg.agent.alpha = 0.5;
    let day = generate_scenario(&grid, 3, Profile::Congested, 1)?;

    let mut state = GridState::initial(&grid, day.row(0), 0);
    for t in 0..day.step_count() {
        let horizon = 3.min(day.step_count() - t);
        let d = decide(&grid, &state, &day.rows[t..t + horizon], &cfg);
        state = step(&grid, &state, &d.action, day.row(t), &cfg);
        if d.kind != DecisionKind::Skip {
            println!(
                "{t:>3} {:?} {:<9} {:<55} -> rho {:.3}",
                d.status.level,
                format!("{:?}", d.kind),
                d.action.canonical_id(&grid),
                state.max_rho()
            );
        }
    }
    Ok(())
}
