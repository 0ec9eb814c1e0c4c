//! Opens L23 so the triangle runs radially with both remaining lines at
//! ρ = 1.05, then steps the engine until the overload protection trips them.

use gridplan::{fixtures, Action, ChronicRow, EngineConfig, GridState};
use gridplan::engine::step;

fn main() {
    let grid = fixtures::t3();
    let cfg = EngineConfig::default();
    let mut state = {
        let row = ChronicRow { load: vec![105.0], gen: vec![0.0, 105.0] };
        let mut s = GridState::initial(&grid, &row, 0);
        // Radial operation: everything flows over L12 and L13.
        s.topology.set_line_status(grid.line_index("L23").unwrap(), false);
        s
    };
    let row = ChronicRow { load: vec![105.0], gen: vec![0.0, 105.0] };
    for t in 1..=5 {
        state = step(&grid, &state, &Action::NoOp, &row, &cfg);
        let tripped: Vec<&str> = state
            .report
            .tripped_lines
            .iter()
            .map(|l| grid.lines[*l].id.as_str())
            .collect();
        println!(
            "step {t}: max rho {:>6.3}  timers {:?}  tripped {:?}  blackout {}",
            state.max_rho(),
            state.overflow_timers,
            tripped,
            state.blackout
        );
        if state.blackout {
            break;
        }
    }
}
