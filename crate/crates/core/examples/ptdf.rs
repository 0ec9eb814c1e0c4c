//! Prints the PTDF row of the most loaded line of the 14-substation grid:
//! how much of one MW injected at each node (and withdrawn at the slack)
//! flows over that line.

use gridplan::flow::{dc_solve, ptdf, Injections};
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::fixtures;

fn main() {
    let grid = fixtures::grid14();
    let day = generate_scenario(&grid, 1, Profile::Calm, 1).unwrap();
    let noon = day.row(144);
    let inj = Injections { gen: noon.gen.clone(), load: noon.load.clone() };
    let sol = dc_solve(&grid, &grid.reference_topology, &inj).unwrap();
    let (line, rho) = sol.worst_line().unwrap();
    println!("most loaded: {} at rho {rho:.3}", grid.lines[line].id);

    let p = ptdf(&grid, &grid.reference_topology).unwrap();
    let mut row: Vec<(String, f64)> = p
        .graph
        .nodes
        .iter()
        .enumerate()
        .map(|(n, node)| (grid.substations[node.substation].id.clone(), p.get(line, n)))
        .collect();
    row.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    for (sub, factor) in row {
        println!("{sub:>4} {factor:+.4}");
    }
}
