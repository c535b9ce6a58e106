//! Swing the pendulum from hanging to horizontal and print the path.
//!
//! cargo run --release --example pendulum_plan [seed]

use std::path::Path;

use hapticrrt::config::ConfigDoc;
use hapticrrt::planner::{extract_path, path_samples, plan};

fn main() -> hapticrrt::Result<()> {
    let seed = std::env::args().nth(1).unwrap_or_else(|| "0".into());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/pendulum.json");
    let s = ConfigDoc::load(&path, &[format!("planner.seed={seed}")])?.build()?;

    let result = plan(&s.model, &s.start, &s.planner)?;
    println!("tree: {} nodes, {} dead ends", result.tree.len(), result.tree.dead_ends());
    let Some(goal) = result.goal_node else {
        println!("goal not reached");
        return Ok(());
    };
    let chain = extract_path(&result.tree, goal)?;
    let rows = path_samples(&s.model, &result.tree, &chain)?;
    println!("path through nodes {chain:?}, {} samples", rows.len());
    println!("{:>8} {:>8} {:>8} {:>9} {:>9} {:>8}", "t", "u_x", "u_y", "z_theta", "W", "phi");
    let step = (rows.len() / 12).max(1);
    for r in rows.iter().step_by(step).chain(rows.last()) {
        println!("{:8.3} {:8.3} {:8.3} {:9.4} {:9.4} {:8.3}", r.t, r.u[0], r.u[1], r.z[0], r.w, r.phi);
    }
    Ok(())
}
