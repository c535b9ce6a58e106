//! Book insertion into a slot narrower than the book. A straight push
//! jams against the neighbours; the planner finds a path that tilts and
//! wedges the book in.
//!
//! cargo run --release --example bookshelf_insertion [seed]

use std::path::Path;

use hapticrrt::config::ConfigDoc;
use hapticrrt::manifold::track;
use hapticrrt::planner::{extract_path, path_samples, plan, prepare_start};
use nalgebra::DVector;

fn main() -> hapticrrt::Result<()> {
    let seed = std::env::args().nth(1).unwrap_or_else(|| "0".into());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/bookshelf.json");
    let s = ConfigDoc::load(&path, &[format!("planner.seed={seed}")])?.build()?;
    let m = &s.model;

    let root = prepare_start(m, &s.start, &s.planner)?;
    let slot = DVector::from_column_slice(&[0.0, 0.0, 0.0]);
    let push = track(m, &root, &slot, f64::INFINITY, &s.planner.track_settings())?;
    let end = &push.final_point.point;
    println!(
        "straight push: {} at u_y {:.4}, book_y {:.4} (start {:.4})",
        push.stop_reason.as_str(),
        end.u[1],
        end.z[1],
        root.point.z[1]
    );

    let result = plan(m, &s.start, &s.planner)?;
    println!("tree: {} nodes, {} dead ends", result.tree.len(), result.tree.dead_ends());
    let Some(goal) = result.goal_node else {
        println!("goal not reached");
        return Ok(());
    };
    let rows = path_samples(m, &result.tree, &extract_path(&result.tree, goal)?)?;
    println!("{:>7} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "t", "book_x", "book_y", "theta", "W", "f_x", "f_y");
    let step = (rows.len() / 15).max(1);
    for r in rows.iter().step_by(step).chain(rows.last()) {
        println!(
            "{:7.3} {:8.4} {:8.4} {:8.4} {:8.4} {:8.2} {:8.2}",
            r.t, r.z[0], r.z[1], r.z[2], r.w, r.f_ctrl[0], r.f_ctrl[1]
        );
    }
    Ok(())
}
