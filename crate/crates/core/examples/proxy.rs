//! Closest surface points on a boxy superellipse, with the signed distance
//! sign taken from the inside-outside field.
//!
//! cargo run --release --example proxy

use hapticrrt::geometry::{inside_outside, solve_proxy, Pose2, Superellipse};
use nalgebra::Vector2;

fn main() -> hapticrrt::Result<()> {
    let shape = Superellipse::new(0.2, 0.05, 0.2, Pose2::new(0.1, 0.0, 0.3))?;
    let queries = [(0.1, 0.2), (0.35, 0.1), (0.1, 0.01), (-0.2, -0.2), (0.32, 0.06)];
    for (x, y) in queries {
        let q = Vector2::new(x, y);
        let p = solve_proxy(&shape, q, 8)?;
        let f = inside_outside(&shape, q)?;
        println!(
            "query ({x:5.2}, {y:5.2})  proxy ({:7.4}, {:7.4})  distance {:.5}  F {f:+.3}",
            p.proxy_point.x,
            p.proxy_point.y,
            p.distance()
        );
    }
    Ok(())
}
