//! Haptic metric ellipses `u' G^2 u = 1` of the pendulum on two rings of
//! anchor positions. The long axis follows the tip tangent and the
//! ellipses grow towards the outer ring.
//!
//! cargo run --release --example metric_ellipses

use std::f64::consts::PI;
use std::path::Path;

use hapticrrt::cli::slice_ellipse;
use hapticrrt::config::ConfigDoc;
use hapticrrt::manifold::{enumerate_branches, haptic_metric};
use hapticrrt::numerics::NewtonSettings;
use nalgebra::DVector;

fn main() -> hapticrrt::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/pendulum.json");
    let s = ConfigDoc::load(&path, &[])?.build()?;
    println!("{:>5} {:>7} {:>8} {:>10} {:>10} {:>10}", "r", "angle", "z_theta", "long axis", "tangent", "area");
    for r in [0.6, 1.4] {
        for i in 0..8 {
            let a = -PI + (i as f64 + 0.5) * PI / 4.0;
            let u = DVector::from_column_slice(&[r * a.cos(), r * a.sin()]);
            let set = enumerate_branches(&s.model, &u, &s.seeds, NewtonSettings::default(), s.dedup_radius)?;
            let Some(eq) = set.equilibria.first() else { continue };
            let e = slice_ellipse(&haptic_metric(&s.model, eq)?.g_squared, 0, 1);
            let z = eq.point.z[0];
            let tangent = (z.cos().atan2(-z.sin()) + PI / 2.0).rem_euclid(PI) - PI / 2.0;
            println!(
                "{r:5.2} {:7.1} {z:8.3} {:10.1} {:10.1} {:10.3e}",
                a.to_degrees(),
                e.angle_min.to_degrees(),
                tangent.to_degrees(),
                e.area
            );
        }
    }
    Ok(())
}
