//! Stable equilibria of the spring clip at a few finger/object controls.
//! Where two branches coexist, the jammed one sits near the jaw's rest
//! angle with the higher potential.
//!
//! cargo run --release --example clip_branches

use std::path::Path;

use hapticrrt::config::ConfigDoc;
use hapticrrt::manifold::enumerate_branches;
use hapticrrt::numerics::NewtonSettings;
use nalgebra::DVector;

fn main() -> hapticrrt::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/clip.json");
    let s = ConfigDoc::load(&path, &[])?.build()?;
    for u_ly in [0.15, 0.25, 0.35, 0.45] {
        for u_rx in [0.2, 0.5, 0.8] {
            let u = DVector::from_column_slice(&[u_ly, u_rx]);
            let set = enumerate_branches(&s.model, &u, &s.seeds, NewtonSettings::default(), s.dedup_radius)?;
            println!("u_ly {u_ly:.2} u_rx {u_rx:.2}: {} stable branch(es)", set.equilibria.len());
            for eq in &set.equilibria {
                let z = &eq.point.z;
                println!(
                    "    z_theta {:7.3}  z_ly {:6.3}  z_rx {:6.3}  W {:8.4}  det H_zz {:.3e}",
                    z[0], z[1], z[2], eq.w, eq.hess_det
                );
            }
        }
    }
    Ok(())
}
