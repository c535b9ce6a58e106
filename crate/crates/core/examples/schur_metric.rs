//! Haptic metric of a quadratic potential, where `G = C - B'A^-1 B` is
//! known in closed form, and the metric length of a straight control move.
//!
//! cargo run --release --example schur_metric

use std::path::Path;

use hapticrrt::config::ConfigDoc;
use hapticrrt::manifold::{haptic_distance, haptic_metric, solve_equilibrium, track};
use hapticrrt::numerics::NewtonSettings;
use hapticrrt::potentials::QuadraticModel;
use nalgebra::{DMatrix, DVector};

fn main() -> hapticrrt::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/quadratic.json");
    let s = ConfigDoc::load(&path, &[])?.build()?;
    let m = &s.model;

    let start = solve_equilibrium(m, &s.start.u, &s.start.z, NewtonSettings::default())?;
    let metric = haptic_metric(m, &start)?;
    let q = QuadraticModel::new(
        DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, -0.8]),
        DMatrix::from_row_slice(2, 2, &[3.0, 0.2, 0.2, 2.0]),
    )?;
    println!("G from derivatives:{}", metric.g);
    println!("closed form:{}", q.schur().expect("A is invertible"));

    let target = DVector::from_column_slice(&[0.8, -0.5]);
    let trace = track(m, &start, &target, f64::INFINITY, &s.planner.track_settings())?;
    let du = &target - &s.start.u;
    println!(
        "straight move to {:?}: tracked length {:.9}, |G du| = {:.9}",
        target.as_slice(),
        haptic_distance(&trace),
        (&metric.g * du).norm()
    );
    Ok(())
}
