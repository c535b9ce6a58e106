use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::potentials::{Bounds, PendulumModel, PendulumParams, QuadraticModel};

const P: PendulumParams = PendulumParams { m: 1.0, g: 9.81, l0: 1.0, k: 100.0 };

fn pendulum() -> ScenarioModel {
    ScenarioModel::new(
        "pendulum",
        Arc::new(PendulumModel::new(P).unwrap()),
        Bounds::new(vec![-1.5, -1.5], vec![1.5, 1.5]).unwrap(),
        Bounds::new(vec![-PI], vec![PI]).unwrap(),
        vec!["theta".into()],
        vec!["ux".into(), "uy".into()],
    )
    .unwrap()
}

fn quadratic(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> ScenarioModel {
    let (n, k) = (a.nrows(), c.nrows());
    ScenarioModel::new(
        "quadratic",
        Arc::new(QuadraticModel::new(a, b, c).unwrap()),
        Bounds::new(vec![-10.0; k], vec![10.0; k]).unwrap(),
        Bounds::new(vec![-10.0; n], vec![10.0; n]).unwrap(),
        vec![],
        vec![],
    )
    .unwrap()
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn hanging(model: &ScenarioModel) -> EquilibriumPoint {
    solve_equilibrium(model, &v(&[0.0, -1.0]), &v(&[-1.2]), NewtonSettings::default()).unwrap()
}

/// Closed-form `dW/dz` of the pendulum.
fn pendulum_gz(z: f64, ux: f64, uy: f64) -> f64 {
    let (s, c) = z.sin_cos();
    0.5 * P.m * P.g * P.l0 * c + P.k * P.l0 * (ux * s - uy * c)
}

#[test]
fn hanging_equilibrium_from_nearby_seed() {
    let eq = hanging(&pendulum());
    assert!(eq.converged && eq.stable);
    assert!((eq.point.z[0] + FRAC_PI_2).abs() < 1e-9);
    assert!((eq.hess_det - P.hanging_stiffness()).abs() < 1e-9);
    assert!(eq.residual_norm <= 1e-8);
}

#[test]
fn far_seed_never_claims_a_false_root() {
    let m = pendulum();
    let eq = solve_equilibrium(&m, &v(&[0.0, -1.0]), &v(&[1.2]), NewtonSettings::default()).unwrap();
    if eq.converged {
        assert!(pendulum_gz(eq.point.z[0], 0.0, -1.0).abs() <= 1e-8);
    }
}

#[test]
fn branch_count_matches_dense_scan() {
    let m = pendulum();
    for u in [[0.0, -1.0], [0.5, -0.6], [-0.8, 0.3], [0.9, 0.9]] {
        let set = enumerate_branches(&m, &v(&u), &angular_seeds(32), NewtonSettings::default(), DEDUP_RADIUS).unwrap();
        // minima of W over the circle: dW/dz crosses zero upwards
        let n = 20_000;
        let minima = (0..n)
            .filter(|&i| {
                let a = -PI + TAU * i as f64 / n as f64;
                let b = -PI + TAU * (i + 1) as f64 / n as f64;
                pendulum_gz(a, u[0], u[1]) < 0.0 && pendulum_gz(b, u[0], u[1]) >= 0.0
            })
            .count();
        assert_eq!(set.equilibria.len(), minima, "u = {u:?}");
        for e in &set.equilibria {
            assert!(e.residual_norm <= 1e-8);
        }
    }
}

#[test]
fn known_root_as_only_seed_is_idempotent() {
    let m = pendulum();
    let set = enumerate_branches(&m, &v(&[0.0, -1.0]), &[v(&[-FRAC_PI_2])], NewtonSettings::default(), DEDUP_RADIUS).unwrap();
    assert_eq!(set.equilibria.len(), 1);
    assert!((set.equilibria[0].point.z[0] + FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn lattice_has_every_corner() {
    let s = lattice_seeds(&v(&[0.0, -1.0]), &v(&[1.0, 1.0]), 3);
    assert_eq!(s.len(), 9);
    assert!(s.contains(&v(&[1.0, 1.0])));
    assert!(s.contains(&v(&[0.5, 0.0])));
}

#[test]
fn pendulum_metric_at_hanging_point() {
    let m = pendulum();
    let eq = hanging(&m);
    let g = haptic_metric(&m, &eq).unwrap();
    let h = P.hanging_stiffness();
    let expect = DMatrix::from_row_slice(2, 2, &[P.k - P.k * P.k / h, 0.0, 0.0, P.k]);
    assert!((&g.g - &expect).amax() < 1e-9, "{}", g.g);
    // cheapest direction is the tip tangent, i.e. x
    let (vals, vecs) = crate::numerics::sym_eigen(&g.g_squared);
    assert!(vals[0] < vals[1]);
    assert!(vecs[(0, 0)].abs() > 1.0 - 1e-9);
}

#[test]
fn decoupled_metric_is_control_block() {
    let m = quadratic(
        DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        DMatrix::zeros(2, 2),
        DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]),
    );
    let eq = solve_equilibrium(&m, &v(&[0.2, 0.1]), &v(&[1.0, 1.0]), NewtonSettings::default()).unwrap();
    let g = haptic_metric(&m, &eq).unwrap();
    assert!((g.g - DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0])).amax() < 1e-12);
}

#[test]
fn near_singular_metric_is_refused() {
    let m = quadratic(
        DMatrix::from_row_slice(2, 2, &[1e-13, 0.0, 0.0, 1.0]),
        DMatrix::zeros(2, 1),
        DMatrix::from_row_slice(1, 1, &[1.0]),
    );
    let eq = EquilibriumPoint::at(&m, ConfigPoint::from_slices(&[0.0, 0.0], &[0.0])).unwrap();
    assert!(matches!(haptic_metric(&m, &eq), Err(Error::NearSingularMetric { .. })));
}

#[test]
fn obstacle_predicate() {
    let m = pendulum();
    let eq = hanging(&m);
    assert!(!is_haptic_obstacle(&m, &eq.point, 1.0).unwrap());
    assert!(is_haptic_obstacle(&m, &eq.point, eq.hess_det + 1.0).unwrap());
    let q = quadratic(
        DMatrix::from_row_slice(2, 2, &[1e-9, 0.0, 0.0, 1.0]),
        DMatrix::zeros(2, 1),
        DMatrix::from_row_slice(1, 1, &[1.0]),
    );
    assert!(is_haptic_obstacle(&q, &ConfigPoint::from_slices(&[0.0, 0.0], &[0.0]), 1e-3).unwrap());
    assert!(is_haptic_obstacle(&m, &eq.point, 0.0).is_err());
}

#[test]
fn constant_metric_line_integral() {
    let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0]);
    let b = DMatrix::from_row_slice(2, 2, &[0.7, -0.2, 0.1, 0.4]);
    let c = DMatrix::from_row_slice(2, 2, &[4.0, 0.3, 0.3, 5.0]);
    let m = quadratic(a.clone(), b.clone(), c.clone());
    let schur = &c - b.transpose() * a.clone().try_inverse().unwrap() * &b;
    let start = solve_equilibrium(&m, &v(&[0.0, 0.0]), &v(&[0.0, 0.0]), NewtonSettings::default()).unwrap();
    let target = v(&[0.6, -0.3]);
    let tr = track(&m, &start, &target, 1e9, &TrackSettings::default()).unwrap();
    assert_eq!(tr.stop_reason, StopReason::TargetReached);
    let expect = (&schur * &target).norm();
    assert!((haptic_distance(&tr) - expect).abs() < 1e-6);
    assert!((&tr.final_point.point.u - &target).amax() < 1e-12);
}

#[test]
fn zero_length_trace_has_zero_distance() {
    let m = pendulum();
    let eq = hanging(&m);
    let tr = TrackTrace {
        samples: vec![TrackSample {
            t: 0.0,
            z: eq.point.z.clone(),
            u: eq.point.u.clone(),
            phi: 0.0,
            w: eq.w,
            residual_norm: eq.residual_norm,
            hess_det: eq.hess_det,
        }],
        stop_reason: StopReason::TargetReached,
        final_point: eq,
        diagnostic: None,
    };
    assert_eq!(haptic_distance(&tr), 0.0);
}

#[test]
fn tangential_sweep_stays_on_manifold() {
    let m = pendulum();
    let eq = hanging(&m);
    let settings = TrackSettings { lambda: 1.0, ..TrackSettings::default() };
    let tr = track(&m, &eq, &v(&[0.6, -1.0]), 1e9, &settings).unwrap();
    assert_eq!(tr.stop_reason, StopReason::TargetReached);
    let mut last_phi = 0.0;
    for s in &tr.samples {
        assert!(s.residual_norm <= 1e-5, "residual {} at t {}", s.residual_norm, s.t);
        assert!(s.phi >= last_phi);
        last_phi = s.phi;
    }
    let stride = tr.samples.len() / 20;
    for s in tr.samples.iter().step_by(stride.max(1)) {
        let fresh = solve_equilibrium(&m, &s.u, &s.z, NewtonSettings::default()).unwrap();
        assert!(fresh.converged);
        assert!((fresh.point.z[0] - s.z[0]).abs() <= 1e-4);
    }
}

#[test]
fn push_into_fold_region_stops_at_obstacle() {
    let m = pendulum();
    let eq = hanging(&m);
    // the stable branch has det(H_zz) = k |u - (0, mg/2k)|, so det <= 10
    // inside a disk of radius 0.1 around (0, 0.049)
    let settings = TrackSettings { lambda: 10.0, ..TrackSettings::default() };
    let tr = track(&m, &eq, &v(&[0.0, 0.5]), 1e9, &settings).unwrap();
    assert_eq!(tr.stop_reason, StopReason::Obstacle);
    let u = &tr.final_point.point.u;
    let r = (u[0].powi(2) + (u[1] - 0.5 * P.m * P.g / P.k).powi(2)).sqrt();
    assert!((r - 0.1).abs() < 2e-3, "stopped at radius {r}");
}

#[test]
fn budget_stops_with_at_most_one_step_of_overshoot() {
    let m = pendulum();
    let eq = hanging(&m);
    let settings = TrackSettings { lambda: 1.0, ..TrackSettings::default() };
    let tr = track(&m, &eq, &v(&[1.0, -1.0]), 0.5, &settings).unwrap();
    assert_eq!(tr.stop_reason, StopReason::DistanceReached);
    let n = tr.samples.len();
    assert!(tr.samples[n - 1].phi >= 0.5);
    assert!(tr.samples[n - 2].phi < 0.5);
}

#[test]
fn leaving_control_box_stops_on_the_boundary() {
    let m = pendulum();
    let eq = hanging(&m);
    let settings = TrackSettings { lambda: 1.0, ..TrackSettings::default() };
    let tr = track(&m, &eq, &v(&[3.0, -1.0]), 1e9, &settings).unwrap();
    assert_eq!(tr.stop_reason, StopReason::ControlBounds);
    assert!((tr.final_point.point.u[0] - 1.5).abs() < 1e-12);
}

#[test]
fn haptic_distance_is_additive() {
    let m = pendulum();
    let eq = hanging(&m);
    let settings = TrackSettings { lambda: 1.0, ..TrackSettings::default() };
    let whole = track(&m, &eq, &v(&[0.8, -0.4]), 1e9, &settings).unwrap();
    let first = track(&m, &eq, &v(&[0.4, -0.7]), 1e9, &settings).unwrap();
    let second = track(&m, &first.final_point, &v(&[0.8, -0.4]), 1e9, &settings).unwrap();
    let sum = haptic_distance(&first) + haptic_distance(&second);
    assert!((haptic_distance(&whole) - sum).abs() < 1e-8, "{} vs {sum}", haptic_distance(&whole));
}

#[test]
fn drift_correction_pulls_back_onto_manifold() {
    let m = pendulum();
    let eq = hanging(&m);
    // start 1e-3 rad off the manifold
    let mut off = eq.clone();
    off.point.z[0] += 1e-3;
    let run = |eta: f64, start: &EquilibriumPoint| {
        let settings = TrackSettings { eta, lambda: 1.0, ..TrackSettings::default() };
        track(&m, start, &v(&[1.0, 0.9]), 1e9, &settings).unwrap()
    };
    let free = run(0.0, &off);
    let corrected = run(10.0, &off);
    let tail = |tr: &TrackTrace| tr.samples[tr.samples.len() / 2..].iter().map(|s| s.residual_norm).fold(0.0, f64::max);
    assert!(tail(&free) > 1e-2, "uncorrected residual {}", tail(&free));
    assert!(tail(&corrected) <= 1e-5, "corrected residual {}", tail(&corrected));
    // from an exact start the default gain keeps every sample on the manifold
    let clean = run(10.0, &eq);
    assert!(clean.samples.iter().all(|s| s.residual_norm <= 1e-5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn schur_matches_closed_form(
        a_raw in prop::collection::vec(-1.0f64..1.0, 9),
        b_raw in prop::collection::vec(-1.0f64..1.0, 6),
        c_raw in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let l = DMatrix::from_row_slice(3, 3, &a_raw);
        let a = &l * l.transpose() + DMatrix::identity(3, 3) * 0.5;
        let b = DMatrix::from_row_slice(3, 2, &b_raw);
        let cl = DMatrix::from_row_slice(2, 2, &c_raw);
        let c = &cl * cl.transpose() + DMatrix::identity(2, 2);
        let m = quadratic(a.clone(), b.clone(), c.clone());
        let eq = EquilibriumPoint::at(&m, ConfigPoint::from_slices(&[0.0; 3], &[0.0; 2])).unwrap();
        let g = haptic_metric(&m, &eq).unwrap();
        let expect = &c - b.transpose() * a.try_inverse().unwrap() * &b;
        prop_assert!((&g.g - &expect).amax() <= 1e-10);
        prop_assert!(crate::numerics::relative_asymmetry(&g.g) <= 1e-9);
    }

    #[test]
    fn pendulum_metric_is_symmetric_psd(ux in -1.5f64..1.5, uy in -1.5f64..1.5) {
        let m = pendulum();
        let set = enumerate_branches(&m, &v(&[ux, uy]), &angular_seeds(32), NewtonSettings::default(), DEDUP_RADIUS).unwrap();
        for eq in &set.equilibria {
            if let Ok(g) = haptic_metric(&m, eq) {
                prop_assert!((&g.g - g.g.transpose()).amax() <= 1e-9);
                let (vals, _) = crate::numerics::sym_eigen(&g.g_squared);
                prop_assert!(vals[0] >= -1e-10);
            }
        }
    }
}

