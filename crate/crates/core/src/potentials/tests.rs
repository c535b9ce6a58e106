use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{DMatrix, Vector2};
use proptest::prelude::*;

use super::*;
use crate::geometry::{Pose2, StiffnessProfile, Superellipse, DEFAULT_CORNERS};

fn pendulum() -> ScenarioModel {
    let p = PendulumParams { m: 1.0, g: 9.81, l0: 1.0, k: 100.0 };
    ScenarioModel::new(
        "pendulum",
        Arc::new(PendulumModel::new(p).unwrap()),
        Bounds::new(vec![-1.5, -1.5], vec![1.5, 1.5]).unwrap(),
        Bounds::new(vec![-4.0], vec![4.0]).unwrap(),
        vec!["theta".into()],
        vec!["ux".into(), "uy".into()],
    )
    .unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn pendulum_hanging_bundle() {
    let m = pendulum();
    let b = m.bundle(&ConfigPoint::from_slices(&[-FRAC_PI_2], &[0.0, -1.0])).unwrap();
    assert!(close(b.w, -4.905, 1e-12));
    assert!(b.grad_z[0].abs() < 1e-12);
    assert!(close(b.h_zz[(0, 0)], 104.905, 1e-12));
    assert!(b.control_force().norm() < 1e-12);
}

#[test]
fn pendulum_energy_is_periodic() {
    let m = pendulum();
    let a = m.energy(&ConfigPoint::from_slices(&[0.3], &[0.2, 0.4])).unwrap();
    let b = m.energy(&ConfigPoint::from_slices(&[0.3 + std::f64::consts::TAU], &[0.2, 0.4])).unwrap();
    assert!(close(a, b, 1e-12));
}

#[test]
fn wrap_angle_lands_in_half_open_interval() {
    use pendulum::wrap_angle;
    assert!(close(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI, 1e-15));
    assert!(close(wrap_angle(7.0), 7.0 - std::f64::consts::TAU, 1e-15));
}

proptest! {
    #[test]
    fn pendulum_analytic_matches_oracle(z in -3.0f64..3.0, ux in -1.5f64..1.5, uy in -1.5f64..1.5) {
        let m = pendulum();
        let p = ConfigPoint::from_slices(&[z], &[ux, uy]);
        let a = m.bundle(&p).unwrap();
        let o = finite_difference_bundle(&m, &p, FdScheme::new(1e-6).unwrap(), FdScheme::new(1e-4).unwrap()).unwrap();
        let rel = |x: &DMatrix<f64>, y: &DMatrix<f64>| relative_error(x, y, 1.0);
        prop_assert!(rel(&a.h_zz, &o.h_zz) < 1e-5);
        prop_assert!(rel(&a.h_uz, &o.h_uz) < 1e-5);
        prop_assert!(rel(&a.h_uu, &o.h_uu) < 1e-5);
        prop_assert!((&a.grad_z - &o.grad_z).amax() < 1e-5 * a.grad_z.amax().max(1.0));
    }

    #[test]
    fn quadratic_bundle_is_exact(s in 0.5f64..3.0, b in -1.0f64..1.0) {
        let q = QuadraticModel::new(
            DMatrix::from_row_slice(2, 2, &[s + 1.0, 0.2, 0.2, s]),
            DMatrix::from_row_slice(2, 1, &[b, 0.5]),
            DMatrix::from_row_slice(1, 1, &[4.0]),
        ).unwrap();
        let schur = q.schur().unwrap();
        let m = ScenarioModel::new(
            "quadratic",
            Arc::new(q),
            Bounds::new(vec![-1.0], vec![1.0]).unwrap(),
            Bounds::new(vec![-1.0; 2], vec![1.0; 2]).unwrap(),
            vec![],
            vec![],
        ).unwrap();
        let bd = m.bundle(&ConfigPoint::from_slices(&[0.1, -0.2], &[0.3])).unwrap();
        let ainv = bd.h_zz.clone().try_inverse().unwrap();
        let g = &bd.h_uu - &bd.h_uz * ainv * bd.h_uz.transpose();
        prop_assert!((g - schur).amax() < 1e-12);
    }
}

fn clip_contacts() -> ContactSet {
    let jaw = ContactBody {
        name: "jaw".into(),
        shape: Superellipse::new(0.275, 0.015, 0.3, Pose2::new(0.275, 0.0, 0.0)).unwrap(),
        attachment: Attachment::Hinge { pivot: Vector2::new(0.0, 0.2), angle: 0 },
        samples: Superellipse::new(0.275, 0.015, 0.3, Pose2::default()).unwrap().edge_parameters(4),
    };
    let object = ContactBody {
        name: "object".into(),
        shape: Superellipse::new(0.06, 0.08, 0.3, Pose2::new(0.0, 0.08, 0.0)).unwrap(),
        attachment: Attachment::Planar { x: Some(2), y: None, theta: None },
        samples: DEFAULT_CORNERS.to_vec(),
    };
    let profile = StiffnessProfile::new(1.0, 1e4, 1e-3).unwrap();
    ContactSet::new(vec![jaw, object], vec![(0, 1), (1, 0)], profile, false, 16)
}

#[test]
fn clip_spring_only_energy_vanishes_at_rest() {
    let p = ClipParams { k_c: [100.0, 100.0], k_theta: 2.0, z_theta0: -0.4 };
    let model = p.build(clip_contacts()).unwrap();
    let x = nalgebra::DVector::from_column_slice(&[-0.4, 0.0, 1.0, 0.0, 1.0]);
    assert_eq!(model.energy(&x).unwrap(), 0.0);
}

#[test]
fn clip_gradient_matches_fd_under_contact() {
    let p = ClipParams { k_c: [100.0, 100.0], k_theta: 2.0, z_theta0: -0.4 };
    let model = p.build(clip_contacts()).unwrap();
    let x = nalgebra::DVector::from_column_slice(&[-0.25, 0.05, 0.35, 0.06, 0.30]);
    let (w, g) = model.gradient(&x).unwrap().unwrap();
    assert!(w > 0.0);
    let fd = crate::numerics::fd_gradient(|q| model.energy(q), &x, FdScheme::new(1e-7).unwrap()).unwrap();
    assert!((&g - &fd).amax() <= 1e-5 * fd.amax().max(1.0), "{g} vs {fd}");
}

#[test]
fn bookshelf_rejects_slot_wider_than_book() {
    let p = BookshelfParams {
        k_c: [100.0; 3],
        k_1: [10.0, 1e3, 1e3],
        k_2: [10.0, 1e3, 1e3],
        rest_1: [-0.1, 0.0, 0.0],
        rest_2: [0.1, 0.0, 0.0],
        w_1: 0.02,
        w_2: 0.03,
    };
    match p.validate() {
        Err(Error::Config(v)) => assert!(v[0].contains("w_2")),
        other => panic!("unexpected {other:?}"),
    }
}
