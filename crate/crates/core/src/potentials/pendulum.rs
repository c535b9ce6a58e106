//! Hinged pendulum pushed at its tip by a planar point robot.
//!
//! `W = 1/2 m g L0 sin(z) + 1/2 k ((ux - L0 cos z)^2 + (uy - L0 sin z)^2)`,
//! with `z` the pendulum angle and `u = (ux, uy)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::{Dims, Potential};
use crate::error::{Error, Result};
use crate::geometry::{Pose2, StiffnessProfile, Superellipse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub m: f64,
    pub g: f64,
    pub l0: f64,
    pub k: f64,
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, v) in [("m", self.m), ("g", self.g), ("l0", self.l0), ("k", self.k)] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("params.{name} must be positive (got {v})"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// `d2W/dz2` at the hanging equilibrium `z = -pi/2`, `u = (0, -L0)`.
    pub fn hanging_stiffness(&self) -> f64 {
        0.5 * self.m * self.g * self.l0 + self.k * self.l0 * self.l0
    }
}

/// How the robot couples to the tip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TipContact {
    /// Constant-stiffness spring to the tip (closed-form derivatives).
    Constant,
    /// Spring whose stiffness follows `k(d)`, `d` being the inside-outside
    /// value of `u` w.r.t. a superellipse riding on the tip.
    Profile { tip: Superellipse, profile: StiffnessProfile },
}

#[derive(Debug, Clone)]
pub struct PendulumModel {
    pub params: PendulumParams,
    pub contact: TipContact,
}

impl PendulumModel {
    pub fn new(params: PendulumParams) -> Result<Self> {
        params.validate()?;
        Ok(PendulumModel {
            params,
            contact: TipContact::Constant,
        })
    }

    pub fn with_profile_contact(params: PendulumParams, tip: Superellipse, profile: StiffnessProfile) -> Result<Self> {
        params.validate()?;
        tip.validate()?;
        Ok(PendulumModel {
            params,
            contact: TipContact::Profile { tip, profile },
        })
    }

    pub fn tip(&self, z: f64) -> Vector2<f64> {
        let l = self.params.l0;
        Vector2::new(l * z.cos(), l * z.sin())
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

impl Potential for PendulumModel {
    fn dims(&self) -> Dims {
        Dims { n: 1, k: 2 }
    }

    fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        let PendulumParams { m, g, l0, k } = self.params;
        let (z, ux, uy) = (x[0], x[1], x[2]);
        let grav = 0.5 * m * g * l0 * z.sin();
        let tip = self.tip(z);
        let r2 = (ux - tip.x).powi(2) + (uy - tip.y).powi(2);
        let contact = match &self.contact {
            TipContact::Constant => 0.5 * k * r2,
            TipContact::Profile { tip: shape, profile } => {
                let frame = Pose2::new(tip.x, tip.y, z);
                let d = shape.level_body(frame.compose(&shape.pose).to_body(Vector2::new(ux, uy)));
                0.5 * (profile.k_min + profile.excess(d)) * r2
            }
        };
        Ok(grav + contact)
    }

    fn gradient(&self, x: &DVector<f64>) -> Option<Result<(f64, DVector<f64>)>> {
        if !matches!(self.contact, TipContact::Constant) {
            return None;
        }
        let PendulumParams { m, g, l0, k } = self.params;
        let (z, ux, uy) = (x[0], x[1], x[2]);
        let (s, c) = z.sin_cos();
        let w = match self.energy(x) {
            Ok(w) => w,
            Err(e) => return Some(Err(e)),
        };
        let gz = 0.5 * m * g * l0 * c + k * l0 * (ux * s - uy * c);
        let gx = k * (ux - l0 * c);
        let gy = k * (uy - l0 * s);
        Some(Ok((w, DVector::from_column_slice(&[gz, gx, gy]))))
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        if !matches!(self.contact, TipContact::Constant) {
            return None;
        }
        let PendulumParams { m, g, l0, k } = self.params;
        let (z, ux, uy) = (x[0], x[1], x[2]);
        let (s, c) = z.sin_cos();
        let hzz = -0.5 * m * g * l0 * s + k * l0 * (ux * c + uy * s);
        let hxz = k * l0 * s;
        let hyz = -k * l0 * c;
        Some(Ok(DMatrix::from_row_slice(
            3,
            3,
            &[hzz, hxz, hyz, hxz, k, 0.0, hyz, 0.0, k],
        )))
    }

    fn has_analytic_gradient(&self) -> bool {
        matches!(self.contact, TipContact::Constant)
    }

    fn has_analytic_hessian(&self) -> bool {
        matches!(self.contact, TipContact::Constant)
    }

    fn wrap_state(&self, z: &mut DVector<f64>) {
        z[0] = wrap_angle(z[0]);
    }
}
