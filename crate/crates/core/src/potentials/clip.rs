//! Binder-clip insertion: a hinged jaw opened through a lever, and an object
//! pushed underneath it.
//!
//! `z = [jaw angle, lever finger height, object x]`, `u = [finger target,
//! pusher target]`. The robot drives the finger and the object through
//! control springs; a torsion spring closes the jaw.

use serde::{Deserialize, Serialize};

use super::contact::{ContactSet, Spring, SpringContactModel};
use super::Dims;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipParams {
    /// Control spring stiffness for the finger and the pusher.
    pub k_c: [f64; 2],
    /// Jaw torsion spring.
    pub k_theta: f64,
    /// Jaw rest angle.
    pub z_theta0: f64,
}

impl ClipParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, v) in [("k_c[0]", self.k_c[0]), ("k_c[1]", self.k_c[1]), ("k_theta", self.k_theta)] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("params.{name} must be positive (got {v})"));
            }
        }
        if !self.z_theta0.is_finite() {
            errs.push("params.z_theta0 must be finite".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn build(&self, contacts: ContactSet) -> Result<SpringContactModel> {
        self.validate()?;
        Ok(SpringContactModel {
            dims: Dims { n: 3, k: 2 },
            springs: vec![
                Spring { i: 3, j: Some(1), k: self.k_c[0], rest: 0.0 },
                Spring { i: 4, j: Some(2), k: self.k_c[1], rest: 0.0 },
                Spring { i: 0, j: None, k: self.k_theta, rest: self.z_theta0 },
            ],
            contacts,
        })
    }
}
