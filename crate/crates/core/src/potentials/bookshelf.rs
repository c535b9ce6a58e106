//! Inserting a book between two neighbours on a shelf.
//!
//! `z = [book (x, y, theta), neighbour 1 (x, y, theta), neighbour 2 (x, y,
//! theta)]`, `u = (x, y, theta)` of the gripper. The book hangs from the
//! gripper by a diagonal spring; each neighbour is tied to its rest pose by
//! a spring that is soft along the shelf and stiff otherwise.

use serde::{Deserialize, Serialize};

use super::contact::{ContactSet, Spring, SpringContactModel};
use super::Dims;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BookshelfParams {
    pub k_c: [f64; 3],
    pub k_1: [f64; 3],
    pub k_2: [f64; 3],
    pub rest_1: [f64; 3],
    pub rest_2: [f64; 3],
    /// Width of the held book.
    pub w_1: f64,
    /// Width of the slot between the neighbours at rest; narrower than the
    /// book, so it cannot go straight in.
    pub w_2: f64,
}

impl BookshelfParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let stiff = self
            .k_c
            .iter()
            .map(|v| ("k_c", *v))
            .chain(self.k_1.iter().map(|v| ("k_1", *v)))
            .chain(self.k_2.iter().map(|v| ("k_2", *v)));
        for (name, v) in stiff {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("params.{name} entries must be positive (got {v})"));
            }
        }
        if !(self.w_2 > 0.0 && self.w_2 < self.w_1) {
            errs.push(format!(
                "params.w_2 must satisfy 0 < w_2 < w_1 (got w_2 = {}, w_1 = {})",
                self.w_2, self.w_1
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn build(&self, contacts: ContactSet) -> Result<SpringContactModel> {
        self.validate()?;
        let mut springs = Vec::with_capacity(9);
        for a in 0..3 {
            springs.push(Spring { i: 9 + a, j: Some(a), k: self.k_c[a], rest: 0.0 });
            springs.push(Spring { i: 3 + a, j: None, k: self.k_1[a], rest: self.rest_1[a] });
            springs.push(Spring { i: 6 + a, j: None, k: self.k_2[a], rest: self.rest_2[a] });
        }
        Ok(SpringContactModel {
            dims: Dims { n: 9, k: 3 },
            springs,
            contacts,
        })
    }
}
