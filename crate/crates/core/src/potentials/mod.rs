//! Manipulation potentials `W(z, u)` and their derivative bundles.
//!
//! Every model works on the stacked coordinate vector `x = [z; u]`. A model
//! provides its energy and, when it can, an analytic gradient and Hessian.
//! Missing derivatives are filled in by central differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{fd_gradient, fd_hessian, fd_jacobian, FdScheme};

pub mod bookshelf;
pub mod clip;
pub mod contact;
pub mod pendulum;
pub mod quadratic;

pub use bookshelf::BookshelfParams;
pub use clip::ClipParams;
pub use contact::{Attachment, ContactBody, ContactSet, Spring, SpringContactModel};
pub use pendulum::{PendulumModel, PendulumParams};
pub use quadratic::QuadraticModel;

/// State dimension `n` and control dimension `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub k: usize,
}

impl Dims {
    pub fn total(&self) -> usize {
        self.n + self.k
    }
}

/// One point `(z, u)` of the ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPoint {
    pub z: DVector<f64>,
    pub u: DVector<f64>,
}

impl ConfigPoint {
    pub fn new(z: DVector<f64>, u: DVector<f64>) -> Self {
        ConfigPoint { z, u }
    }

    pub fn from_slices(z: &[f64], u: &[f64]) -> Self {
        ConfigPoint {
            z: DVector::from_column_slice(z),
            u: DVector::from_column_slice(u),
        }
    }

    pub fn stacked(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.z.len() + self.u.len());
        x.rows_mut(0, self.z.len()).copy_from(&self.z);
        x.rows_mut(self.z.len(), self.u.len()).copy_from(&self.u);
        x
    }

    pub fn split(x: &DVector<f64>, dims: Dims) -> Self {
        ConfigPoint {
            z: x.rows(0, dims.n).into_owned(),
            u: x.rows(dims.n, dims.k).into_owned(),
        }
    }
}

/// `W` with every first and second derivative block at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub w: f64,
    pub grad_z: DVector<f64>,
    pub grad_u: DVector<f64>,
    pub h_zz: DMatrix<f64>,
    /// `K x N` mixed block `d2W/du dz`.
    pub h_uz: DMatrix<f64>,
    pub h_uu: DMatrix<f64>,
}

impl DerivativeBundle {
    pub fn from_full(w: f64, grad: &DVector<f64>, hess: &DMatrix<f64>, dims: Dims) -> Self {
        let (n, k) = (dims.n, dims.k);
        DerivativeBundle {
            w,
            grad_z: grad.rows(0, n).into_owned(),
            grad_u: grad.rows(n, k).into_owned(),
            h_zz: hess.view((0, 0), (n, n)).into_owned(),
            h_uz: hess.view((n, 0), (k, n)).into_owned(),
            h_uu: hess.view((n, n), (k, k)).into_owned(),
        }
    }

    /// Force the robot exerts, `-dW/du`.
    pub fn control_force(&self) -> DVector<f64> {
        -&self.grad_u
    }

    pub fn residual_norm(&self) -> f64 {
        self.grad_z.norm()
    }
}

/// A smooth manipulation potential over `x = [z; u]`.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dims(&self) -> Dims;

    fn energy(&self, x: &DVector<f64>) -> Result<f64>;

    /// Analytic `(W, dW/dx)` when the model has one.
    fn gradient(&self, _x: &DVector<f64>) -> Option<Result<(f64, DVector<f64>)>> {
        None
    }

    /// Analytic Hessian when the model has one.
    fn hessian(&self, _x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        None
    }

    fn has_analytic_gradient(&self) -> bool {
        false
    }

    fn has_analytic_hessian(&self) -> bool {
        false
    }

    /// Maps the state onto its canonical chart (angles into `(-pi, pi]`).
    fn wrap_state(&self, _z: &mut DVector<f64>) {}

    /// Number of contact terms dropped because their proxy solve failed.
    fn proxy_failures(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::config("bounds lo/hi lengths differ"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::config("bounds need lo <= hi elementwise"));
        }
        Ok(Bounds {
            lo: DVector::from_vec(lo),
            hi: DVector::from_vec(hi),
        })
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        v.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// A constructed scenario: a potential plus the metadata the planner needs.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    pub name: String,
    pub dims: Dims,
    pub potential: Arc<dyn Potential>,
    pub control_bounds: Bounds,
    pub state_bounds: Bounds,
    pub analytic_derivatives_available: bool,
    pub state_names: Vec<String>,
    pub control_names: Vec<String>,
}

impl ScenarioModel {
    pub fn new(
        name: impl Into<String>,
        potential: Arc<dyn Potential>,
        control_bounds: Bounds,
        state_bounds: Bounds,
        state_names: Vec<String>,
        control_names: Vec<String>,
    ) -> Result<Self> {
        let dims = potential.dims();
        let analytic = potential.has_analytic_hessian();
        if control_bounds.dim() != dims.k {
            return Err(Error::Dimension {
                what: "control_bounds",
                expected: dims.k,
                got: control_bounds.dim(),
            });
        }
        if state_bounds.dim() != dims.n {
            return Err(Error::Dimension {
                what: "state_bounds",
                expected: dims.n,
                got: state_bounds.dim(),
            });
        }
        Ok(ScenarioModel {
            name: name.into(),
            dims,
            potential,
            control_bounds,
            state_bounds,
            analytic_derivatives_available: analytic,
            state_names,
            control_names,
        })
    }

    pub fn check_point(&self, p: &ConfigPoint) -> Result<()> {
        if p.z.len() != self.dims.n {
            return Err(Error::Dimension {
                what: "state",
                expected: self.dims.n,
                got: p.z.len(),
            });
        }
        if p.u.len() != self.dims.k {
            return Err(Error::Dimension {
                what: "control",
                expected: self.dims.k,
                got: p.u.len(),
            });
        }
        Ok(())
    }

    pub fn energy(&self, p: &ConfigPoint) -> Result<f64> {
        self.check_point(p)?;
        self.potential.energy(&p.stacked())
    }

    pub fn wrap_state(&self, z: &mut DVector<f64>) {
        self.potential.wrap_state(z);
    }

    /// `(W, dW/dx)` using the analytic gradient when available.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        match self.potential.gradient(x) {
            Some(r) => r,
            None => {
                let w = self.potential.energy(x)?;
                let g = fd_gradient(|p| self.potential.energy(p), x, FdScheme::default())?;
                Ok((w, g))
            }
        }
    }

    /// `dW/dz` and `d2W/dz2` only; what Newton needs.
    pub fn state_block(&self, p: &ConfigPoint) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        self.check_point(p)?;
        let n = self.dims.n;
        let x = p.stacked();
        if self.potential.has_analytic_hessian() {
            let h = self.potential.hessian(&x).expect("analytic hessian")?;
            let (w, g) = self.gradient(&x)?;
            return Ok((w, g.rows(0, n).into_owned(), h.view((0, 0), (n, n)).into_owned()));
        }
        let (w, g) = self.gradient(&x)?;
        let u = p.u.clone();
        let grad_z = |z: &DVector<f64>| -> Result<DVector<f64>> {
            let xp = ConfigPoint::new(z.clone(), u.clone()).stacked();
            Ok(self.gradient(&xp)?.1.rows(0, n).into_owned())
        };
        let h = fd_jacobian(grad_z, &p.z, FdScheme::default())?;
        Ok((w, g.rows(0, n).into_owned(), symmetrize(&h)))
    }

    pub fn bundle(&self, p: &ConfigPoint) -> Result<DerivativeBundle> {
        evaluate_bundle(self, p)
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Full derivative bundle at `point`: analytic where the model supplies it,
/// otherwise central differences of the gradient (or of `W`).
pub fn evaluate_bundle(model: &ScenarioModel, point: &ConfigPoint) -> Result<DerivativeBundle> {
    model.check_point(point)?;
    let x = point.stacked();
    let (w, g) = model.gradient(&x)?;
    let h = match model.potential.hessian(&x) {
        Some(h) => h?,
        None => {
            if model.potential.has_analytic_gradient() {
                let h = fd_jacobian(|p| Ok(model.gradient(p)?.1), &x, FdScheme::default())?;
                symmetrize(&h)
            } else {
                let outer = FdScheme::new(1e-4)?;
                let h = fd_jacobian(
                    |p| fd_gradient(|q| model.potential.energy(q), p, FdScheme::new(1e-6)?),
                    &x,
                    outer,
                )?;
                symmetrize(&h)
            }
        }
    };
    Ok(DerivativeBundle::from_full(w, &g, &h, model.dims))
}

/// Independent oracle: gradient and Hessian from energy values only, never
/// touching any analytic derivative code.
pub fn finite_difference_bundle(
    model: &ScenarioModel,
    point: &ConfigPoint,
    grad_scheme: FdScheme,
    hess_scheme: FdScheme,
) -> Result<DerivativeBundle> {
    model.check_point(point)?;
    let x = point.stacked();
    let f = |p: &DVector<f64>| model.potential.energy(p);
    let w = f(&x)?;
    let g = fd_gradient(f, &x, grad_scheme)?;
    let h = fd_hessian(f, &x, hess_scheme)?;
    Ok(DerivativeBundle::from_full(w, &g, &h, model.dims))
}

/// Relative difference `|a - b| / max(|b|, floor)` in the max norm.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    (a - b).amax() / b.amax().max(floor)
}

#[cfg(test)]
mod tests;
