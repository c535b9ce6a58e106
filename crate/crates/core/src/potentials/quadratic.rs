use nalgebra::{DMatrix, DVector};

use super::{Dims, Potential};
use crate::error::{Error, Result};

/// Synthetic `W = 1/2 z'Az + z'Bu + 1/2 u'Cu`. Its reduced Hessian is
/// `C - B'A^-1 B` everywhere, which makes it the reference case for the
/// metric code.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl QuadraticModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let k = c.nrows();
        if a.ncols() != n || c.ncols() != k || b.nrows() != n || b.ncols() != k {
            return Err(Error::config(format!(
                "quadratic blocks have inconsistent shapes: A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(QuadraticModel {
            a: (&a + a.transpose()) * 0.5,
            b,
            c: (&c + c.transpose()) * 0.5,
        })
    }

    /// The exact reduced Hessian `C - B'A^-1 B`.
    pub fn schur(&self) -> Option<DMatrix<f64>> {
        let ainv_b = self.a.clone().lu().solve(&self.b)?;
        Some(&self.c - self.b.transpose() * ainv_b)
    }

    fn full_hessian(&self) -> DMatrix<f64> {
        let (n, k) = (self.a.nrows(), self.c.nrows());
        let mut h = DMatrix::zeros(n + k, n + k);
        h.view_mut((0, 0), (n, n)).copy_from(&self.a);
        h.view_mut((0, n), (n, k)).copy_from(&self.b);
        h.view_mut((n, 0), (k, n)).copy_from(&self.b.transpose());
        h.view_mut((n, n), (k, k)).copy_from(&self.c);
        h
    }
}

impl Potential for QuadraticModel {
    fn dims(&self) -> Dims {
        Dims {
            n: self.a.nrows(),
            k: self.c.nrows(),
        }
    }

    fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * x.dot(&(self.full_hessian() * x)))
    }

    fn gradient(&self, x: &DVector<f64>) -> Option<Result<(f64, DVector<f64>)>> {
        let h = self.full_hessian();
        let g = &h * x;
        Some(Ok((0.5 * x.dot(&g), g)))
    }

    fn hessian(&self, _x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        Some(Ok(self.full_hessian()))
    }

    fn has_analytic_gradient(&self) -> bool {
        true
    }

    fn has_analytic_hessian(&self) -> bool {
        true
    }
}
