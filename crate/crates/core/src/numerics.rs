//! Shared numeric substrate: central finite differences, damped Newton
//! refinement, fixed-step RK4 integration and a few small dense symmetric
//! helpers built on `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Central second-order finite-difference scheme.
///
/// The step along coordinate `j` is `step_h * max(1, |x_j|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdScheme {
    pub step_h: f64,
}

impl Default for FdScheme {
    fn default() -> Self {
        FdScheme { step_h: 1e-5 }
    }
}

impl FdScheme {
    pub fn new(step_h: f64) -> Result<Self> {
        if !(step_h > 0.0 && step_h.is_finite()) {
            return Err(Error::config(format!("fd step must be positive, got {step_h}")));
        }
        Ok(FdScheme { step_h })
    }

    #[inline]
    pub fn step_for(&self, xj: f64) -> f64 {
        self.step_h * xj.abs().max(1.0)
    }
}

/// Jacobian of a vector-valued function by central differences. Column `j`
/// is `(f(x + h e_j) - f(x - h e_j)) / 2h`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, scheme: FdScheme) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = x.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut xp = x.clone();
    for j in 0..n {
        let h = scheme.step_for(x[j]);
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        if fp.len() != fm.len() {
            return Err(Error::Dimension {
                what: "fd_jacobian output",
                expected: fp.len(),
                got: fm.len(),
            });
        }
        let col = (fp - fm) / (2.0 * h);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Differentiation { coordinate: j });
        }
        cols.push(col);
    }
    let m = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(m, n, |i, j| cols[j][i]))
}

/// Gradient of a scalar function by central differences.
pub fn fd_gradient<F>(f: F, x: &DVector<f64>, scheme: FdScheme) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let jac = fd_jacobian(|p| Ok(DVector::from_element(1, f(p)?)), x, scheme)?;
    Ok(jac.row(0).transpose())
}

/// Hessian of a scalar function from function values only, using the
/// four-point mixed central stencil. Independent of any gradient code path.
pub fn fd_hessian<F>(f: F, x: &DVector<f64>, scheme: FdScheme) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut p = x.clone();
    let f0 = f(x)?;
    for i in 0..n {
        let hi = scheme.step_for(x[i]);
        p[i] = x[i] + hi;
        let fp = f(&p)?;
        p[i] = x[i] - hi;
        let fm = f(&p)?;
        p[i] = x[i];
        let d = (fp - 2.0 * f0 + fm) / (hi * hi);
        if !d.is_finite() {
            return Err(Error::Differentiation { coordinate: i });
        }
        h[(i, i)] = d;
        for j in 0..i {
            let hj = scheme.step_for(x[j]);
            let mut eval = |si: f64, sj: f64| {
                p[i] = x[i] + si * hi;
                p[j] = x[j] + sj * hj;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let fpp = eval(1.0, 1.0)?;
            let fpm = eval(1.0, -1.0)?;
            let fmp = eval(-1.0, 1.0)?;
            let fmm = eval(-1.0, -1.0)?;
            let d = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            if !d.is_finite() {
                return Err(Error::Differentiation { coordinate: i });
            }
            h[(i, j)] = d;
            h[(j, i)] = d;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    /// Number of times the step may be halved when the residual norm fails
    /// to decrease.
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            residual_tol: 1e-8,
            max_iters: 50,
            damping: 1.0,
            max_halvings: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub z: DVector<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Damped Newton iteration `z <- z - damping * J(z)^-1 r(z)`.
///
/// Running out of iterations is reported through `converged = false`; only a
/// singular jacobian is an error.
pub fn newton_refine<R, J>(
    residual: R,
    jac: J,
    z0: &DVector<f64>,
    settings: NewtonSettings,
) -> Result<NewtonOutcome>
where
    R: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    newton_refine_with(
        |z| {
            let r = residual(z)?;
            Ok((r, None))
        },
        |z| jac(z),
        z0,
        settings,
    )
}

/// Newton variant for callers that obtain the residual and jacobian from one
/// evaluation. `eval` may return the jacobian alongside the residual; when it
/// does not, `jac` is called.
pub fn newton_refine_with<E, J>(
    eval: E,
    jac: J,
    z0: &DVector<f64>,
    settings: NewtonSettings,
) -> Result<NewtonOutcome>
where
    E: Fn(&DVector<f64>) -> Result<(DVector<f64>, Option<DMatrix<f64>>)>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let mut z = z0.clone();
    let (mut r, mut j_cached) = eval(&z)?;
    let mut norm = r.norm();
    let mut iterations = 0;
    while iterations < settings.max_iters {
        if !norm.is_finite() {
            break;
        }
        if norm <= settings.residual_tol {
            return Ok(NewtonOutcome {
                z,
                residual_norm: norm,
                converged: true,
                iterations,
            });
        }
        let j = match j_cached.take() {
            Some(j) => j,
            None => jac(&z)?,
        };
        let step = j
            .lu()
            .solve(&r)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or(Error::SingularJacobian { iteration: iterations })?;
        iterations += 1;

        let mut alpha = settings.damping;
        let mut accepted = None;
        for attempt in 0..=settings.max_halvings {
            let trial = &z - &step * alpha;
            let (tr, tj) = eval(&trial)?;
            let tn = tr.norm();
            if tn.is_finite() && (tn < norm || attempt == settings.max_halvings) {
                accepted = Some((trial, tr, tj, tn));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, tr, tj, tn)) => {
                z = trial;
                r = tr;
                j_cached = tj;
                norm = tn;
            }
            None => break,
        }
    }
    let converged = norm.is_finite() && norm <= settings.residual_tol;
    Ok(NewtonOutcome {
        z,
        residual_norm: norm,
        converged,
        iterations,
    })
}

/// One classical RK4 step. `k1` may be supplied when the caller already has
/// the rate at `(t, x)`.
pub fn rk4_step<F>(
    rhs: &F,
    t: f64,
    x: &DVector<f64>,
    dt: f64,
    k1: Option<DVector<f64>>,
) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = match k1 {
        Some(k) => k,
        None => rhs(t, x)?,
    };
    let k2 = rhs(t + 0.5 * dt, &(x + &k1 * (0.5 * dt)))?;
    let k3 = rhs(t + 0.5 * dt, &(x + &k2 * (0.5 * dt)))?;
    let k4 = rhs(t + dt, &(x + &k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<(f64, DVector<f64>)>,
    /// True when the last sample is the state where the stop predicate fired.
    pub stopped: bool,
}

/// Fixed-step RK4 over `t_span`, ending early at the first state for which
/// `stop` holds (that state is the last sample).
pub fn integrate_fixed_step<F, S>(
    rhs: F,
    state0: &DVector<f64>,
    t_span: (f64, f64),
    dt: f64,
    stop: S,
) -> Result<Trace>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
    S: Fn(&DVector<f64>) -> bool,
{
    if !(dt > 0.0) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    let (t0, t1) = t_span;
    let mut t = t0;
    let mut x = state0.clone();
    let mut samples = vec![(t, x.clone())];
    if stop(&x) {
        return Ok(Trace { samples, stopped: true });
    }
    let guarded = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>> {
        let k = rhs(t, x)?;
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                t,
                last_state: x.iter().copied().collect(),
            });
        }
        Ok(k)
    };
    while t < t1 {
        let h = dt.min(t1 - t);
        if h <= f64::EPSILON * t1.abs().max(1.0) {
            break;
        }
        let next = rk4_step(&guarded, t, &x, h, None).map_err(|e| match e {
            Error::Integration { t, .. } => Error::Integration {
                t,
                last_state: x.iter().copied().collect(),
            },
            other => other,
        })?;
        t += h;
        x = next;
        samples.push((t, x.clone()));
        if stop(&x) {
            return Ok(Trace { samples, stopped: true });
        }
    }
    Ok(Trace { samples, stopped: false })
}

/// Cholesky-based determinant of a symmetric matrix. `None` when the matrix
/// is not positive definite.
pub fn spd_determinant(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut det = 1.0;
    for i in 0..m.nrows() {
        det *= l[(i, i)] * l[(i, i)];
    }
    Some(det)
}

/// Ascending eigenvalues and matching eigenvectors (as columns) of a
/// symmetric matrix.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Largest absolute asymmetry relative to the largest entry.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() / scale
}
