//! The equilibrium manifold `dW/dz = 0`: solving for equilibria, enumerating
//! branches, the haptic metric and tracking a point along the manifold while
//! the control moves.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{newton_refine_with, spd_determinant, sym_eigen, NewtonSettings};
use crate::potentials::{ConfigPoint, DerivativeBundle, ScenarioModel};

/// Condition number of `H_zz` above which the metric is refused.
pub const MAX_METRIC_CONDITION: f64 = 1e12;

/// Default radius under which two equilibria count as the same branch.
pub const DEDUP_RADIUS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    pub point: ConfigPoint,
    pub w: f64,
    pub residual_norm: f64,
    /// `det(H_zz)`; may be negative or zero off the stable part.
    pub hess_det: f64,
    /// `H_zz` positive definite.
    pub stable: bool,
    pub converged: bool,
}

impl EquilibriumPoint {
    /// Labels `point` as-is, without any Newton refinement.
    pub fn at(model: &ScenarioModel, point: ConfigPoint) -> Result<Self> {
        let (w, grad_z, h_zz) = model.state_block(&point)?;
        Ok(Self::label(point, w, &grad_z, &h_zz, f64::INFINITY))
    }

    fn label(point: ConfigPoint, w: f64, grad_z: &DVector<f64>, h_zz: &DMatrix<f64>, tol: f64) -> Self {
        let residual_norm = grad_z.norm();
        let (hess_det, stable) = match spd_determinant(h_zz) {
            Some(d) => (d, true),
            None => (h_zz.clone().lu().determinant(), false),
        };
        EquilibriumPoint {
            point,
            w,
            residual_norm,
            hess_det,
            stable,
            converged: residual_norm <= tol,
        }
    }
}

/// Newton solve of `dW/dz (z, u) = 0` from `z_seed`.
///
/// Non-convergence comes back as data (`converged = false`); so does a
/// singular `H_zz` met during the iteration, in which case the seed is
/// returned.
pub fn solve_equilibrium(
    model: &ScenarioModel,
    u: &DVector<f64>,
    z_seed: &DVector<f64>,
    settings: NewtonSettings,
) -> Result<EquilibriumPoint> {
    let seed = ConfigPoint::new(z_seed.clone(), u.clone());
    model.check_point(&seed)?;
    let eval = |z: &DVector<f64>| -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let (_, g, h) = model.state_block(&ConfigPoint::new(z.clone(), u.clone()))?;
        Ok((g, Some(h)))
    };
    let jac = |z: &DVector<f64>| -> Result<DMatrix<f64>> {
        Ok(model.state_block(&ConfigPoint::new(z.clone(), u.clone()))?.2)
    };
    let z = match newton_refine_with(eval, jac, z_seed, settings) {
        Ok(out) => out.z,
        Err(Error::SingularJacobian { .. }) => {
            let (w, g, h) = model.state_block(&seed)?;
            let mut eq = EquilibriumPoint::label(seed, w, &g, &h, settings.residual_tol);
            eq.converged = false;
            return Ok(eq);
        }
        Err(e) => return Err(e),
    };
    let mut z = z;
    model.wrap_state(&mut z);
    let point = ConfigPoint::new(z, u.clone());
    let (w, g, h) = model.state_block(&point)?;
    Ok(EquilibriumPoint::label(point, w, &g, &h, settings.residual_tol))
}

/// Longest state step (chart units) the descent takes at once, so it cannot
/// jump through thin bodies.
pub const MAX_DESCENT_STEP: f64 = 0.05;
const MAX_DESCENT_ITERS: usize = 200;
/// Residual at which the descent hands over to Newton on `dW/dz`.
const DESCENT_HANDOVER: f64 = 1e-6;

/// Slides from `z_seed` downhill in `W(., u)` to a local minimum, then
/// polishes it with [`solve_equilibrium`].
///
/// The descent uses Newton steps on a shifted `H_zz + mu I` that is made
/// positive definite, a capped step length and an Armijo backtrack on `W`.
/// Stable equilibria are exactly the local minima, so this reaches them from
/// much wider basins than a residual Newton solve.
pub fn settle_equilibrium(
    model: &ScenarioModel,
    u: &DVector<f64>,
    z_seed: &DVector<f64>,
    settings: NewtonSettings,
) -> Result<EquilibriumPoint> {
    let at = |z: &DVector<f64>| ConfigPoint::new(z.clone(), u.clone());
    model.check_point(&at(z_seed))?;
    let n = z_seed.len();
    let mut z = z_seed.clone();
    let (mut w, mut g, mut h) = model.state_block(&at(&z))?;
    for _ in 0..MAX_DESCENT_ITERS {
        if !(g.norm() > DESCENT_HANDOVER) {
            break;
        }
        let scale = h.diagonal().amax().max(1.0);
        let mut mu = 0.0;
        let dir = loop {
            let shifted = &h + DMatrix::identity(n, n) * mu;
            if let Some(ch) = shifted.cholesky() {
                break ch.solve(&g);
            }
            mu = if mu == 0.0 { 1e-10 * scale } else { mu * 10.0 };
            if mu > 1e10 * scale {
                break g.clone();
            }
        };
        let mut step = -dir;
        let len = step.norm();
        if len > MAX_DESCENT_STEP {
            step *= MAX_DESCENT_STEP / len;
        }
        let slope = g.dot(&step);
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = &z + &step * alpha;
            let wt = model.energy(&at(&trial))?;
            if wt.is_finite() && wt <= w + 1e-4 * alpha * slope {
                if (&trial - &z).norm() <= 1e-13 * (1.0 + z.norm()) {
                    break;
                }
                z = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
        (w, g, h) = model.state_block(&at(&z))?;
    }
    solve_equilibrium(model, u, &z, settings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSet {
    pub control: DVector<f64>,
    /// Stable equilibria, sorted by `W` ascending.
    pub equilibria: Vec<EquilibriumPoint>,
    pub seeds_used: usize,
}

/// Distance between two states on the model's chart (angles wrapped).
pub fn state_distance(model: &ScenarioModel, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let mut d = a - b;
    model.wrap_state(&mut d);
    d.norm()
}

/// Every distinct stable equilibrium inside the state bounds reachable from
/// `seeds` by [`settle_equilibrium`].
pub fn enumerate_branches(
    model: &ScenarioModel,
    u: &DVector<f64>,
    seeds: &[DVector<f64>],
    settings: NewtonSettings,
    dedup_radius: f64,
) -> Result<BranchSet> {
    if seeds.is_empty() {
        return Err(Error::config("branch enumeration needs at least one seed"));
    }
    let solved: Vec<_> = seeds
        .par_iter()
        .map(|s| settle_equilibrium(model, u, s, settings))
        .collect();
    let mut found: Vec<EquilibriumPoint> = Vec::new();
    for r in solved {
        let eq = match r {
            Ok(eq) if eq.converged && eq.stable && model.state_bounds.contains(&eq.point.z) => eq,
            Ok(_) | Err(Error::Differentiation { .. }) | Err(Error::Integration { .. }) => continue,
            Err(e) => return Err(e),
        };
        match found
            .iter_mut()
            .find(|f| state_distance(model, &f.point.z, &eq.point.z) <= dedup_radius)
        {
            Some(f) if eq.w < f.w => *f = eq,
            Some(_) => {}
            None => found.push(eq),
        }
    }
    found.sort_by(|a, b| a.w.total_cmp(&b.w));
    Ok(BranchSet {
        control: u.clone(),
        equilibria: found,
        seeds_used: seeds.len(),
    })
}

/// `n` equally spaced angles over `[-pi, pi)` for a one-angle state.
pub fn angular_seeds(n: usize) -> Vec<DVector<f64>> {
    (0..n)
        .map(|i| {
            let a = -std::f64::consts::PI + std::f64::consts::TAU * i as f64 / n as f64;
            DVector::from_element(1, a)
        })
        .collect()
}

/// Full lattice with `per_axis` points per coordinate spanning `[lo, hi]`.
pub fn lattice_seeds(lo: &DVector<f64>, hi: &DVector<f64>, per_axis: usize) -> Vec<DVector<f64>> {
    let n = lo.len();
    let per_axis = per_axis.max(1);
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            DVector::from_iterator(
                n,
                (0..n).map(|a| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    if per_axis == 1 {
                        0.5 * (lo[a] + hi[a])
                    } else {
                        lo[a] + (hi[a] - lo[a]) * i as f64 / (per_axis - 1) as f64
                    }
                }),
            )
        })
        .collect()
}

/// Reduced Hessian `G` and metric tensor `G^2` at one manifold point.
#[derive(Debug, Clone, PartialEq)]
pub struct HapticMetric {
    pub g: DMatrix<f64>,
    pub g_squared: DMatrix<f64>,
}

impl HapticMetric {
    /// `sqrt(v' G^2 v)`, the metric speed of a control velocity.
    pub fn speed(&self, v: &DVector<f64>) -> f64 {
        (&self.g * v).norm()
    }
}

/// `H_zz^-1 M` by Cholesky, falling back to LU off the stable part.
fn solve_hzz(h_zz: &DMatrix<f64>, m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    match h_zz.clone().cholesky() {
        Some(c) => Some(c.solve(m)),
        None => h_zz.clone().lu().solve(m),
    }
}

pub fn condition_number(h_zz: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eigen(h_zz);
    let abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    let max = abs.iter().cloned().fold(0.0, f64::max);
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn metric_from_bundle(b: &DerivativeBundle) -> Result<HapticMetric> {
    let condition = condition_number(&b.h_zz);
    if !(condition <= MAX_METRIC_CONDITION) {
        return Err(Error::NearSingularMetric { condition });
    }
    let x = solve_hzz(&b.h_zz, &b.h_uz.transpose()).ok_or(Error::NearSingularMetric { condition })?;
    let g = &b.h_uu - &b.h_uz * x;
    let g = (&g + g.transpose()) * 0.5;
    let g_squared = &g * &g;
    Ok(HapticMetric { g, g_squared })
}

pub fn haptic_metric(model: &ScenarioModel, eq: &EquilibriumPoint) -> Result<HapticMetric> {
    metric_from_bundle(&model.bundle(&eq.point)?)
}

/// Obstacle test on a precomputed `H_zz`: `det <= lambda` or not positive
/// definite.
pub fn hzz_is_obstacle(h_zz: &DMatrix<f64>, lambda: f64) -> bool {
    match spd_determinant(h_zz) {
        Some(d) => !(d > lambda),
        None => true,
    }
}

pub fn is_haptic_obstacle(model: &ScenarioModel, point: &ConfigPoint, lambda: f64) -> Result<bool> {
    if !(lambda > 0.0) {
        return Err(Error::config(format!("lambda must be positive, got {lambda}")));
    }
    let (_, _, h) = model.state_block(point)?;
    Ok(hzz_is_obstacle(&h, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSettings {
    /// Drift-correction gain.
    pub eta: f64,
    pub dt: f64,
    pub lambda: f64,
    #[serde(skip)]
    pub newton: NewtonSettings,
}

impl Default for TrackSettings {
    fn default() -> Self {
        TrackSettings {
            eta: 10.0,
            dt: 1e-3,
            lambda: 1e-3,
            newton: NewtonSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    DistanceReached,
    Obstacle,
    ControlBounds,
    TargetReached,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::DistanceReached => "distance-reached",
            StopReason::Obstacle => "obstacle",
            StopReason::ControlBounds => "control-bounds",
            StopReason::TargetReached => "target-reached",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSample {
    /// Arc length travelled in control space.
    pub t: f64,
    pub z: DVector<f64>,
    pub u: DVector<f64>,
    pub phi: f64,
    pub w: f64,
    pub residual_norm: f64,
    pub hess_det: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackTrace {
    pub samples: Vec<TrackSample>,
    pub stop_reason: StopReason,
    pub final_point: EquilibriumPoint,
    /// Why integration broke down, when it did.
    pub diagnostic: Option<String>,
}

pub fn haptic_distance(trace: &TrackTrace) -> f64 {
    trace.samples.last().map_or(0.0, |s| s.phi)
}

struct Rate {
    dz: DVector<f64>,
    dphi: f64,
}

/// Right-hand side of the tracking ODE for unit control velocity `v`.
fn rate(b: &DerivativeBundle, v: &DVector<f64>, eta: f64) -> Option<Rate> {
    let n = b.grad_z.len();
    let mut rhs = DMatrix::zeros(n, 2);
    rhs.set_column(0, &(b.h_uz.transpose() * v));
    rhs.set_column(1, &b.grad_z);
    let sol = solve_hzz(&b.h_zz, &rhs)?;
    let feed = sol.column(0);
    let dz = -(feed + sol.column(1) * eta);
    let gv = &b.h_uu * v - &b.h_uz * feed;
    if dz.iter().chain(gv.iter()).any(|x| !x.is_finite()) {
        return None;
    }
    Some(Rate { dz, dphi: gv.norm() })
}

/// Largest `s >= 0` with `u + s v` inside the box.
fn box_exit(u: &DVector<f64>, v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    let mut s = f64::INFINITY;
    for i in 0..u.len() {
        if v[i] > 0.0 {
            s = s.min((hi[i] - u[i]) / v[i]);
        } else if v[i] < 0.0 {
            s = s.min((lo[i] - u[i]) / v[i]);
        }
    }
    s.max(0.0)
}

/// Moves `start` along the manifold while `u` travels in a straight line
/// towards `u_target` at unit speed, accumulating haptic distance.
pub fn track(
    model: &ScenarioModel,
    start: &EquilibriumPoint,
    u_target: &DVector<f64>,
    epsilon: f64,
    settings: &TrackSettings,
) -> Result<TrackTrace> {
    if !(settings.dt > 0.0) {
        return Err(Error::config(format!("dt must be positive, got {}", settings.dt)));
    }
    if !(epsilon > 0.0) {
        return Err(Error::config(format!("epsilon must be positive, got {epsilon}")));
    }
    let u0 = start.point.u.clone();
    let delta = u_target - &u0;
    let length = delta.norm();
    if length == 0.0 {
        return Err(Error::config("tracking target equals the start control"));
    }
    let v = delta / length;
    let exit = box_exit(&u0, &v, &model.control_bounds.lo, &model.control_bounds.hi);
    let (span, end_reason) = if exit < length {
        (exit, StopReason::ControlBounds)
    } else {
        (length, StopReason::TargetReached)
    };

    let mut z = start.point.z.clone();
    let mut t = 0.0;
    let mut phi = 0.0;
    let mut b = model.bundle(&start.point)?;
    let first_det = spd_determinant(&b.h_zz).unwrap_or(f64::NAN);
    let mut samples = vec![TrackSample {
        t,
        z: z.clone(),
        u: u0.clone(),
        phi,
        w: b.w,
        residual_norm: b.grad_z.norm(),
        hess_det: first_det,
    }];
    let at = |t: f64| &u0 + &v * t;
    let stage = |z: &DVector<f64>, t: f64| -> Result<Option<(DerivativeBundle, Rate)>> {
        let b = model.bundle(&ConfigPoint::new(z.clone(), at(t)))?;
        Ok(rate(&b, &v, settings.eta).map(|r| (b, r)))
    };
    let mut diagnostic = None;
    let mut reason = end_reason;

    if hzz_is_obstacle(&b.h_zz, settings.lambda) {
        reason = StopReason::Obstacle;
    } else {
        loop {
            let h = settings.dt.min(span - t);
            if h <= 1e-12 * span.max(1.0) {
                break;
            }
            let step = (|| -> Result<Option<(DVector<f64>, f64)>> {
                let Some(k1) = rate(&b, &v, settings.eta) else { return Ok(None) };
                let Some((_, k2)) = stage(&(&z + &k1.dz * (0.5 * h)), t + 0.5 * h)? else { return Ok(None) };
                let Some((_, k3)) = stage(&(&z + &k2.dz * (0.5 * h)), t + 0.5 * h)? else { return Ok(None) };
                let Some((_, k4)) = stage(&(&z + &k3.dz * h), t + h)? else { return Ok(None) };
                let dz = (k1.dz + k2.dz * 2.0 + k3.dz * 2.0 + k4.dz) * (h / 6.0);
                let dphi = (k1.dphi + 2.0 * k2.dphi + 2.0 * k3.dphi + k4.dphi) * (h / 6.0);
                Ok(Some((&z + dz, dphi)))
            })();
            let (z_next, dphi) = match step {
                Ok(Some(s)) => s,
                Ok(None) => {
                    diagnostic = Some(format!("singular or non-finite rate at t = {t}"));
                    reason = StopReason::Obstacle;
                    break;
                }
                Err(e @ (Error::Differentiation { .. } | Error::Integration { .. } | Error::Geometry(_))) => {
                    diagnostic = Some(e.to_string());
                    reason = StopReason::Obstacle;
                    break;
                }
                Err(e) => return Err(e),
            };
            if z_next.iter().any(|x| !x.is_finite()) {
                diagnostic = Some(format!("non-finite state at t = {}", t + h));
                reason = StopReason::Obstacle;
                break;
            }
            t += h;
            z = z_next;
            phi += dphi.max(0.0);
            let u = at(t);
            b = match model.bundle(&ConfigPoint::new(z.clone(), u.clone())) {
                Ok(b) => b,
                Err(e @ (Error::Differentiation { .. } | Error::Geometry(_))) => {
                    diagnostic = Some(e.to_string());
                    reason = StopReason::Obstacle;
                    break;
                }
                Err(e) => return Err(e),
            };
            let det = spd_determinant(&b.h_zz);
            samples.push(TrackSample {
                t,
                z: z.clone(),
                u,
                phi,
                w: b.w,
                residual_norm: b.grad_z.norm(),
                hess_det: det.unwrap_or(f64::NAN),
            });
            if hzz_is_obstacle(&b.h_zz, settings.lambda) {
                reason = StopReason::Obstacle;
                break;
            }
            if phi >= epsilon {
                reason = StopReason::DistanceReached;
                break;
            }
        }
    }

    let last = samples.last().expect("at least the start sample");
    let mut z_last = last.z.clone();
    model.wrap_state(&mut z_last);
    let raw = |z: DVector<f64>| EquilibriumPoint::at(model, ConfigPoint::new(z, last.u.clone()));
    let final_point = if reason == StopReason::Obstacle {
        raw(z_last)?
    } else {
        let polished = solve_equilibrium(model, &last.u, &z_last, settings.newton)?;
        if !polished.converged {
            raw(z_last)?
        } else if !polished.stable || polished.hess_det <= settings.lambda {
            diagnostic = Some(format!("polishing landed on an obstacle point (det H_zz = {:e})", polished.hess_det));
            reason = StopReason::Obstacle;
            raw(z_last)?
        } else {
            polished
        }
    };
    Ok(TrackTrace {
        samples,
        stop_reason: reason,
        final_point,
        diagnostic,
    })
}

#[cfg(test)]
mod tests;
