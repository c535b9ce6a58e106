//! Planar superellipses, their inside-outside field, the smooth contact
//! stiffness profile and the closest-surface-point (proxy) solver.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar rigid pose of a body frame in the world.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 { x, y, theta }
    }

    #[inline]
    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Rotates a body-frame direction into the world frame.
    #[inline]
    pub fn rotate(&self, v: Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.theta.sin_cos();
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    #[inline]
    pub fn to_world(&self, p: Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.theta.sin_cos();
        Vector2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    #[inline]
    pub fn to_body(&self, p: Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (p.x - self.x, p.y - self.y);
        Vector2::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// Composition `self * local`.
    pub fn compose(&self, local: &Pose2) -> Pose2 {
        let t = self.to_world(local.translation());
        Pose2::new(t.x, t.y, self.theta + local.theta)
    }
}

#[inline]
fn signed_pow(x: f64, e: f64) -> f64 {
    x.signum() * x.abs().powf(e)
}

/// Superellipse `(x/a1)^(2/eps) + (y/a2)^(2/eps) = 1` in its body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superellipse {
    pub a1: f64,
    pub a2: f64,
    pub eps: f64,
    #[serde(default)]
    pub pose: Pose2,
}

impl Superellipse {
    pub fn new(a1: f64, a2: f64, eps: f64, pose: Pose2) -> Result<Self> {
        let s = Superellipse { a1, a2, eps, pose };
        s.validate()?;
        Ok(s)
    }

    pub fn circle(r: f64) -> Self {
        Superellipse {
            a1: r,
            a2: r,
            eps: 1.0,
            pose: Pose2::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.a1) && ok(self.a2) && ok(self.eps)) {
            return Err(Error::Geometry(format!(
                "superellipse needs a1, a2, eps > 0 (got {}, {}, {})",
                self.a1, self.a2, self.eps
            )));
        }
        Ok(())
    }

    pub fn with_pose(mut self, pose: Pose2) -> Self {
        self.pose = pose;
        self
    }

    /// Inside-outside value of a body-frame point. Axis points are handled by
    /// taking `|.|` before the fractional power.
    #[inline]
    pub fn level_body(&self, p: Vector2<f64>) -> f64 {
        let e = 2.0 / self.eps;
        (p.x.abs() / self.a1).powf(e) + (p.y.abs() / self.a2).powf(e) - 1.0
    }

    /// Gradient of [`Self::level_body`] with respect to the body-frame point.
    #[inline]
    pub fn level_body_gradient(&self, p: Vector2<f64>) -> Vector2<f64> {
        let e = 2.0 / self.eps;
        let gx = if p.x == 0.0 {
            0.0
        } else {
            e * (p.x.abs() / self.a1).powf(e - 1.0) * p.x.signum() / self.a1
        };
        let gy = if p.y == 0.0 {
            0.0
        } else {
            e * (p.y.abs() / self.a2).powf(e - 1.0) * p.y.signum() / self.a2
        };
        Vector2::new(gx, gy)
    }

    /// Boundary point for surface parameter `gamma`, body frame.
    #[inline]
    pub fn boundary_body(&self, gamma: f64) -> Vector2<f64> {
        let (s, c) = gamma.sin_cos();
        Vector2::new(
            self.a1 * signed_pow(c, self.eps),
            self.a2 * signed_pow(s, self.eps),
        )
    }

    /// Surface parameter of a body-frame boundary point.
    pub fn parameter_of(&self, p: Vector2<f64>) -> f64 {
        let inv = 1.0 / self.eps;
        signed_pow(p.y / self.a2, inv)
            .atan2(signed_pow(p.x / self.a1, inv))
            .rem_euclid(TAU)
    }

    #[inline]
    pub fn boundary_world(&self, gamma: f64) -> Vector2<f64> {
        self.pose.to_world(self.boundary_body(gamma))
    }

    /// Surface parameters spaced evenly along the four edges (by body-frame
    /// coordinate), `per_edge` interior points per edge, plus the four
    /// corner parameters.
    pub fn edge_parameters(&self, per_edge: usize) -> Vec<f64> {
        let mut out = DEFAULT_CORNERS.to_vec();
        let inv = 1.0 / self.eps;
        for k in 1..=per_edge {
            let t = -1.0 + 2.0 * k as f64 / (per_edge + 1) as f64;
            let g = signed_pow(t, inv).clamp(-1.0, 1.0);
            // top/bottom edges: x = a1 t
            let top = g.acos();
            out.push(top);
            out.push(TAU - top);
            // right/left edges: y = a2 t
            let right = g.asin().rem_euclid(TAU);
            out.push(right);
            out.push(PI - g.asin());
        }
        out
    }
}

/// Default "corner" surface parameters of a superellipse.
pub const DEFAULT_CORNERS: [f64; 4] = [PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0];

/// Signed inside-outside value of a world point: negative inside, zero on
/// the surface, positive outside.
pub fn inside_outside(shape: &Superellipse, point: Vector2<f64>) -> Result<f64> {
    if !(point.x.is_finite() && point.y.is_finite()) {
        return Err(Error::Geometry("non-finite query point".into()));
    }
    shape.validate()?;
    Ok(shape.level_body(shape.pose.to_body(point)))
}

/// `k(d) = k_min + (1 - tanh(d/d0))/2 * k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessProfile {
    pub k_min: f64,
    pub k_max: f64,
    pub d0: f64,
}

impl StiffnessProfile {
    pub const DEFAULT_RATIO: f64 = 100.0;

    pub fn new(k_min: f64, k_max: f64, d0: f64) -> Result<Self> {
        Self::with_ratio(k_min, k_max, d0, Self::DEFAULT_RATIO)
    }

    /// Builds a profile requiring `k_max >= ratio * k_min`.
    pub fn with_ratio(k_min: f64, k_max: f64, d0: f64, ratio: f64) -> Result<Self> {
        let p = StiffnessProfile { k_min, k_max, d0 };
        p.validate(ratio)?;
        Ok(p)
    }

    pub fn validate(&self, ratio: f64) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.d0 > 0.0 && self.d0.is_finite()) {
            errs.push(format!("stiffness.d0 must be positive (got {})", self.d0));
        }
        if !(self.k_min >= 0.0 && self.k_max > 0.0) {
            errs.push(format!(
                "stiffness needs k_min >= 0 and k_max > 0 (got {}, {})",
                self.k_min, self.k_max
            ));
        }
        if self.k_max < ratio * self.k_min {
            errs.push(format!(
                "stiffness.k_max = {} must be at least {ratio} x k_min = {}",
                self.k_max, self.k_min
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// The part of `k(d)` above the floor, `(1 - tanh(d/d0))/2 * k_max`.
    #[inline]
    pub fn excess(&self, d: f64) -> f64 {
        0.5 * (1.0 - (d / self.d0).tanh()) * self.k_max
    }

    #[inline]
    pub fn excess_derivative(&self, d: f64) -> f64 {
        let t = (d / self.d0).tanh();
        -0.5 * self.k_max * (1.0 - t * t) / self.d0
    }
}

impl StiffnessProfile {
    /// Contact energy at signed penetration depth `s` (positive inside),
    /// built so that its second derivative is `excess(-s)`: the profile is
    /// the tangent stiffness of the contact. Convex, smooth, exponentially
    /// small outside and `k_max s^2 / 2` deep inside.
    pub fn penetration_energy(&self, s: f64) -> f64 {
        let l = self.d0;
        -0.25 * self.k_max * l * l * li2_neg_exp(2.0 * s / l)
    }

    /// `d penetration_energy / ds`, the contact force magnitude.
    pub fn penetration_force(&self, s: f64) -> f64 {
        0.5 * self.k_max * self.d0 * softplus(2.0 * s / self.d0)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `Li2(-e^x)`, finite for any finite `x`.
fn li2_neg_exp(x: f64) -> f64 {
    if x > 0.0 {
        -std::f64::consts::PI.powi(2) / 6.0 - 0.5 * x * x - li2_neg((-x).exp())
    } else {
        li2_neg(x.exp())
    }
}

/// `Li2(-x)` for `x >= 0`.
fn li2_neg(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    if x > 1.0 {
        let l = x.ln();
        return -std::f64::consts::PI.powi(2) / 6.0 - 0.5 * l * l - li2_neg(1.0 / x);
    }
    // Landen: Li2(-x) = -Li2(x / (1 + x)) - ln(1 + x)^2 / 2, argument <= 1/2.
    let w = x / (1.0 + x);
    let mut sum = 0.0;
    let mut pow = w;
    for k in 1..200 {
        let term = pow / (k * k) as f64;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        pow *= w;
    }
    let l = x.ln_1p();
    -sum - 0.5 * l * l
}

pub fn contact_stiffness(profile: &StiffnessProfile, d: f64) -> f64 {
    profile.k_min + profile.excess(d)
}

pub fn contact_stiffness_derivative(profile: &StiffnessProfile, d: f64) -> f64 {
    profile.excess_derivative(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyResult {
    pub gamma: f64,
    pub proxy_point: Vector2<f64>,
    pub query_point: Vector2<f64>,
    pub gap: f64,
}

impl ProxyResult {
    pub fn distance(&self) -> f64 {
        (self.query_point - self.proxy_point).norm()
    }
}

const GOLDEN_ITERS: usize = 40;

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_ITERS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Closest surface point of `shape` to `query`, by multi-start golden
/// section over the periodic surface parameter. Ties are broken by the
/// smallest parameter in `[0, 2pi)`.
pub fn solve_proxy(shape: &Superellipse, query: Vector2<f64>, restarts: usize) -> Result<ProxyResult> {
    if restarts < 4 {
        return Err(Error::Geometry(format!("proxy solve needs >= 4 restarts, got {restarts}")));
    }
    let gap = inside_outside(shape, query)?;
    let qb = shape.pose.to_body(query);
    let dist2 = |g: f64| (shape.boundary_body(g) - qb).norm_squared();

    let step = TAU / restarts as f64;
    let seeds: Vec<(f64, f64)> = (0..restarts)
        .map(|i| {
            let g = i as f64 * step;
            (g, dist2(g))
        })
        .collect();
    if seeds.iter().all(|(_, d)| !d.is_finite()) {
        return Err(Error::ProxyFailure { restarts });
    }

    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..restarts {
        let (g, d) = seeds[i];
        let prev = seeds[(i + restarts - 1) % restarts].1;
        let next = seeds[(i + 1) % restarts].1;
        if !(d.is_finite() && d <= prev && d <= next) {
            continue;
        }
        let (gr, dr) = golden_section(&dist2, g - step, g + step);
        let cand = if dr.is_finite() && dr < d && !tie(dr, d) {
            (gr.rem_euclid(TAU), dr)
        } else {
            (g, d)
        };
        best = match best {
            None => Some(cand),
            Some(b) => {
                if tie(cand.1, b.1) {
                    Some(if cand.0 < b.0 { cand } else { b })
                } else if cand.1 < b.1 {
                    Some(cand)
                } else {
                    Some(b)
                }
            }
        };
    }
    let (gamma, d) = best.ok_or(Error::ProxyFailure { restarts })?;
    let (gamma, pb) = match polish_proxy(shape, qb, shape.boundary_body(gamma)) {
        Some(p) if (p - qb).norm_squared() <= d * (1.0 + 1e-9) => (shape.parameter_of(p), p),
        _ => (gamma, shape.boundary_body(gamma)),
    };
    Ok(ProxyResult {
        gamma,
        proxy_point: shape.pose.to_world(pb),
        query_point: query,
        gap,
    })
}

/// Newton on `F(p) = 0, grad F(p) x (q - p) = 0` in the body frame. The
/// surface parameter is badly conditioned near flat edges, so the
/// parameter-space minimum can be far off along the surface there.
fn polish_proxy(shape: &Superellipse, q: Vector2<f64>, start: Vector2<f64>) -> Option<Vector2<f64>> {
    let e = 2.0 / shape.eps;
    if e < 2.0 {
        return None;
    }
    let scale = shape.a1.min(shape.a2);
    let curv = |v: f64, a: f64| e * (e - 1.0) * (v.abs() / a).powf(e - 2.0) / (a * a);
    let mut p = start;
    for _ in 0..12 {
        let f = shape.level_body(p);
        let g = shape.level_body_gradient(p);
        let r = q - p;
        let cross = g.x * r.y - g.y * r.x;
        let (hxx, hyy) = (curv(p.x, shape.a1), curv(p.y, shape.a2));
        let jac = nalgebra::Matrix2::new(g.x, g.y, hxx * r.y + g.y, -hyy * r.x - g.x);
        let step = jac.try_inverse()? * Vector2::new(f, cross);
        p -= step;
        if !(p.x.is_finite() && p.y.is_finite()) || (p - start).norm() > 0.5 * scale {
            return None;
        }
        if step.norm() <= 1e-15 * scale {
            break;
        }
    }
    (shape.level_body(p).abs() < 1e-10).then_some(p)
}
