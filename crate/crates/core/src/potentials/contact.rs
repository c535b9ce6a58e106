//! Proxy-based contact energy between planar superellipse bodies.
//!
//! A contact pair `(a, s)` samples boundary points `c` of body `a` and, for
//! each one, finds the proxy `p` (closest surface point of body `s`). The
//! signed depth of `c` is `|c - p|`, negative when `c` is outside `s`, and
//! the sample contributes the profile's penetration energy at that depth,
//! whose second derivative is `k(d)` with `d` the negated depth. The optional
//! `k_min` floor adds `1/2 k_min |c - p|^2`. Proxies are treated as exact
//! minimizers, so the gradient drops the `dp/dgamma` term.
//!
//! Using `1/2 k(d) |c - p|^2` directly would put a concave shell of
//! curvature about `-0.3 k_max` just outside every surface, so touching
//! anything would be a fold of the equilibrium manifold.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DVector, Vector2};

use super::{Dims, Potential};
use crate::error::Result;
use crate::geometry::{solve_proxy, Pose2, StiffnessProfile, Superellipse};

/// Samples further than this many `d0` from a body's bounding box are
/// skipped; their energy is below `exp(-40)` of the contact scale.
const SKIP_DEPTHS: f64 = 20.0;

/// Distance from a body-frame point to the shape's bounding box, a lower
/// bound on its distance to the shape.
#[inline]
fn box_distance(s: &Superellipse, p: Vector2<f64>) -> f64 {
    let dx = (p.x.abs() - s.a1).max(0.0);
    let dy = (p.y.abs() - s.a2).max(0.0);
    dx.hypot(dy)
}

/// How a body frame depends on the stacked coordinates `x = [z; u]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Attachment {
    /// World frame.
    Fixed,
    /// Frame translated by `x[x_idx]`, `x[y_idx]` and rotated by `x[theta_idx]`
    /// (missing indices contribute zero).
    Planar {
        x: Option<usize>,
        y: Option<usize>,
        theta: Option<usize>,
    },
    /// Frame rotated by `x[angle]` about a fixed pivot.
    Hinge { pivot: Vector2<f64>, angle: usize },
}

/// Sparse derivative of a planar pose: `(coordinate, [dx, dy, dtheta])`.
type PoseDerivative = Vec<(usize, [f64; 3])>;

#[inline]
fn perp(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

impl Attachment {
    fn frame(&self, x: &DVector<f64>) -> (Pose2, PoseDerivative) {
        match *self {
            Attachment::Fixed => (Pose2::default(), Vec::new()),
            Attachment::Planar { x: ix, y: iy, theta: it } => {
                let get = |i: Option<usize>| i.map_or(0.0, |i| x[i]);
                let mut d = Vec::with_capacity(3);
                if let Some(i) = ix {
                    d.push((i, [1.0, 0.0, 0.0]));
                }
                if let Some(i) = iy {
                    d.push((i, [0.0, 1.0, 0.0]));
                }
                if let Some(i) = it {
                    d.push((i, [0.0, 0.0, 1.0]));
                }
                (Pose2::new(get(ix), get(iy), get(it)), d)
            }
            Attachment::Hinge { pivot, angle } => {
                (Pose2::new(pivot.x, pivot.y, x[angle]), vec![(angle, [0.0, 0.0, 1.0])])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactBody {
    pub name: String,
    /// Shape whose `pose` is the offset from the attachment frame.
    pub shape: Superellipse,
    pub attachment: Attachment,
    /// Surface parameters of the points this body presses into others with.
    pub samples: Vec<f64>,
}

impl ContactBody {
    /// World-placed shape and the derivative of its pose.
    pub fn placed(&self, x: &DVector<f64>) -> (Superellipse, PoseDerivative) {
        let (frame, dframe) = self.attachment.frame(x);
        let world = frame.compose(&self.shape.pose);
        let lever = world.translation() - frame.translation();
        let d = dframe
            .into_iter()
            .map(|(i, [dx, dy, dt])| {
                let dt_xy = perp(lever) * dt;
                (i, [dx + dt_xy.x, dy + dt_xy.y, dt])
            })
            .collect();
        (self.shape.with_pose(world), d)
    }
}

#[derive(Debug)]
pub struct ContactSet {
    pub bodies: Vec<ContactBody>,
    /// `(sampled body, surface body)` index pairs.
    pub pairs: Vec<(usize, usize)>,
    pub profile: StiffnessProfile,
    /// Keep the `k_min` floor in the contact energy. Off by default: the
    /// floor turns every sampled point into a weak spring towards the other
    /// body even when the two are far apart.
    pub include_floor: bool,
    pub restarts: usize,
    failures: AtomicU64,
}

impl Clone for ContactSet {
    fn clone(&self) -> Self {
        ContactSet {
            bodies: self.bodies.clone(),
            pairs: self.pairs.clone(),
            profile: self.profile,
            include_floor: self.include_floor,
            restarts: self.restarts,
            failures: AtomicU64::new(self.failures.load(Ordering::Relaxed)),
        }
    }
}

impl ContactSet {
    pub fn new(
        bodies: Vec<ContactBody>,
        pairs: Vec<(usize, usize)>,
        profile: StiffnessProfile,
        include_floor: bool,
        restarts: usize,
    ) -> Self {
        ContactSet {
            bodies,
            pairs,
            profile,
            include_floor,
            restarts,
            failures: AtomicU64::new(0),
        }
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn proxy_failures(&self) -> u64 {
        self.failures.load(Ordering::Relaxed)
    }

    /// Contact energy and, if `grad` is given, its gradient added into it.
    pub fn accumulate(&self, x: &DVector<f64>, mut grad: Option<&mut DVector<f64>>) -> Result<f64> {
        let placed: Vec<_> = self.bodies.iter().map(|b| b.placed(x)).collect();
        let reach = SKIP_DEPTHS * self.profile.d0;
        let mut energy = 0.0;
        for &(ai, si) in &self.pairs {
            let (a, da) = &placed[ai];
            let (s, ds) = &placed[si];
            for &gamma in &self.bodies[ai].samples {
                let c = a.boundary_world(gamma);
                let cb = s.pose.to_body(c);
                if !self.include_floor && box_distance(s, cb) > reach {
                    continue;
                }
                let d = s.level_body(cb);
                let grad_level = s.level_body_gradient(cb);
                let proxy = match solve_proxy(s, c, self.restarts) {
                    Ok(p) => p,
                    Err(_) => {
                        self.failures.fetch_add(1, Ordering::Relaxed);
                        continue;
                    }
                };
                let gap = c - proxy.proxy_point;
                let dist = gap.norm();
                let inside = d < 0.0;
                let depth = if inside { dist } else { -dist };
                energy += self.profile.penetration_energy(depth);
                if self.include_floor {
                    energy += 0.5 * self.profile.k_min * dist * dist;
                }

                let Some(g) = grad.as_deref_mut() else {
                    continue;
                };
                // Inward normal: the direction in which moving `c` deepens it.
                let inward = if dist > 1e-12 {
                    if inside { gap / dist } else { -gap / dist }
                } else {
                    -s.pose.rotate(grad_level).normalize()
                };
                let mut pull = inward * self.profile.penetration_force(depth);
                if self.include_floor {
                    pull += gap * self.profile.k_min;
                }
                let arm_a = c - a.pose.translation();
                for &(i, [dx, dy, dt]) in da {
                    g[i] += pull.dot(&(Vector2::new(dx, dy) + perp(arm_a) * dt));
                }
                let arm_s = proxy.proxy_point - s.pose.translation();
                for &(i, [dx, dy, dt]) in ds {
                    g[i] -= pull.dot(&(Vector2::new(dx, dy) + perp(arm_s) * dt));
                }
            }
        }
        Ok(energy)
    }
}

/// Linear spring `1/2 k (x[i] - x[j] - rest)^2`; `j = None` anchors it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spring {
    pub i: usize,
    pub j: Option<usize>,
    pub k: f64,
    pub rest: f64,
}

impl Spring {
    #[inline]
    fn stretch(&self, x: &DVector<f64>) -> f64 {
        x[self.i] - self.j.map_or(0.0, |j| x[j]) - self.rest
    }
}

/// Springs plus proxy contacts: the shape of both the clip and the
/// bookshelf potentials.
#[derive(Debug, Clone)]
pub struct SpringContactModel {
    pub dims: Dims,
    pub springs: Vec<Spring>,
    pub contacts: ContactSet,
}

impl SpringContactModel {
    pub fn spring_energy(&self, x: &DVector<f64>) -> f64 {
        self.springs
            .iter()
            .map(|s| 0.5 * s.k * s.stretch(x).powi(2))
            .sum()
    }
}

impl Potential for SpringContactModel {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.spring_energy(x) + self.contacts.accumulate(x, None)?)
    }

    fn gradient(&self, x: &DVector<f64>) -> Option<Result<(f64, DVector<f64>)>> {
        let mut g = DVector::zeros(x.len());
        for s in &self.springs {
            let f = s.k * s.stretch(x);
            g[s.i] += f;
            if let Some(j) = s.j {
                g[j] -= f;
            }
        }
        let w = self.spring_energy(x);
        Some(self.contacts.accumulate(x, Some(&mut g)).map(|wc| (w + wc, g)))
    }

    fn has_analytic_gradient(&self) -> bool {
        true
    }

    fn proxy_failures(&self) -> u64 {
        self.contacts.proxy_failures()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEFAULT_CORNERS;
    use crate::numerics::{fd_gradient, FdScheme};

    fn pair_set() -> ContactSet {
        let block = ContactBody {
            name: "block".into(),
            shape: Superellipse::new(0.1, 0.05, 0.5, Pose2::default()).unwrap(),
            attachment: Attachment::Planar {
                x: Some(0),
                y: Some(1),
                theta: Some(2),
            },
            samples: DEFAULT_CORNERS.to_vec(),
        };
        let bar = ContactBody {
            name: "bar".into(),
            shape: Superellipse::new(0.3, 0.03, 0.5, Pose2::new(0.3, 0.0, 0.0)).unwrap(),
            attachment: Attachment::Hinge {
                pivot: Vector2::new(0.0, 0.2),
                angle: 3,
            },
            samples: DEFAULT_CORNERS.to_vec(),
        };
        let profile = StiffnessProfile::new(1.0, 1e4, 1e-3).unwrap();
        ContactSet::new(vec![block, bar], vec![(0, 1), (1, 0)], profile, false, 16)
    }

    #[test]
    fn separated_bodies_have_zero_energy() {
        let set = pair_set();
        let x = DVector::from_column_slice(&[2.0, -1.0, 0.0, 0.0]);
        let mut g = DVector::zeros(4);
        assert_eq!(set.accumulate(&x, Some(&mut g)).unwrap(), 0.0);
        assert_eq!(g.amax(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences_in_contact() {
        let set = pair_set();
        // block corner pushed into the underside of the bar
        let x = DVector::from_column_slice(&[0.35, 0.14, 0.1, -0.02]);
        let mut g = DVector::zeros(4);
        let e = set.accumulate(&x, Some(&mut g)).unwrap();
        assert!(e > 0.0);
        let fd = fd_gradient(|p| set.accumulate(p, None), &x, FdScheme::new(1e-6).unwrap()).unwrap();
        let err = (&g - &fd).amax() / fd.amax();
        assert!(err < 1e-5, "analytic {g} vs fd {fd}");
    }

    #[test]
    fn floor_adds_far_field_spring() {
        let mut set = pair_set();
        set.include_floor = true;
        let x = DVector::from_column_slice(&[2.0, -1.0, 0.0, 0.0]);
        assert!(set.accumulate(&x, None).unwrap() > 0.0);
    }
}
