//! HapticRRT: a tree grown on the equilibrium manifold, with edges measured
//! in haptic distance and growth biased towards low-potential nodes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{
    hzz_is_obstacle, solve_equilibrium, track, EquilibriumPoint, StopReason, TrackSettings, TrackTrace,
};
use crate::potentials::{ConfigPoint, ScenarioModel};

/// Samples closer than this to the chosen node are redrawn.
const MIN_SAMPLE_DISTANCE: f64 = 1e-9;
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoalKind {
    StateRegion,
    ControlRegion,
}

/// Axis-aligned goal box on some coordinates of `z` or `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub kind: GoalKind,
    /// Coordinates the goal constrains.
    pub coords: Vec<usize>,
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

impl GoalSpec {
    pub fn validate(&self, model: &ScenarioModel) -> Result<()> {
        let dim = match self.kind {
            GoalKind::StateRegion => model.dims.n,
            GoalKind::ControlRegion => model.dims.k,
        };
        let mut errs = Vec::new();
        if self.coords.len() != self.center.len() || self.coords.len() != self.radius.len() {
            errs.push("goal.coords, goal.center and goal.radius must have equal lengths".to_string());
        }
        if let Some(c) = self.coords.iter().find(|&&c| c >= dim) {
            errs.push(format!("goal coordinate {c} out of range (dimension {dim})"));
        }
        if self.radius.iter().any(|r| !(*r > 0.0)) {
            errs.push("goal.radius entries must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn contains(&self, model: &ScenarioModel, p: &ConfigPoint) -> bool {
        match self.kind {
            GoalKind::StateRegion => {
                let mut d = p.z.clone();
                for (i, &c) in self.coords.iter().enumerate() {
                    d[c] -= self.center[i];
                }
                model.wrap_state(&mut d);
                self.coords.iter().enumerate().all(|(i, &c)| d[c].abs() <= self.radius[i])
            }
            GoalKind::ControlRegion => self
                .coords
                .iter()
                .enumerate()
                .all(|(i, &c)| (p.u[c] - self.center[i]).abs() <= self.radius[i]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerParams {
    /// Haptic-distance budget per extension.
    pub epsilon: f64,
    /// Obstacle threshold on `det(H_zz)`.
    pub lambda: f64,
    /// Exponent of the potential bias; 0 disables it.
    pub beta: f64,
    /// Positive-definite weight of the control-space distance.
    pub sigma: DMatrix<f64>,
    /// Number of extension attempts.
    pub max_nodes: usize,
    pub rng_seed: u64,
    pub goal: Option<GoalSpec>,
    pub eta: f64,
    pub dt: f64,
    /// Added to `W - W_min` before raising to `beta`, so the lowest node
    /// does not win every draw.
    pub bias_offset: f64,
}

impl PlannerParams {
    pub fn defaults(k: usize) -> Self {
        PlannerParams {
            epsilon: 0.5,
            lambda: 1e-3,
            beta: 1.0,
            sigma: DMatrix::identity(k, k),
            max_nodes: 2000,
            rng_seed: 0,
            goal: None,
            eta: 10.0,
            dt: 1e-3,
            bias_offset: 1.0,
        }
    }

    pub fn validate(&self, model: &ScenarioModel) -> Result<()> {
        let mut errs = Vec::new();
        let positive = [
            ("epsilon", self.epsilon),
            ("lambda", self.lambda),
            ("dt", self.dt),
            ("bias_offset", self.bias_offset),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("planner.{name} must be positive (got {v})"));
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            errs.push(format!("planner.beta must be >= 0 (got {})", self.beta));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            errs.push(format!("planner.eta must be >= 0 (got {})", self.eta));
        }
        let k = model.dims.k;
        if self.sigma.shape() != (k, k) {
            errs.push(format!("planner.sigma must be {k}x{k}"));
        } else if (&self.sigma - self.sigma.transpose()).amax() > 1e-12 || self.sigma.clone().cholesky().is_none() {
            errs.push("planner.sigma must be symmetric positive definite".to_string());
        }
        if let Some(goal) = &self.goal {
            if let Err(Error::Config(e)) = goal.validate(model) {
                errs.extend(e);
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn track_settings(&self) -> TrackSettings {
        TrackSettings {
            eta: self.eta,
            dt: self.dt,
            lambda: self.lambda,
            ..TrackSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub eq: EquilibriumPoint,
    pub dead_end: bool,
    pub edge_phi: f64,
    pub cumulative_phi: f64,
    /// Trace of the incoming edge; `None` for the root.
    pub trace: Option<TrackTrace>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn root(eq: EquilibriumPoint) -> Self {
        Tree {
            nodes: vec![TreeNode {
                id: 0,
                parent: None,
                eq,
                dead_end: false,
                edge_phi: 0.0,
                cumulative_phi: 0.0,
                trace: None,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dead_ends(&self) -> usize {
        self.nodes.iter().filter(|n| n.dead_end).count()
    }

    fn push(&mut self, parent: usize, trace: TrackTrace) -> usize {
        let id = self.nodes.len();
        let edge_phi = crate::manifold::haptic_distance(&trace);
        let cumulative_phi = self.nodes[parent].cumulative_phi + edge_phi;
        self.nodes.push(TreeNode {
            id,
            parent: Some(parent),
            eq: trace.final_point.clone(),
            dead_end: trace.stop_reason == StopReason::Obstacle,
            edge_phi,
            cumulative_phi,
            trace: Some(trace),
        });
        id
    }
}

/// Weighted control distance `sqrt(d' Sigma d)`.
pub fn sigma_norm(sigma: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    d.dot(&(sigma * d)).max(0.0).sqrt()
}

pub fn sample_control<R: Rng>(model: &ScenarioModel, rng: &mut R) -> DVector<f64> {
    let b = &model.control_bounds;
    DVector::from_iterator(
        b.dim(),
        (0..b.dim()).map(|i| if b.hi[i] > b.lo[i] { rng.gen_range(b.lo[i]..b.hi[i]) } else { b.lo[i] }),
    )
}

/// Index of the node that minimises the biased score for `u_rand`; ties go
/// to the lowest id.
pub fn select_near(tree: &Tree, params: &PlannerParams, u_rand: &DVector<f64>) -> Option<usize> {
    let live = tree.nodes.iter().filter(|n| !n.dead_end);
    let w_min = live.clone().map(|n| n.eq.w).fold(f64::INFINITY, f64::min);
    let mut best: Option<(f64, usize)> = None;
    for n in live {
        let bias = if params.beta == 0.0 {
            1.0
        } else {
            ((n.eq.w - w_min).max(0.0) + params.bias_offset).powf(params.beta)
        };
        let score = bias * sigma_norm(&params.sigma, &(&n.eq.point.u - u_rand));
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, n.id));
        }
    }
    best.map(|(_, id)| id)
}

/// Draws `u_rand` and picks the node to extend; returns
/// `(u_rand, unit direction, near id)`.
pub fn sample_direction<R: Rng>(
    tree: &Tree,
    model: &ScenarioModel,
    params: &PlannerParams,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>, usize)> {
    for _ in 0..MAX_RESAMPLES {
        let u_rand = sample_control(model, rng);
        let near = select_near(tree, params, &u_rand).ok_or(Error::PlannerExhausted)?;
        let d = &u_rand - &tree.nodes[near].eq.point.u;
        let len = d.norm();
        if len > MIN_SAMPLE_DISTANCE {
            return Ok((u_rand, d / len, near));
        }
    }
    Err(Error::PlannerExhausted)
}

/// Tracks from `near` towards `u_rand` with budget `epsilon`. `None` when
/// the sample coincides with the node's control.
pub fn extend(
    model: &ScenarioModel,
    near: &TreeNode,
    u_rand: &DVector<f64>,
    params: &PlannerParams,
) -> Result<Option<TrackTrace>> {
    if near.dead_end {
        return Err(Error::Integrity(format!("node {} is a dead end and cannot be extended", near.id)));
    }
    if (u_rand - &near.eq.point.u).norm() <= MIN_SAMPLE_DISTANCE {
        return Ok(None);
    }
    track(model, &near.eq, u_rand, params.epsilon, &params.track_settings()).map(Some)
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub tree: Tree,
    pub goal_node: Option<usize>,
    /// Every node became a dead end before the budget ran out.
    pub exhausted: bool,
    pub attempts: usize,
}

/// Refines `start` onto the manifold and checks that it is a usable root.
pub fn prepare_start(model: &ScenarioModel, start: &ConfigPoint, params: &PlannerParams) -> Result<EquilibriumPoint> {
    model.check_point(start)?;
    if !model.control_bounds.contains(&start.u) {
        return Err(Error::StartInvalid("start control lies outside control_bounds".into()));
    }
    let eq = solve_equilibrium(model, &start.u, &start.z, params.track_settings().newton)?;
    if !eq.converged {
        return Err(Error::StartInvalid(format!(
            "no equilibrium near the start state (residual {:.3e})",
            eq.residual_norm
        )));
    }
    let (_, _, h) = model.state_block(&eq.point)?;
    if !eq.stable || hzz_is_obstacle(&h, params.lambda) {
        return Err(Error::StartInvalid(format!(
            "start equilibrium is unstable or inside a haptic obstacle (det H_zz = {:.6e}, lambda = {:.6e})",
            eq.hess_det, params.lambda
        )));
    }
    Ok(eq)
}

pub fn plan(model: &ScenarioModel, start: &ConfigPoint, params: &PlannerParams) -> Result<PlanResult> {
    params.validate(model)?;
    let root = prepare_start(model, start, params)?;
    let mut tree = Tree::root(root);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let goal_hit = |tree: &Tree, id: usize| {
        let n = &tree.nodes[id];
        !n.dead_end && params.goal.as_ref().is_some_and(|g| g.contains(model, &n.eq.point))
    };
    if goal_hit(&tree, 0) {
        return Ok(PlanResult { tree, goal_node: Some(0), exhausted: false, attempts: 0 });
    }
    for attempt in 1..=params.max_nodes {
        let (u_rand, _, near) = match sample_direction(&tree, model, params, &mut rng) {
            Ok(s) => s,
            Err(Error::PlannerExhausted) => {
                return Ok(PlanResult { tree, goal_node: None, exhausted: true, attempts: attempt - 1 });
            }
            Err(e) => return Err(e),
        };
        let Some(trace) = extend(model, &tree.nodes[near], &u_rand, params)? else {
            continue;
        };
        let id = tree.push(near, trace);
        if goal_hit(&tree, id) {
            return Ok(PlanResult { tree, goal_node: Some(id), exhausted: false, attempts: attempt });
        }
    }
    Ok(PlanResult {
        tree,
        goal_node: None,
        exhausted: false,
        attempts: params.max_nodes,
    })
}

/// Root-to-node chain of node ids.
pub fn extract_path(tree: &Tree, node: usize) -> Result<Vec<usize>> {
    if node >= tree.len() {
        return Err(Error::Integrity(format!("node {node} is not in the tree")));
    }
    let mut chain = vec![node];
    let mut cur = node;
    while let Some(p) = tree.nodes[cur].parent {
        if p >= cur {
            return Err(Error::Integrity(format!("node {cur} has parent {p} that is not older than it")));
        }
        chain.push(p);
        cur = p;
    }
    if cur != 0 {
        return Err(Error::Integrity(format!("node {node} is detached from the root")));
    }
    chain.reverse();
    Ok(chain)
}

/// One row of an exported path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    /// Control arc length from the root.
    pub t: f64,
    pub u: DVector<f64>,
    pub z: DVector<f64>,
    pub phi: f64,
    pub w: f64,
    /// `-dW/du`.
    pub f_ctrl: DVector<f64>,
}

/// Concatenates the edge traces along `chain` into path rows.
pub fn path_samples(model: &ScenarioModel, tree: &Tree, chain: &[usize]) -> Result<Vec<PathSample>> {
    let mut rows = Vec::new();
    let (mut t0, mut phi0) = (0.0, 0.0);
    let root = &tree.nodes[chain[0]].eq;
    let row = |t: f64, phi: f64, z: &DVector<f64>, u: &DVector<f64>| -> Result<PathSample> {
        let p = ConfigPoint::new(z.clone(), u.clone());
        let (w, g) = model.gradient(&p.stacked())?;
        Ok(PathSample {
            t,
            u: u.clone(),
            z: z.clone(),
            phi,
            w,
            f_ctrl: -g.rows(model.dims.n, model.dims.k).into_owned(),
        })
    };
    rows.push(row(0.0, 0.0, &root.point.z, &root.point.u)?);
    for &id in &chain[1..] {
        let trace = tree.nodes[id]
            .trace
            .as_ref()
            .ok_or_else(|| Error::Integrity(format!("node {id} has no stored edge trace")))?;
        for s in &trace.samples[1..] {
            rows.push(row(t0 + s.t, phi0 + s.phi, &s.z, &s.u)?);
        }
        t0 += trace.samples.last().map_or(0.0, |s| s.t);
        phi0 = tree.nodes[id].cumulative_phi;
    }
    Ok(rows)
}
