//! Commands behind the `hapticrrt` binary: `plan`, `mesh`, `metric-field`
//! and `verify`. Each command computes every output in memory, then writes
//! the files atomically with the manifest last.
//!
//! Exit codes: 0 success, 1 error, 2 planner budget exhausted without
//! reaching the goal, 3 verification failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigDoc, Scenario};
use crate::error::{Error, Result};
use crate::io::{atomic_write, sha256_hex, to_json, Table};
use crate::manifold::{enumerate_branches, hzz_is_obstacle, metric_from_bundle};
use crate::numerics::{spd_determinant, sym_eigen, NewtonSettings};
use crate::planner::{extract_path, path_samples, plan, PlanResult};
use crate::potentials::ConfigPoint;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_GOAL: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MAX_GRID_POINTS: usize = 1_000_000;
/// Residual bound for stored manifold samples.
pub const TRACK_RESIDUAL_BOUND: f64 = 1e-5;

pub const TREE_FILE: &str = "tree.json";
pub const PATH_FILE: &str = "path.csv";
pub const MESH_FILE: &str = "mesh.csv";
pub const METRIC_FILE: &str = "metric.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_COPY: &str = "config.json";

/// Options shared by the producing commands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub set: Vec<String>,
}

impl RunOptions {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(s) = self.seed {
            o.push(format!("planner.seed={s}"));
        }
        o
    }

    pub fn load(&self) -> Result<(ConfigDoc, Scenario)> {
        let doc = ConfigDoc::load(&self.config, &self.overrides())?;
        let scenario = doc.build()?;
        Ok((doc, scenario))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_copy: String,
    pub overrides: Vec<String>,
    pub seed: u64,
    pub out_dir: String,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub scenario_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    /// File name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeMetadata {
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub params: PlannerRecord,
    pub state_names: Vec<String>,
    pub control_names: Vec<String>,
    pub goal_node: Option<usize>,
    pub exhausted: bool,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerRecord {
    pub epsilon: f64,
    pub lambda: f64,
    pub beta: f64,
    pub sigma: Vec<Vec<f64>>,
    pub max_nodes: usize,
    pub eta: f64,
    pub dt: f64,
    pub bias_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    #[serde(rename = "W")]
    pub w: f64,
    pub det_hzz: f64,
    pub dead_end: bool,
    pub edge_phi: f64,
    pub cumulative_phi: f64,
    pub stop_reason: Option<String>,
    pub edge_samples: usize,
    pub edge_max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub metadata: TreeMetadata,
    pub nodes: Vec<NodeRecord>,
}

pub fn tree_document(scenario: &Scenario, result: &PlanResult) -> TreeDocument {
    let p = &scenario.planner;
    let sigma = (0..p.sigma.nrows())
        .map(|i| p.sigma.row(i).iter().copied().collect())
        .collect();
    let nodes = result
        .tree
        .nodes
        .iter()
        .map(|n| {
            let (stop, samples, max_res) = match &n.trace {
                Some(t) => (
                    Some(t.stop_reason.as_str().to_string()),
                    t.samples.len(),
                    t.samples.iter().map(|s| s.residual_norm).fold(0.0, f64::max),
                ),
                None => (None, 0, 0.0),
            };
            NodeRecord {
                id: n.id,
                parent: n.parent,
                z: n.eq.point.z.iter().copied().collect(),
                u: n.eq.point.u.iter().copied().collect(),
                w: n.eq.w,
                det_hzz: n.eq.hess_det,
                dead_end: n.dead_end,
                edge_phi: n.edge_phi,
                cumulative_phi: n.cumulative_phi,
                stop_reason: stop,
                edge_samples: samples,
                edge_max_residual: max_res,
            }
        })
        .collect();
    TreeDocument {
        metadata: TreeMetadata {
            scenario: scenario.name.clone(),
            scenario_hash: scenario.config_hash.clone(),
            seed: p.rng_seed,
            tool_version: TOOL_VERSION.to_string(),
            params: PlannerRecord {
                epsilon: p.epsilon,
                lambda: p.lambda,
                beta: p.beta,
                sigma,
                max_nodes: p.max_nodes,
                eta: p.eta,
                dt: p.dt,
                bias_offset: p.bias_offset,
            },
            state_names: scenario.model.state_names.clone(),
            control_names: scenario.model.control_names.clone(),
            goal_node: result.goal_node,
            exhausted: result.exhausted,
            attempts: result.attempts,
        },
        nodes,
    }
}

pub fn path_table(scenario: &Scenario, result: &PlanResult, goal: usize) -> Result<Table> {
    let m = &scenario.model;
    let mut header = vec!["t".to_string()];
    header.extend(m.control_names.iter().cloned());
    header.extend(m.state_names.iter().cloned());
    header.extend(["phi".to_string(), "W".to_string()]);
    header.extend(m.control_names.iter().map(|n| format!("f_{n}")));
    let mut table = Table::new(header);
    let chain = extract_path(&result.tree, goal)?;
    for s in path_samples(m, &result.tree, &chain)? {
        let mut row = vec![s.t];
        row.extend(s.u.iter());
        row.extend(s.z.iter());
        row.extend([s.phi, s.w]);
        row.extend(s.f_ctrl.iter());
        table.rows.push(row);
    }
    Ok(table)
}

/// One axis of a control-space grid slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn value(&self, i: usize) -> f64 {
        if self.n == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
        }
    }
}

/// Parses `name=lo:hi:n,name=lo:hi:n`; names are control names or indices.
pub fn parse_grid(spec: &str, scenario: &Scenario) -> Result<Vec<GridAxis>> {
    let mut axes = Vec::new();
    for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let bad = || Error::config(format!("grid axis `{part}` is not of the form name=lo:hi:n"));
        let (name, range) = part.trim().split_once('=').ok_or_else(bad)?;
        let fields: Vec<&str> = range.split(':').collect();
        if fields.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = fields[0].parse().map_err(|_| bad())?;
        let hi: f64 = fields[1].parse().map_err(|_| bad())?;
        let n: usize = fields[2].parse().map_err(|_| bad())?;
        let index = scenario
            .control_index(name.trim())
            .ok_or_else(|| Error::config(format!("grid axis `{name}` is not a control of scenario `{}`", scenario.name)))?;
        if n == 0 || !(lo <= hi) {
            return Err(Error::config(format!("grid axis `{name}` needs lo <= hi and n >= 1")));
        }
        axes.push(GridAxis { index, lo, hi, n });
    }
    if axes.len() != 2 {
        return Err(Error::config(format!(
            "grid must name exactly two control axes (got {}); pin the others with --set start.u.<i>=<value>",
            axes.len()
        )));
    }
    if axes[0].index == axes[1].index {
        return Err(Error::config("grid axes must be different controls"));
    }
    let total = axes[0].n.saturating_mul(axes[1].n);
    if total > MAX_GRID_POINTS {
        return Err(Error::config(format!(
            "grid has {total} points, more than the limit of {MAX_GRID_POINTS}; coarsen the grid or split it into several runs"
        )));
    }
    Ok(axes)
}

/// Grid points in row-major `(i, j)` order; controls off the slice are
/// pinned at the start control.
pub fn grid_points(axes: &[GridAxis], base: &DVector<f64>) -> Vec<(usize, usize, DVector<f64>)> {
    let mut pts = Vec::with_capacity(axes[0].n * axes[1].n);
    for i in 0..axes[0].n {
        for j in 0..axes[1].n {
            let mut u = base.clone();
            u[axes[0].index] = axes[0].value(i);
            u[axes[1].index] = axes[1].value(j);
            pts.push((i, j, u));
        }
    }
    pts
}

fn grid_header(scenario: &Scenario, tail: &[&str]) -> Vec<String> {
    let m = &scenario.model;
    let mut h = vec!["i".to_string(), "j".to_string()];
    h.extend(m.control_names.iter().cloned());
    h.push("branch_id".into());
    h.extend(m.state_names.iter().cloned());
    h.extend(tail.iter().map(|s| s.to_string()));
    h
}

/// Branches at every grid point: the rows of `mesh.csv`.
pub fn mesh_table(scenario: &Scenario, axes: &[GridAxis]) -> Result<Table> {
    let m = &scenario.model;
    let pts = grid_points(axes, &scenario.start.u);
    let per_point: Vec<Result<Vec<Vec<f64>>>> = pts
        .par_iter()
        .map(|(i, j, u)| {
            let set = enumerate_branches(m, u, &scenario.seeds, NewtonSettings::default(), scenario.dedup_radius)?;
            let mut rows = Vec::new();
            for (b, eq) in set.equilibria.iter().enumerate() {
                let mut row = vec![*i as f64, *j as f64];
                row.extend(u.iter());
                row.push(b as f64);
                row.extend(eq.point.z.iter());
                row.extend([eq.w, eq.hess_det, if eq.stable { 1.0 } else { 0.0 }, eq.residual_norm]);
                rows.push(row);
            }
            if rows.is_empty() {
                let mut row = vec![*i as f64, *j as f64];
                row.extend(u.iter());
                row.push(-1.0);
                row.extend(std::iter::repeat_n(f64::NAN, m.dims.n + 3));
                row.push(f64::NAN);
                rows.push(row);
            }
            Ok(rows)
        })
        .collect();
    let mut table = Table::new(grid_header(scenario, &["W", "det_hzz", "stable", "residual"]));
    for r in per_point {
        table.rows.extend(r?);
    }
    Ok(table)
}

/// Eigen-decomposition of the 2x2 slice of `G^2` spanned by the grid axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub eig_min: f64,
    pub eig_max: f64,
    /// Direction of the `eig_min` eigenvector in the slice plane, in
    /// `(-pi/2, pi/2]`.
    pub angle_min: f64,
    pub angle_max: f64,
    /// Area of `{v : v' G^2 v = 1}`, `pi / sqrt(eig_min eig_max)`.
    pub area: f64,
}

fn canonical_angle(x: f64, y: f64) -> f64 {
    let a = y.atan2(x);
    let half = std::f64::consts::FRAC_PI_2;
    if a > half {
        a - std::f64::consts::PI
    } else if a <= -half {
        a + std::f64::consts::PI
    } else {
        a
    }
}

pub fn slice_ellipse(g2: &DMatrix<f64>, a: usize, b: usize) -> Ellipse {
    let block = DMatrix::from_row_slice(2, 2, &[g2[(a, a)], g2[(a, b)], g2[(b, a)], g2[(b, b)]]);
    let (vals, vecs) = sym_eigen(&block);
    Ellipse {
        eig_min: vals[0],
        eig_max: vals[1],
        angle_min: canonical_angle(vecs[(0, 0)], vecs[(1, 0)]),
        angle_max: canonical_angle(vecs[(0, 1)], vecs[(1, 1)]),
        area: std::f64::consts::PI / (vals[0] * vals[1]).sqrt(),
    }
}

/// Metric ellipses at every grid point: the rows of `metric.csv`.
pub fn metric_table(scenario: &Scenario, axes: &[GridAxis]) -> Result<Table> {
    let m = &scenario.model;
    let lambda = scenario.planner.lambda;
    let pts = grid_points(axes, &scenario.start.u);
    let per_point: Vec<Result<Vec<Vec<f64>>>> = pts
        .par_iter()
        .map(|(i, j, u)| {
            let set = enumerate_branches(m, u, &scenario.seeds, NewtonSettings::default(), scenario.dedup_radius)?;
            let mut rows = Vec::new();
            let head = |b: f64| {
                let mut row = vec![*i as f64, *j as f64];
                row.extend(u.iter());
                row.push(b);
                row
            };
            for (b, eq) in set.equilibria.iter().enumerate() {
                let bundle = m.bundle(&eq.point)?;
                let obstacle = hzz_is_obstacle(&bundle.h_zz, lambda);
                let mut row = head(b as f64);
                row.extend(eq.point.z.iter());
                match metric_from_bundle(&bundle) {
                    Ok(metric) => {
                        let e = slice_ellipse(&metric.g_squared, axes[0].index, axes[1].index);
                        row.extend([e.eig_min, e.eig_max, e.angle_min, e.angle_max, e.area]);
                    }
                    Err(Error::NearSingularMetric { .. }) => row.extend([f64::NAN; 5]),
                    Err(e) => return Err(e),
                }
                row.extend([if obstacle { 1.0 } else { 0.0 }, eq.hess_det]);
                rows.push(row);
            }
            if rows.is_empty() {
                let mut row = head(-1.0);
                row.extend(std::iter::repeat_n(f64::NAN, m.dims.n + 5));
                row.extend([1.0, f64::NAN]);
                rows.push(row);
            }
            Ok(rows)
        })
        .collect();
    let mut table = Table::new(grid_header(
        scenario,
        &["eig_min", "eig_max", "angle_min", "angle_max", "area", "obstacle", "det_hzz"],
    ));
    for r in per_point {
        table.rows.extend(r?);
    }
    Ok(table)
}

/// Writes `files` and then the manifest, all atomically.
fn write_outputs(
    opts: &RunOptions,
    command: &str,
    doc: &ConfigDoc,
    scenario: &Scenario,
    grid: Option<String>,
    mut files: Vec<(&'static str, Vec<u8>)>,
    started: Instant,
) -> Result<()> {
    files.push((CONFIG_COPY, doc.canonical_bytes()?));
    let outputs = files
        .iter()
        .map(|(name, bytes)| (name.to_string(), sha256_hex(bytes)))
        .collect();
    let manifest = RunManifest {
        command: command.to_string(),
        config_path: opts.config.display().to_string(),
        config_copy: CONFIG_COPY.to_string(),
        overrides: opts.overrides(),
        seed: scenario.planner.rng_seed,
        out_dir: opts.out.display().to_string(),
        tool_version: TOOL_VERSION.to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        scenario_hash: scenario.config_hash.clone(),
        grid,
        outputs,
    };
    fs::create_dir_all(&opts.out)?;
    let stale = opts.out.join(PATH_FILE);
    if command == "plan" && !files.iter().any(|(n, _)| *n == PATH_FILE) && stale.exists() {
        fs::remove_file(stale)?;
    }
    for (name, bytes) in &files {
        atomic_write(&opts.out.join(name), bytes)?;
    }
    atomic_write(&opts.out.join(MANIFEST_FILE), &to_json(&manifest)?)
}

/// Outcome of `plan` before anything is written.
pub struct PlanOutputs {
    pub result: PlanResult,
    pub tree_json: Vec<u8>,
    pub path_csv: Option<Vec<u8>>,
}

pub fn compute_plan(scenario: &Scenario) -> Result<PlanOutputs> {
    let result = plan(&scenario.model, &scenario.start, &scenario.planner)?;
    let tree_json = to_json(&tree_document(scenario, &result))?;
    let path_csv = match result.goal_node {
        Some(g) => Some(path_table(scenario, &result, g)?.to_csv()?),
        None => None,
    };
    Ok(PlanOutputs { result, tree_json, path_csv })
}

pub fn cmd_plan(opts: &RunOptions) -> Result<i32> {
    let started = Instant::now();
    let (doc, scenario) = opts.load()?;
    let out = compute_plan(&scenario)?;
    let mut files = vec![(TREE_FILE, out.tree_json)];
    if let Some(p) = out.path_csv {
        files.push((PATH_FILE, p));
    }
    write_outputs(opts, "plan", &doc, &scenario, None, files, started)?;
    let r = &out.result;
    eprintln!(
        "plan: {} nodes, {} dead ends, goal {}",
        r.tree.len(),
        r.tree.dead_ends(),
        r.goal_node.map_or("not reached".to_string(), |g| format!("node {g}"))
    );
    Ok(if r.goal_node.is_some() { EXIT_OK } else { EXIT_NO_GOAL })
}

pub fn cmd_mesh(opts: &RunOptions, grid: &str) -> Result<i32> {
    let started = Instant::now();
    let (doc, scenario) = opts.load()?;
    let axes = parse_grid(grid, &scenario)?;
    let table = mesh_table(&scenario, &axes)?;
    write_outputs(opts, "mesh", &doc, &scenario, Some(grid.to_string()), vec![(MESH_FILE, table.to_csv()?)], started)?;
    Ok(EXIT_OK)
}

pub fn cmd_metric_field(opts: &RunOptions, grid: &str) -> Result<i32> {
    let started = Instant::now();
    let (doc, scenario) = opts.load()?;
    let axes = parse_grid(grid, &scenario)?;
    let table = metric_table(&scenario, &axes)?;
    write_outputs(
        opts,
        "metric-field",
        &doc,
        &scenario,
        Some(grid.to_string()),
        vec![(METRIC_FILE, table.to_csv()?)],
        started,
    )?;
    Ok(EXIT_OK)
}

/// Result of one verification check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, failures: Vec<String>) -> Self {
        Check {
            name: name.to_string(),
            passed: failures.is_empty(),
            detail: if failures.is_empty() {
                "ok".into()
            } else {
                let shown: Vec<_> = failures.iter().take(10).cloned().collect();
                let more = failures.len().saturating_sub(10);
                let mut d = shown.join("; ");
                if more > 0 {
                    d.push_str(&format!("; and {more} more"));
                }
                d
            },
        }
    }
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    fs::read(dir.join(name)).map_err(|e| Error::Integrity(format!("cannot read {name}: {e}")))
}

fn check_tree(scenario: &Scenario, manifest: &RunManifest, tree: &TreeDocument) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut meta = Vec::new();
    if tree.metadata.seed != manifest.seed {
        meta.push(format!("tree seed {} != manifest seed {}", tree.metadata.seed, manifest.seed));
    }
    if scenario.planner.rng_seed != manifest.seed {
        meta.push(format!("config seed {} != manifest seed {}", scenario.planner.rng_seed, manifest.seed));
    }
    if tree.metadata.scenario_hash != manifest.scenario_hash {
        meta.push("tree scenario_hash differs from manifest".into());
    }
    checks.push(Check::new("tree metadata", meta));

    let nodes = &tree.nodes;
    let mut structure = Vec::new();
    let mut additivity = Vec::new();
    let mut dead = Vec::new();
    for (k, n) in nodes.iter().enumerate() {
        if n.id != k {
            structure.push(format!("node at position {k} has id {}", n.id));
            continue;
        }
        match n.parent {
            None if k != 0 => structure.push(format!("node {k} has no parent")),
            Some(p) if p >= k => structure.push(format!("node {k} has parent {p} that is not older")),
            Some(p) => {
                let parent = &nodes[p];
                let expect = parent.cumulative_phi + n.edge_phi;
                if (n.cumulative_phi - expect).abs() > 1e-9 * expect.abs().max(1.0) {
                    additivity.push(format!(
                        "node {k}: cumulative_phi {} != parent {} + edge {}",
                        n.cumulative_phi, parent.cumulative_phi, n.edge_phi
                    ));
                }
                if parent.dead_end {
                    dead.push(format!("node {k} was grown from dead end {p}"));
                }
                let obstacle = n.stop_reason.as_deref() == Some("obstacle");
                if n.dead_end != obstacle {
                    dead.push(format!("node {k}: dead_end = {} but stop_reason = {:?}", n.dead_end, n.stop_reason));
                }
            }
            None => {
                if n.cumulative_phi != 0.0 || n.edge_phi != 0.0 {
                    additivity.push("root must have zero haptic distance".into());
                }
            }
        }
    }
    checks.push(Check::new("tree structure", structure));
    checks.push(Check::new("phi additivity", additivity));
    checks.push(Check::new("dead-end consistency", dead));

    let m = &scenario.model;
    let mut residual = Vec::new();
    for n in nodes {
        if n.edge_max_residual > TRACK_RESIDUAL_BOUND {
            residual.push(format!("node {}: edge residual {:e}", n.id, n.edge_max_residual));
        }
        if n.dead_end {
            continue;
        }
        let p = ConfigPoint::from_slices(&n.z, &n.u);
        match m.state_block(&p) {
            Ok((w, g, h)) => {
                if g.norm() > TRACK_RESIDUAL_BOUND {
                    residual.push(format!("node {}: recomputed residual {:e}", n.id, g.norm()));
                }
                if (w - n.w).abs() > 1e-9 * w.abs().max(1.0) {
                    residual.push(format!("node {}: stored W {} != recomputed {}", n.id, n.w, w));
                }
                if spd_determinant(&h).is_none() {
                    residual.push(format!("node {}: live node is not stable", n.id));
                }
            }
            Err(e) => residual.push(format!("node {}: {e}", n.id)),
        }
    }
    checks.push(Check::new("manifold residuals", residual));
    checks
}

fn check_path(tree: &TreeDocument, path: &Table) -> Check {
    let mut f = Vec::new();
    match (tree.metadata.goal_node, path.column("phi")) {
        (Some(g), Some(c)) => {
            let last = path.rows.last().map_or(f64::NAN, |r| r[c]);
            let expect = tree.nodes.get(g).map_or(f64::NAN, |n| n.cumulative_phi);
            if !((last - expect).abs() <= 1e-9 * expect.abs().max(1.0)) {
                f.push(format!("path ends at phi {last}, goal node {g} has {expect}"));
            }
            if path.rows.windows(2).any(|w| w[1][c] < w[0][c]) {
                f.push("phi decreases along the path".into());
            }
        }
        (None, _) => f.push("path.csv present but the tree has no goal node".into()),
        (_, None) => f.push("path.csv has no phi column".into()),
    }
    Check::new("path phi", f)
}

fn check_mesh(scenario: &Scenario, mesh: &Table) -> Check {
    let m = &scenario.model;
    let (n, k) = (m.dims.n, m.dims.k);
    let mut f = Vec::new();
    for (r, row) in mesh.rows.iter().enumerate() {
        if row[2 + k] < 0.0 {
            continue;
        }
        let u = &row[2..2 + k];
        let z = &row[3 + k..3 + k + n];
        match m.state_block(&ConfigPoint::from_slices(z, u)) {
            Ok((_, g, h)) => {
                if g.norm() > 1e-6 {
                    f.push(format!("row {r}: residual {:e}", g.norm()));
                }
                let stable = spd_determinant(&h).is_some();
                if stable != (row[5 + k + n] == 1.0) {
                    f.push(format!("row {r}: stable flag disagrees with H_zz"));
                }
            }
            Err(e) => f.push(format!("row {r}: {e}")),
        }
    }
    Check::new("mesh equilibria", f)
}

/// Re-checks every invariant of a run directory. With `rerun`, the command
/// is executed again from the stored config and its outputs must match
/// byte for byte.
pub fn verify_dir(dir: &Path, rerun: bool) -> Result<Vec<Check>> {
    let manifest: RunManifest = serde_json::from_slice(&read(dir, MANIFEST_FILE)?)
        .map_err(|e| Error::Integrity(format!("manifest.json is unreadable: {e}")))?;
    let mut checks = Vec::new();

    let mut hashes = Vec::new();
    for (name, want) in &manifest.outputs {
        match read(dir, name) {
            Ok(bytes) if &sha256_hex(&bytes) == want => {}
            Ok(_) => hashes.push(format!("{name}: content does not match its recorded hash")),
            Err(e) => hashes.push(e.to_string()),
        }
    }
    checks.push(Check::new("output hashes", hashes));

    let config_bytes = read(dir, &manifest.config_copy)?;
    let doc = ConfigDoc::from_str_with(std::str::from_utf8(&config_bytes).map_err(|e| Error::Integrity(e.to_string()))?, &[])?;
    let scenario = doc.build()?;
    let mut cfg = Vec::new();
    if scenario.config_hash != manifest.scenario_hash {
        cfg.push("config copy hash differs from manifest scenario_hash".into());
    }
    if scenario.planner.rng_seed != manifest.seed {
        cfg.push(format!("config seed {} != manifest seed {}", scenario.planner.rng_seed, manifest.seed));
    }
    checks.push(Check::new("config consistency", cfg));

    match manifest.command.as_str() {
        "plan" => {
            let tree: TreeDocument = serde_json::from_slice(&read(dir, TREE_FILE)?)
                .map_err(|e| Error::Integrity(format!("tree.json is unreadable: {e}")))?;
            checks.extend(check_tree(&scenario, &manifest, &tree));
            if manifest.outputs.contains_key(PATH_FILE) {
                checks.push(check_path(&tree, &Table::from_csv(&read(dir, PATH_FILE)?)?));
            }
        }
        "mesh" => checks.push(check_mesh(&scenario, &Table::from_csv(&read(dir, MESH_FILE)?)?)),
        "metric-field" => {}
        other => checks.push(Check::new("command", vec![format!("unknown command `{other}` in manifest")])),
    }

    if rerun {
        let tmp = tempfile::tempdir()?;
        let opts = RunOptions {
            config: dir.join(&manifest.config_copy),
            seed: None,
            out: tmp.path().to_path_buf(),
            set: Vec::new(),
        };
        let grid = manifest.grid.clone().unwrap_or_default();
        match manifest.command.as_str() {
            "plan" => cmd_plan(&opts).map(|_| ())?,
            "mesh" => cmd_mesh(&opts, &grid).map(|_| ())?,
            "metric-field" => cmd_metric_field(&opts, &grid).map(|_| ())?,
            _ => {}
        }
        let mut det = Vec::new();
        for (name, want) in &manifest.outputs {
            let got = fs::read(tmp.path().join(name)).map(|b| sha256_hex(&b)).unwrap_or_default();
            if &got != want {
                det.push(format!("{name}: rerun produced different bytes"));
            }
        }
        checks.push(Check::new("determinism rerun", det));
    }
    Ok(checks)
}

pub fn cmd_verify(dir: &Path, rerun: bool) -> Result<i32> {
    let checks = verify_dir(dir, rerun)?;
    let mut ok = true;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

/// Maps a command result to an exit code, printing errors to stderr.
pub fn exit_code(r: Result<i32>) -> i32 {
    match r {
        Ok(code) => code,
        Err(Error::Config(errs)) => {
            eprintln!("configuration error:");
            for e in errs {
                eprintln!("  {e}");
            }
            EXIT_ERROR
        }
        Err(Error::Integrity(msg)) => {
            eprintln!("verification failed: {msg}");
            EXIT_VERIFY_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
