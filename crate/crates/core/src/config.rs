//! Scenario configuration files.
//!
//! A config is a JSON document naming a scenario, its physical parameters,
//! the contact geometry, bounds, start state and planner settings. Unknown
//! keys are rejected, all of them at once, with their dotted paths.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{Pose2, StiffnessProfile, Superellipse, DEFAULT_CORNERS};
use crate::io::{sha256_hex, to_json};
use crate::manifold::{angular_seeds, lattice_seeds, DEDUP_RADIUS};
use crate::planner::{GoalKind, GoalSpec, PlannerParams};
use crate::potentials::{
    Attachment, BookshelfParams, Bounds, ClipParams, ConfigPoint, ContactBody, ContactSet, PendulumModel,
    PendulumParams, Potential, QuadraticModel, ScenarioModel,
};

const TOP_KEYS: &[&str] = &[
    "scenario",
    "description",
    "params",
    "shapes",
    "contacts",
    "stiffness",
    "control_bounds",
    "state_bounds",
    "start",
    "goal",
    "planner",
    "enumeration",
];
const SHAPE_KEYS: &[&str] = &["name", "a1", "a2", "eps", "pose", "attachment", "samples"];
const POSE_KEYS: &[&str] = &["x", "y", "theta"];
const ATTACHMENT_KEYS: &[&str] = &["kind", "x", "y", "theta", "pivot", "angle"];
const CONTACT_KEYS: &[&str] = &["pairs", "include_floor", "restarts"];
const STIFFNESS_KEYS: &[&str] = &["k_min", "k_max", "d0"];
const BOUNDS_KEYS: &[&str] = &["lo", "hi"];
const START_KEYS: &[&str] = &["z", "u"];
const GOAL_KEYS: &[&str] = &["kind", "coords", "center", "radius"];
const PLANNER_KEYS: &[&str] = &[
    "epsilon",
    "lambda",
    "beta",
    "sigma",
    "max_nodes",
    "seed",
    "eta",
    "dt",
    "bias_offset",
];
const ENUMERATION_KEYS: &[&str] = &["seeds", "dedup_radius"];
const SEED_KEYS: &[&str] = &["angular", "lattice", "around", "list"];
const AROUND_KEYS: &[&str] = &["center", "spread", "per_axis"];

fn params_keys(scenario: &str) -> Option<&'static [&'static str]> {
    Some(match scenario {
        "pendulum" => &["m", "g", "l0", "k"],
        "clip" => &["k_c", "k_theta", "z_theta0"],
        "bookshelf" => &["k_c", "k_1", "k_2", "rest_1", "rest_2", "w_1", "w_2"],
        "quadratic" => &["a", "b", "c"],
        _ => return None,
    })
}

/// Coordinate names fixed by each built-in scenario.
pub fn scenario_names(scenario: &str, n: usize, k: usize) -> (Vec<String>, Vec<String>) {
    let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match scenario {
        "pendulum" => (own(&["z_theta"]), own(&["u_x", "u_y"])),
        "clip" => (own(&["z_theta", "z_ly", "z_rx"]), own(&["u_ly", "u_rx"])),
        "bookshelf" => (
            own(&[
                "book_x", "book_y", "book_theta", "n1_x", "n1_y", "n1_theta", "n2_x", "n2_y", "n2_theta",
            ]),
            own(&["u_x", "u_y", "u_theta"]),
        ),
        _ => (
            (0..n).map(|i| format!("z{i}")).collect(),
            (0..k).map(|i| format!("u{i}")).collect(),
        ),
    }
}

fn check_keys(v: &Value, path: &str, known: &[&str], errs: &mut Vec<String>) {
    if let Value::Object(map) = v {
        for key in map.keys() {
            if !known.contains(&key.as_str()) {
                let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                errs.push(format!("unknown key `{full}`"));
            }
        }
    }
}

fn collect_unknown(v: &Value) -> Vec<String> {
    let mut errs = Vec::new();
    check_keys(v, "", TOP_KEYS, &mut errs);
    let get = |k: &str| v.get(k).unwrap_or(&Value::Null);
    if let Some(keys) = get("scenario").as_str().and_then(params_keys) {
        check_keys(get("params"), "params", keys, &mut errs);
    }
    if let Value::Array(shapes) = get("shapes") {
        for (i, s) in shapes.iter().enumerate() {
            let p = format!("shapes[{i}]");
            check_keys(s, &p, SHAPE_KEYS, &mut errs);
            if let Some(pose) = s.get("pose") {
                check_keys(pose, &format!("{p}.pose"), POSE_KEYS, &mut errs);
            }
            if let Some(a) = s.get("attachment") {
                check_keys(a, &format!("{p}.attachment"), ATTACHMENT_KEYS, &mut errs);
            }
        }
    }
    check_keys(get("contacts"), "contacts", CONTACT_KEYS, &mut errs);
    check_keys(get("stiffness"), "stiffness", STIFFNESS_KEYS, &mut errs);
    check_keys(get("control_bounds"), "control_bounds", BOUNDS_KEYS, &mut errs);
    check_keys(get("state_bounds"), "state_bounds", BOUNDS_KEYS, &mut errs);
    check_keys(get("start"), "start", START_KEYS, &mut errs);
    check_keys(get("goal"), "goal", GOAL_KEYS, &mut errs);
    check_keys(get("planner"), "planner", PLANNER_KEYS, &mut errs);
    check_keys(get("enumeration"), "enumeration", ENUMERATION_KEYS, &mut errs);
    if let Some(seeds) = get("enumeration").get("seeds") {
        check_keys(seeds, "enumeration.seeds", SEED_KEYS, &mut errs);
        if let Some(a) = seeds.get("around") {
            check_keys(a, "enumeration.seeds.around", AROUND_KEYS, &mut errs);
        }
    }
    errs
}

#[derive(Debug, Clone, Deserialize)]
struct ShapeSpec {
    name: String,
    a1: f64,
    a2: f64,
    eps: f64,
    #[serde(default)]
    pose: Pose2,
    attachment: AttachmentSpec,
    #[serde(default)]
    samples: Option<SamplesSpec>,
}

#[derive(Debug, Clone, Deserialize)]
struct AttachmentSpec {
    kind: String,
    x: Option<String>,
    y: Option<String>,
    theta: Option<String>,
    pivot: Option<[f64; 2]>,
    angle: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SamplesSpec {
    Named(String),
    Edge { edge: usize },
    List(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
struct ContactsSpec {
    pairs: Vec<[String; 2]>,
    #[serde(default)]
    include_floor: bool,
    #[serde(default = "default_restarts")]
    restarts: usize,
}

fn default_restarts() -> usize {
    16
}

#[derive(Debug, Clone, Deserialize)]
struct BoundsSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct StartSpec {
    z: Vec<f64>,
    u: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct GoalFileSpec {
    kind: GoalKind,
    coords: Vec<String>,
    center: Vec<f64>,
    radius: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct PlannerSpec {
    epsilon: Option<f64>,
    lambda: Option<f64>,
    beta: Option<f64>,
    sigma: Option<Vec<Vec<f64>>>,
    max_nodes: Option<usize>,
    seed: Option<u64>,
    eta: Option<f64>,
    dt: Option<f64>,
    bias_offset: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct AroundSpec {
    center: Vec<f64>,
    spread: Vec<f64>,
    #[serde(default = "default_per_axis")]
    per_axis: usize,
}

fn default_per_axis() -> usize {
    3
}

#[derive(Debug, Clone, Default, Deserialize)]
struct SeedSpec {
    angular: Option<usize>,
    lattice: Option<usize>,
    around: Option<AroundSpec>,
    list: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct EnumerationSpec {
    #[serde(default)]
    seeds: SeedSpec,
    dedup_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct ConfigFile {
    scenario: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    shapes: Vec<ShapeSpec>,
    #[serde(default)]
    contacts: Option<ContactsSpec>,
    #[serde(default)]
    stiffness: Option<StiffnessProfile>,
    control_bounds: BoundsSpec,
    state_bounds: BoundsSpec,
    start: StartSpec,
    #[serde(default)]
    goal: Option<GoalFileSpec>,
    #[serde(default)]
    planner: PlannerSpec,
    #[serde(default)]
    enumeration: EnumerationSpec,
}

/// A parsed config: the effective JSON (after overrides) plus its typed
/// view.
#[derive(Debug, Clone)]
pub struct ConfigDoc {
    pub value: Value,
    file: ConfigFile,
}

/// A built scenario ready for planning, meshing or verification.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub model: ScenarioModel,
    pub start: ConfigPoint,
    pub planner: PlannerParams,
    pub seeds: Vec<DVector<f64>>,
    pub dedup_radius: f64,
    /// SHA-256 of the effective config.
    pub config_hash: String,
}

impl Scenario {
    pub fn control_index(&self, name: &str) -> Option<usize> {
        self.model
            .control_names
            .iter()
            .position(|n| n == name)
            .or_else(|| name.parse().ok().filter(|&i: &usize| i < self.model.dims.k))
    }
}

/// Sets `a.b.c = value` inside a JSON document. Numeric segments index
/// arrays; missing objects are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{assignment}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = path.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = root;
    for part in parents {
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        cur = match cur {
            Value::Array(a) => {
                let len = a.len();
                part.parse::<usize>()
                    .ok()
                    .and_then(|i| a.get_mut(i))
                    .ok_or_else(|| Error::config(format!("override `{path}`: bad index `{part}` (length {len})")))?
            }
            Value::Object(m) => m.entry(part.to_string()).or_insert(Value::Null),
            _ => return Err(Error::config(format!("override `{path}`: `{part}` is not inside an object"))),
        };
    }
    if cur.is_null() {
        *cur = Value::Object(Default::default());
    }
    match cur {
        Value::Array(a) => {
            let len = a.len();
            let slot = last
                .parse::<usize>()
                .ok()
                .and_then(|i| a.get_mut(i))
                .ok_or_else(|| Error::config(format!("override `{path}`: bad index `{last}` (length {len})")))?;
            *slot = value;
        }
        Value::Object(m) => {
            m.insert(last.to_string(), value);
        }
        _ => return Err(Error::config(format!("override `{path}`: parent of `{last}` is not an object"))),
    }
    Ok(())
}

fn typed<T: DeserializeOwned>(v: &Value, what: &str) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::config(format!("{what}: {e}")))
}

impl ConfigDoc {
    pub fn from_value(value: Value) -> Result<Self> {
        if !value.is_object() {
            return Err(Error::config("config must be a JSON object"));
        }
        let unknown = collect_unknown(&value);
        if !unknown.is_empty() {
            return Err(Error::Config(unknown));
        }
        let file: ConfigFile = typed(&value, "config")?;
        if params_keys(&file.scenario).is_none() {
            return Err(Error::config(format!(
                "unknown scenario `{}` (expected pendulum, clip, bookshelf or quadratic)",
                file.scenario
            )));
        }
        Ok(ConfigDoc { value, file })
    }

    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::config(format!("config is not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str_with(&text, overrides)
    }

    pub fn scenario_name(&self) -> &str {
        &self.file.scenario
    }

    /// Canonical bytes of the effective config (sorted keys, 17-digit
    /// floats).
    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        to_json(&self.value)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&self.canonical_bytes()?))
    }

    pub fn build(&self) -> Result<Scenario> {
        let f = &self.file;
        let potential = self.build_potential()?;
        let dims = potential.dims();
        let (state_names, control_names) = scenario_names(&f.scenario, dims.n, dims.k);
        let mut errs = Vec::new();
        for (what, b, want) in [
            ("control_bounds", &f.control_bounds, dims.k),
            ("state_bounds", &f.state_bounds, dims.n),
        ] {
            if b.lo.len() != want || b.hi.len() != want {
                errs.push(format!("{what}.lo/hi must have {want} entries"));
            }
        }
        if f.start.z.len() != dims.n {
            errs.push(format!("start.z must have {} entries", dims.n));
        }
        if f.start.u.len() != dims.k {
            errs.push(format!("start.u must have {} entries", dims.k));
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let model = ScenarioModel::new(
            f.scenario.clone(),
            potential,
            Bounds::new(f.control_bounds.lo.clone(), f.control_bounds.hi.clone())?,
            Bounds::new(f.state_bounds.lo.clone(), f.state_bounds.hi.clone())?,
            state_names,
            control_names,
        )?;
        let planner = self.build_planner(&model)?;
        let seeds = self.build_seeds(&model)?;
        let dedup_radius = f.enumeration.dedup_radius.unwrap_or(DEDUP_RADIUS);
        if !(dedup_radius > 0.0) {
            return Err(Error::config("enumeration.dedup_radius must be positive"));
        }
        Ok(Scenario {
            name: f.scenario.clone(),
            description: f.description.clone(),
            start: ConfigPoint::from_slices(&f.start.z, &f.start.u),
            model,
            planner,
            seeds,
            dedup_radius,
            config_hash: self.hash()?,
        })
    }

    fn build_potential(&self) -> Result<Arc<dyn Potential>> {
        let f = &self.file;
        Ok(match f.scenario.as_str() {
            "pendulum" => Arc::new(PendulumModel::new(typed::<PendulumParams>(&f.params, "params")?)?),
            "quadratic" => {
                #[derive(Deserialize)]
                struct Q {
                    a: Vec<Vec<f64>>,
                    b: Vec<Vec<f64>>,
                    c: Vec<Vec<f64>>,
                }
                let q: Q = typed(&f.params, "params")?;
                Arc::new(QuadraticModel::new(matrix(&q.a, "params.a")?, matrix(&q.b, "params.b")?, matrix(&q.c, "params.c")?)?)
            }
            "clip" => {
                let p: ClipParams = typed(&f.params, "params")?;
                Arc::new(p.build(self.build_contacts(3, 2)?)?)
            }
            "bookshelf" => {
                let p: BookshelfParams = typed(&f.params, "params")?;
                p.validate()?;
                self.check_bookshelf_widths(&p)?;
                Arc::new(p.build(self.build_contacts(9, 3)?)?)
            }
            other => return Err(Error::config(format!("unknown scenario `{other}`"))),
        })
    }

    /// `w_1` and `w_2` must describe the `book`, `n1` and `n2` shapes: the
    /// book's x extent, and the free space between the neighbours at rest.
    fn check_bookshelf_widths(&self, p: &BookshelfParams) -> Result<()> {
        let shape = |name: &str| {
            self.file
                .shapes
                .iter()
                .find(|s| s.name == name)
                .ok_or_else(|| Error::config(format!("bookshelf needs a shape named `{name}`")))
        };
        let (book, n1, n2) = (shape("book")?, shape("n1")?, shape("n2")?);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-3);
        let mut errs = Vec::new();
        if !close(2.0 * book.a1, p.w_1) {
            errs.push(format!("params.w_1 = {} but the book shape is {} wide", p.w_1, 2.0 * book.a1));
        }
        let slot = (p.rest_2[0] + n2.pose.x - n2.a1) - (p.rest_1[0] + n1.pose.x + n1.a1);
        if !close(slot, p.w_2) {
            errs.push(format!("params.w_2 = {} but the neighbours leave a {slot} slot", p.w_2));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn build_contacts(&self, n: usize, k: usize) -> Result<ContactSet> {
        let f = &self.file;
        let (states, controls) = scenario_names(&f.scenario, n, k);
        let index: BTreeMap<&str, usize> = states
            .iter()
            .chain(controls.iter())
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut errs = Vec::new();
        let lookup = |name: &Option<String>, path: String, errs: &mut Vec<String>| -> Option<usize> {
            let name = name.as_ref()?;
            match index.get(name.as_str()) {
                Some(&i) => Some(i),
                None => {
                    errs.push(format!("{path}: unknown coordinate `{name}`"));
                    None
                }
            }
        };
        let mut bodies = Vec::new();
        for (i, s) in f.shapes.iter().enumerate() {
            let p = format!("shapes[{i}].attachment");
            let a = &s.attachment;
            let attachment = match a.kind.as_str() {
                "fixed" => Attachment::Fixed,
                "planar" => Attachment::Planar {
                    x: lookup(&a.x, format!("{p}.x"), &mut errs),
                    y: lookup(&a.y, format!("{p}.y"), &mut errs),
                    theta: lookup(&a.theta, format!("{p}.theta"), &mut errs),
                },
                "hinge" => {
                    let angle = lookup(&a.angle, format!("{p}.angle"), &mut errs);
                    match (a.pivot, angle) {
                        (Some([px, py]), Some(angle)) => Attachment::Hinge {
                            pivot: Vector2::new(px, py),
                            angle,
                        },
                        _ => {
                            errs.push(format!("{p}: hinge needs `pivot` and a valid `angle`"));
                            Attachment::Fixed
                        }
                    }
                }
                other => {
                    errs.push(format!("{p}.kind: unknown attachment `{other}` (fixed, planar or hinge)"));
                    Attachment::Fixed
                }
            };
            let shape = match Superellipse::new(s.a1, s.a2, s.eps, s.pose) {
                Ok(sh) => sh,
                Err(e) => {
                    errs.push(format!("shapes[{i}]: {e}"));
                    continue;
                }
            };
            let samples = match &s.samples {
                None => DEFAULT_CORNERS.to_vec(),
                Some(SamplesSpec::Named(n)) if n == "corners" => DEFAULT_CORNERS.to_vec(),
                Some(SamplesSpec::Named(n)) => {
                    errs.push(format!("shapes[{i}].samples: unknown preset `{n}`"));
                    Vec::new()
                }
                Some(SamplesSpec::Edge { edge }) => shape.edge_parameters(*edge),
                Some(SamplesSpec::List(v)) => v.clone(),
            };
            bodies.push(ContactBody {
                name: s.name.clone(),
                shape,
                attachment,
                samples,
            });
        }
        let spec = f.contacts.clone().ok_or_else(|| Error::config(format!("scenario `{}` needs a `contacts` section", f.scenario)))?;
        let profile = f
            .stiffness
            .ok_or_else(|| Error::config(format!("scenario `{}` needs a `stiffness` section", f.scenario)))?;
        if let Err(Error::Config(e)) = profile.validate(StiffnessProfile::DEFAULT_RATIO) {
            errs.extend(e);
        }
        let find = |name: &str| bodies.iter().position(|b| b.name == name);
        let mut pairs = Vec::new();
        for (i, [a, b]) in spec.pairs.iter().enumerate() {
            match (find(a), find(b)) {
                (Some(x), Some(y)) if x != y => pairs.push((x, y)),
                _ => errs.push(format!("contacts.pairs[{i}]: `{a}`/`{b}` must name two different shapes")),
            }
        }
        if spec.restarts < 4 {
            errs.push("contacts.restarts must be at least 4".into());
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(ContactSet::new(bodies, pairs, profile, spec.include_floor, spec.restarts))
    }

    fn build_planner(&self, model: &ScenarioModel) -> Result<PlannerParams> {
        let s = &self.file.planner;
        let k = model.dims.k;
        let d = PlannerParams::defaults(k);
        let goal = match &self.file.goal {
            None => None,
            Some(g) => {
                let names = match g.kind {
                    GoalKind::StateRegion => &model.state_names,
                    GoalKind::ControlRegion => &model.control_names,
                };
                let mut coords = Vec::new();
                for c in &g.coords {
                    coords.push(
                        names
                            .iter()
                            .position(|n| n == c)
                            .ok_or_else(|| Error::config(format!("goal.coords: unknown coordinate `{c}`")))?,
                    );
                }
                Some(GoalSpec {
                    kind: g.kind,
                    coords,
                    center: g.center.clone(),
                    radius: g.radius.clone(),
                })
            }
        };
        let sigma = match &s.sigma {
            None => d.sigma.clone(),
            Some(rows) => matrix(rows, "planner.sigma")?,
        };
        let p = PlannerParams {
            epsilon: s.epsilon.unwrap_or(d.epsilon),
            lambda: s.lambda.unwrap_or(d.lambda),
            beta: s.beta.unwrap_or(d.beta),
            sigma,
            max_nodes: s.max_nodes.unwrap_or(d.max_nodes),
            rng_seed: s.seed.unwrap_or(d.rng_seed),
            goal,
            eta: s.eta.unwrap_or(d.eta),
            dt: s.dt.unwrap_or(d.dt),
            bias_offset: s.bias_offset.unwrap_or(d.bias_offset),
        };
        p.validate(model)?;
        Ok(p)
    }

    fn build_seeds(&self, model: &ScenarioModel) -> Result<Vec<DVector<f64>>> {
        let s = &self.file.enumeration.seeds;
        let n = model.dims.n;
        let mut seeds = Vec::new();
        if let Some(a) = s.angular {
            if n != 1 {
                return Err(Error::config("enumeration.seeds.angular only applies to one-coordinate states"));
            }
            seeds.extend(angular_seeds(a));
        }
        if let Some(per) = s.lattice {
            seeds.extend(lattice_seeds(&model.state_bounds.lo, &model.state_bounds.hi, per));
        }
        if let Some(a) = &s.around {
            if a.center.len() != n || a.spread.len() != n {
                return Err(Error::config(format!("enumeration.seeds.around needs {n}-entry center and spread")));
            }
            let c = DVector::from_column_slice(&a.center);
            let free: Vec<usize> = (0..n).filter(|&i| a.spread[i] != 0.0).collect();
            let lo = DVector::from_iterator(free.len(), free.iter().map(|&i| a.center[i] - a.spread[i]));
            let hi = DVector::from_iterator(free.len(), free.iter().map(|&i| a.center[i] + a.spread[i]));
            for pt in lattice_seeds(&lo, &hi, a.per_axis) {
                let mut z = c.clone();
                for (j, &i) in free.iter().enumerate() {
                    z[i] = pt[j];
                }
                seeds.push(z);
            }
        }
        if let Some(list) = &s.list {
            for (i, z) in list.iter().enumerate() {
                if z.len() != n {
                    return Err(Error::config(format!("enumeration.seeds.list[{i}] must have {n} entries")));
                }
                seeds.push(DVector::from_column_slice(z));
            }
        }
        if seeds.is_empty() {
            seeds.push(DVector::from_column_slice(&self.file.start.z));
        }
        Ok(seeds)
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::config(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
