//! Scenario files.
//!
//! A scenario is TOML with `schema = "copush.scenario/1"`. Object vertices
//! are given in the body frame and shifted so the centroid becomes the body
//! origin; obstacle vertices are in world coordinates. Every `[config.*]`
//! block is optional and filled with defaults, and [`Scenario::to_toml`]
//! echoes the fully resolved file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assign::{AssignConfig, ObjectModel, ReplanPolicy};
use crate::contact::{ObjectIntrinsics, RobotSpec};
use crate::error::{Error, Result};
use crate::geometry::{Fnv, Polygon, Pose, Vec2};
use crate::hybrid::SearchConfig;
use crate::mapf::{Lattice, MapfObject, MapfProblem};
use crate::modes::PushContext;
use crate::sim::{FailurePolicy, Gains};

pub const SCHEMA: &str = "copush.scenario/1";
/// Thickness of the walls that close the workspace.
pub const WALL_THICKNESS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    #[serde(default)]
    pub id: String,
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    #[serde(default)]
    pub id: String,
    pub vertices: Vec<[f64; 2]>,
    pub mass: f64,
    pub mu_contact: f64,
    pub mu_ground: f64,
    pub start: [f64; 3],
    pub goal: [f64; 3],
}

fn default_radius() -> f64 {
    RobotSpec::default().radius
}
fn default_f_max() -> f64 {
    RobotSpec::default().f_max
}
fn default_v_max() -> f64 {
    RobotSpec::default().v_max
}
fn default_omega_max() -> f64 {
    RobotSpec::default().omega_max
}
fn default_mass() -> f64 {
    RobotSpec::default().mass
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotEntry {
    #[serde(default)]
    pub id: String,
    pub start: [f64; 3],
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_f_max")]
    pub f_max: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_mass")]
    pub mass: f64,
}

impl RobotEntry {
    pub fn spec(&self) -> RobotSpec {
        RobotSpec {
            radius: self.radius,
            f_max: self.f_max,
            v_max: self.v_max,
            omega_max: self.omega_max,
            mass: self.mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapfConfig {
    pub lattice: Lattice,
    /// ε_r, relative clearance on the robot diameter.
    pub inflation: f64,
    pub max_expansions: usize,
}

impl Default for MapfConfig {
    fn default() -> Self {
        Self {
            lattice: Lattice::default(),
            inflation: 0.1,
            max_expansions: 2_000_000,
        }
    }
}

/// One mode corruption: at `time`, the pushing stage of the lowest-numbered
/// active subtask (or of `object`, if given) gets its contacts moved half
/// the perimeter around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fault {
    pub time: f64,
    #[serde(default)]
    pub object: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Simulated time limit (s).
    pub max_time: f64,
    /// Hybrid replans per subtask before it is reassigned.
    pub max_replans: usize,
    /// Contact drift that pauses pushing (m).
    pub slip: f64,
    pub approach_timeout: f64,
    pub stage_timeout: f64,
    /// Cell size of the robot navigation grid (m).
    pub nav_resolution: f64,
    pub faults: Vec<Fault>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_time: 900.0,
            max_replans: 2,
            slip: 0.05,
            approach_timeout: 60.0,
            stage_timeout: 120.0,
            nav_resolution: 0.05,
            faults: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub mapf: MapfConfig,
    pub search: SearchConfig,
    pub assign: AssignConfig,
    pub replan: ReplanPolicy,
    pub control: Gains,
    pub failure: FailurePolicy,
    pub episode: EpisodeConfig,
}

/// The file as written, with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub workspace: Workspace,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    pub objects: Vec<ObjectSpec>,
    pub robots: Vec<RobotEntry>,
    #[serde(default)]
    pub config: Config,
}

#[derive(Debug, Clone)]
pub struct SceneObject {
    pub model: ObjectModel,
    pub start: Pose,
    pub goal: Pose,
}

/// Validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub objects: Vec<SceneObject>,
    pub obstacles: Vec<Polygon>,
    pub robots: Vec<RobotSpec>,
    pub robot_starts: Vec<Pose>,
    pub bounds: (Vec2, Vec2),
}

fn pose(v: [f64; 3]) -> Pose {
    Pose::new(v[0], v[1], v[2])
}

fn polygon(what: &str, vertices: &[[f64; 2]]) -> Result<Polygon> {
    if vertices.len() < 3 {
        return Err(Error::Invalid(format!("{what}: polygon needs ≥ 3 vertices")));
    }
    Polygon::new(vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect())
        .map_err(|e| Error::Invalid(format!("{what}: {e}")))
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{what} must be positive, got {v}")))
    }
}

fn unique(kind: &str, ids: impl Iterator<Item = String>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids.filter(|i| !i.is_empty()) {
        if !seen.insert(id.clone()) {
            return Err(Error::Invalid(format!("duplicate {kind} id {id:?}")));
        }
    }
    Ok(())
}

/// Applies `key=value` to a TOML tree. Keys are dotted paths from the file
/// root; a path whose first part is not a root key is taken under `config`.
/// Values are read as TOML literals, or as strings if they do not parse.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Invalid(format!("override {assignment:?} is not key=value")))?;
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Invalid(format!("bad override key {key:?}")));
    }
    const ROOT: [&str; 7] = ["schema", "name", "seed", "workspace", "obstacles", "objects", "robots"];
    if !ROOT.contains(&parts[0]) && parts[0] != "config" {
        parts.insert(0, "config");
    }
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let (last, path) = parts.split_last().expect("non-empty key");
    let mut table = root;
    for p in path {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Invalid(format!("override path {key:?} crosses a non-table value")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn has_path(root: &toml::Table, key: &str) -> bool {
    let mut parts = key.split('.').peekable();
    let mut table = root;
    while let Some(p) = parts.next() {
        match table.get(p) {
            Some(_) if parts.peek().is_none() => return true,
            Some(toml::Value::Table(t)) => table = t,
            _ => return false,
        }
    }
    false
}

impl Scenario {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let format = |e: toml::de::Error| Error::Format(e.to_string());
        if overrides.is_empty() {
            // Straight from the text, so errors carry line numbers.
            return Self::from_file(toml::from_str(text).map_err(format)?);
        }
        let mut root: toml::Table = text.parse().map_err(format)?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let file: ScenarioFile = root.try_into().map_err(format)?;
        let scenario = Self::from_file(file)?;
        let echo: toml::Table = scenario.to_toml().parse().map_err(format)?;
        for o in overrides {
            let key = o.split_once('=').map(|(k, _)| k.trim()).unwrap_or_default();
            if !has_path(&echo, key) && !has_path(&echo, &format!("config.{key}")) {
                return Err(Error::Invalid(format!("unknown setting {key:?}")));
            }
        }
        Ok(scenario)
    }

    pub fn from_file(mut file: ScenarioFile) -> Result<Self> {
        if file.schema != SCHEMA {
            return Err(Error::Invalid(format!("schema must be {SCHEMA:?}, found {:?}", file.schema)));
        }
        // One seed drives every random stream.
        file.config.search.seed = file.seed;
        file.config.assign.seed = file.seed;

        let (lo, hi) = (Vec2::new(file.workspace.min[0], file.workspace.min[1]), Vec2::new(file.workspace.max[0], file.workspace.max[1]));
        if !(lo.x < hi.x && lo.y < hi.y) {
            return Err(Error::Invalid("workspace min must be below max".into()));
        }
        if file.objects.is_empty() {
            return Err(Error::Invalid("at least one object is required".into()));
        }
        if file.robots.is_empty() {
            return Err(Error::Invalid("at least one robot is required".into()));
        }
        unique("object", file.objects.iter().map(|o| o.id.clone()))?;
        unique("robot", file.robots.iter().map(|r| r.id.clone()))?;
        unique("obstacle", file.obstacles.iter().map(|o| o.id.clone()))?;
        let inside = |p: &Pose| p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y;

        let mut obstacles = Vec::new();
        for (i, o) in file.obstacles.iter().enumerate() {
            obstacles.push(polygon(&format!("obstacle {i}"), &o.vertices)?);
        }
        let mut objects = Vec::new();
        for (i, o) in file.objects.iter().enumerate() {
            let what = format!("object {i}");
            let poly = polygon(&what, &o.vertices)?.centered();
            positive(&format!("{what} mass"), o.mass)?;
            positive(&format!("{what} mu_contact"), o.mu_contact)?;
            positive(&format!("{what} mu_ground"), o.mu_ground)?;
            let (start, goal) = (pose(o.start), pose(o.goal));
            if !inside(&start) || !inside(&goal) {
                return Err(Error::Invalid(format!("{what}: start and goal must lie inside the workspace")));
            }
            let intr = ObjectIntrinsics::uniform(&poly, o.mass, o.mu_contact, o.mu_ground);
            objects.push(SceneObject {
                model: ObjectModel { poly, intr },
                start,
                goal,
            });
        }
        let mut robots = Vec::new();
        let mut robot_starts = Vec::new();
        for (i, r) in file.robots.iter().enumerate() {
            let what = format!("robot {i}");
            for (name, v) in [("radius", r.radius), ("f_max", r.f_max), ("v_max", r.v_max), ("omega_max", r.omega_max), ("mass", r.mass)] {
                positive(&format!("{what} {name}"), v)?;
            }
            let start = pose(r.start);
            if !inside(&start) {
                return Err(Error::Invalid(format!("{what}: start must lie inside the workspace")));
            }
            robots.push(r.spec());
            robot_starts.push(start);
        }
        let c = &file.config;
        positive("mapf.lattice.resolution", c.mapf.lattice.resolution)?;
        positive("mapf.inflation", c.mapf.inflation)?;
        if c.mapf.lattice.heading_bins == 0 {
            return Err(Error::Invalid("mapf.lattice.heading_bins must be positive".into()));
        }
        positive("search.epsilon", c.search.epsilon)?;
        positive("search.push_speed", c.search.push_speed)?;
        positive("search.alpha", c.search.alpha)?;
        positive("assign.push_speed", c.assign.push_speed)?;
        if c.assign.horizon == 0 || c.assign.n_cap == 0 {
            return Err(Error::Invalid("assign.horizon and assign.n_cap must be positive".into()));
        }
        positive("control.k_vel", c.control.k_vel)?;
        positive("control.k_rot", c.control.k_rot)?;
        positive("control.delta_c", c.control.delta_c)?;
        positive("failure.delta_f", c.failure.delta_f)?;
        positive("failure.t_c", c.failure.t_c)?;
        positive("failure.r_stuck", c.failure.r_stuck)?;
        positive("episode.max_time", c.episode.max_time)?;
        positive("episode.nav_resolution", c.episode.nav_resolution)?;
        Ok(Self {
            objects,
            obstacles,
            robots,
            robot_starts,
            bounds: (lo, hi),
            file,
        })
    }

    /// The effective scenario, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("plain data")
    }

    /// Hash of the effective scenario text.
    pub fn hash(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_bytes(self.to_toml().as_bytes());
        h.finish()
    }

    pub fn seed(&self) -> u64 {
        self.file.seed
    }

    pub fn config(&self) -> &Config {
        &self.file.config
    }

    /// Four walls just outside the workspace bounds.
    pub fn walls(&self) -> Vec<Polygon> {
        let (lo, hi) = self.bounds;
        let t = WALL_THICKNESS;
        let rect = |x0: f64, y0: f64, x1: f64, y1: f64| {
            Polygon::from_points(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]).expect("non-degenerate wall")
        };
        vec![
            rect(lo.x - t, lo.y - t, hi.x + t, lo.y),
            rect(lo.x - t, hi.y, hi.x + t, hi.y + t),
            rect(lo.x - t, lo.y, lo.x, hi.y),
            rect(hi.x, lo.y, hi.x + t, hi.y),
        ]
    }

    /// Obstacles plus the workspace walls, as seen by the simulator and the
    /// hybrid search.
    pub fn static_obstacles(&self) -> Vec<Polygon> {
        let mut all = self.obstacles.clone();
        all.extend(self.walls());
        all
    }

    pub fn object_models(&self) -> Vec<ObjectModel> {
        self.objects.iter().map(|o| o.model.clone()).collect()
    }

    /// Pushing context for `robots` on `object`, with walls and obstacles.
    pub fn push_context(&self, object: usize, robots: &[usize]) -> PushContext {
        let model = &self.objects[object].model;
        let team = robots.iter().map(|&r| self.robots[r]).collect();
        let mut ctx = PushContext::new(model.poly.clone(), model.intr, team).with_obstacles(self.static_obstacles());
        ctx.gains = self.config().control;
        ctx.policy = self.config().failure;
        ctx
    }

    pub fn robot_diameter(&self) -> f64 {
        self.robots.iter().map(|r| r.diameter()).fold(0.0, f64::max)
    }

    pub fn mapf_problem(&self) -> MapfProblem {
        let objects = self
            .objects
            .iter()
            .map(|o| MapfObject {
                poly: o.model.poly.clone(),
                start: o.start,
                goal: o.goal,
            })
            .collect();
        let c = &self.file.config.mapf;
        let mut p = MapfProblem::new(objects, self.obstacles.clone(), self.robot_diameter());
        p.bounds = Some(self.bounds);
        p.lattice = c.lattice;
        p.inflation = c.inflation;
        p.max_expansions = c.max_expansions;
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema = "copush.scenario/1"

[workspace]
min = [-3.0, -3.0]
max = [3.0, 3.0]

[[objects]]
vertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
mass = 10.0
mu_contact = 0.2
mu_ground = 0.8
start = [-1.0, 0.0, 0.0]
goal = [1.0, 0.0, 0.0]

[[robots]]
start = [-2.0, 0.0, 0.0]
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = Scenario::parse(MINIMAL, &[]).unwrap();
        assert_eq!(s.objects.len(), 1);
        assert_eq!(s.robots[0], RobotSpec::default());
        assert_eq!(s.file.config, Config::default());
        assert!(s.objects[0].model.poly.centroid().norm() < 1e-12);
        let echoed = s.to_toml();
        assert!(echoed.contains("[config.search]"));
        let again = Scenario::parse(&echoed, &[]).unwrap();
        assert_eq!(again.file, s.file);
        assert_eq!(again.hash(), s.hash());
    }

    #[test]
    fn two_vertex_polygon_is_rejected() {
        let text = MINIMAL.replace(
            "vertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]",
            "vertices = [[0.0, 0.0], [1.0, 0.0]]",
        );
        let err = Scenario::parse(&text, &[]).unwrap_err().to_string();
        assert!(err.contains("polygon needs ≥ 3 vertices"), "{err}");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = MINIMAL.replace("mass = 10.0", "mass = \"heavy\"");
        let err = Scenario::parse(&text, &[]).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        assert!(err.contains("mass"), "{err}");
    }

    #[test]
    fn overrides_reach_config_blocks() {
        let s = Scenario::parse(
            MINIMAL,
            &["search.epsilon=0.2".into(), "seed=9".into(), "config.assign.horizon=2".into()],
        )
        .unwrap();
        assert_eq!(s.config().search.epsilon, 0.2);
        assert_eq!(s.config().search.seed, 9);
        assert_eq!(s.config().assign.horizon, 2);
        assert!(Scenario::parse(MINIMAL, &["search.bogus=1".into()]).is_err());
        assert!(Scenario::parse(MINIMAL, &["failure.delta_f=-1".into()]).is_err());
    }

    #[test]
    fn goal_outside_workspace_is_rejected() {
        let text = MINIMAL.replace("goal = [1.0, 0.0, 0.0]", "goal = [4.0, 0.0, 0.0]");
        assert!(Scenario::parse(&text, &[]).is_err());
    }

    #[test]
    fn walls_enclose_the_workspace() {
        let s = Scenario::parse(MINIMAL, &[]).unwrap();
        let walls = s.walls();
        assert_eq!(walls.len(), 4);
        for w in &walls {
            let (d, _) = w.signed_distance(&Vec2::zeros());
            assert!(d >= 3.0 - 1e-9);
        }
    }
}
