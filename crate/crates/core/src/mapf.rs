//! Prioritized space-time A* over an SE(2) lattice.
//!
//! Objects are planned one at a time in ascending order of their solo
//! shortest-path length. Each search avoids static obstacles and every
//! earlier object's footprint at matching time steps, including after that
//! object has parked at its goal.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::geometry::{collide_with_tolerance, wrap_angle, Footprint, Polygon, Pose, Vec2, COLLISION_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lattice {
    pub resolution: f64,
    pub heading_bins: usize,
}

impl Default for Lattice {
    fn default() -> Self {
        Self {
            resolution: 0.25,
            heading_bins: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapfObject {
    /// Footprint about the centroid.
    pub poly: Polygon,
    pub start: Pose,
    pub goal: Pose,
}

#[derive(Debug, Clone)]
pub struct MapfProblem {
    pub objects: Vec<MapfObject>,
    pub obstacles: Vec<Polygon>,
    /// Axis-aligned workspace limits, if any.
    pub bounds: Option<(Vec2, Vec2)>,
    pub lattice: Lattice,
    /// ε_r: relative margin on the robot diameter.
    pub inflation: f64,
    pub robot_diameter: f64,
    /// Search effort cap per object.
    pub max_expansions: usize,
}

impl MapfProblem {
    pub fn new(objects: Vec<MapfObject>, obstacles: Vec<Polygon>, robot_diameter: f64) -> Self {
        Self {
            objects,
            obstacles,
            bounds: None,
            lattice: Lattice::default(),
            inflation: 0.1,
            robot_diameter,
            max_expansions: 2_000_000,
        }
    }

    /// Clearance kept between an object and static obstacles.
    pub fn static_margin(&self) -> f64 {
        (1.0 + self.inflation) * self.robot_diameter
    }

    /// Inflation of each object when checked against other objects; two
    /// objects keep the static margin between them.
    pub fn object_margin(&self) -> f64 {
        0.5 * self.static_margin()
    }
}

/// Poses at uniform steps `t = 0, 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedPath {
    pub object: usize,
    pub poses: Vec<Pose>,
}

impl TimedPath {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Pose at step `t`, holding the last pose afterwards.
    pub fn at(&self, t: usize) -> Pose {
        self.poses[t.min(self.poses.len() - 1)]
    }

    /// Index of the last step that moves.
    pub fn arrival(&self) -> usize {
        let last = *self.poses.last().expect("non-empty path");
        self.poses.iter().rposition(|p| *p != last).map_or(0, |i| i + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapfError {
    #[error("object {object}: {which} pose collides with the workspace")]
    BlockedEndpoint { object: usize, which: &'static str },
    #[error("object {object}: no collision-free path to the goal")]
    NoPath { object: usize },
}

pub fn interpolate(a: &Pose, b: &Pose, u: f64) -> Pose {
    Pose::new(
        a.x + (b.x - a.x) * u,
        a.y + (b.y - a.y) * u,
        a.psi + wrap_angle(b.psi - a.psi) * u,
    )
}

type Cell = (i32, i32, i32);

const MOVES: [Cell; 11] = [
    (1, 0, 0),
    (-1, 0, 0),
    (0, 1, 0),
    (0, -1, 0),
    (1, 1, 0),
    (1, -1, 0),
    (-1, 1, 0),
    (-1, -1, 0),
    (0, 0, 1),
    (0, 0, -1),
    (0, 0, 0),
];

struct Planner<'a> {
    problem: &'a MapfProblem,
    object: usize,
    static_fp: Footprint,
    dyn_fp: Footprint,
    heading_step: f64,
    goal_cell: Cell,
    snap: bool,
    /// Static verdicts keyed by doubled lattice coordinates.
    static_cache: HashMap<Cell, bool>,
    /// Earlier objects' inflated footprints at every half step.
    reserved: &'a [Vec<Footprint>],
}

impl<'a> Planner<'a> {
    fn new(problem: &'a MapfProblem, object: usize, reserved: &'a [Vec<Footprint>]) -> Self {
        let obj = &problem.objects[object];
        let base = obj.poly.footprint();
        let bins = problem.lattice.heading_bins as i32;
        let heading_step = std::f64::consts::TAU / bins as f64;
        let rel = obj.goal.position() - obj.start.position();
        let res = problem.lattice.resolution;
        let gh = (wrap_angle(obj.goal.psi - obj.start.psi) / heading_step).round() as i32;
        let goal_cell = ((rel.x / res).round() as i32, (rel.y / res).round() as i32, gh.rem_euclid(bins));
        let mut planner = Self {
            problem,
            object,
            static_fp: base.inflated(problem.static_margin()),
            dyn_fp: base.inflated(problem.object_margin()),
            heading_step,
            goal_cell,
            snap: false,
            static_cache: HashMap::new(),
            reserved,
        };
        planner.snap = !planner.pose(goal_cell).within(&obj.goal, 1e-9, 1e-9);
        planner
    }

    fn pose_half(&self, d: Cell) -> Pose {
        let s = self.problem.objects[self.object].start;
        let res = self.problem.lattice.resolution;
        Pose::new(
            s.x + 0.5 * d.0 as f64 * res,
            s.y + 0.5 * d.1 as f64 * res,
            s.psi + 0.5 * d.2 as f64 * self.heading_step,
        )
    }

    fn pose(&self, c: Cell) -> Pose {
        self.pose_half((2 * c.0, 2 * c.1, 2 * c.2))
    }

    fn pose_static_free(&self, p: &Pose) -> bool {
        let fp = self.static_fp.at(p);
        if let Some((lo, hi)) = self.problem.bounds {
            if fp.min.x < lo.x || fp.min.y < lo.y || fp.max.x > hi.x || fp.max.y > hi.y {
                return false;
            }
        }
        !self
            .problem
            .obstacles
            .iter()
            .any(|o| collide_with_tolerance(&fp, &o.footprint(), COLLISION_TOLERANCE))
    }

    fn static_free(&mut self, d: Cell) -> bool {
        if let Some(&v) = self.static_cache.get(&d) {
            return v;
        }
        let v = self.pose_static_free(&self.pose_half(d));
        self.static_cache.insert(d, v);
        v
    }

    /// Free of earlier objects at half step `h2` (twice the time index).
    fn dynamic_free(&self, p: &Pose, h2: usize) -> bool {
        let fp = self.dyn_fp.at(p);
        self.reserved.iter().all(|steps| {
            let other = &steps[h2.min(steps.len() - 1)];
            !collide_with_tolerance(&fp, other, COLLISION_TOLERANCE)
        })
    }

    /// Last half step at which any reservation still changes.
    fn settle_h2(&self) -> usize {
        self.reserved.iter().map(|s| s.len()).max().unwrap_or(1) - 1
    }

    fn move_ok(&mut self, a: Cell, b: Cell, t: usize, with_time: bool) -> bool {
        let mid = (a.0 + b.0, a.1 + b.1, a.2 + b.2);
        let end = (2 * b.0, 2 * b.1, 2 * b.2);
        if !self.static_free(end) || !self.static_free(mid) {
            return false;
        }
        if !with_time {
            return true;
        }
        self.dynamic_free(&self.pose(b), 2 * t + 2) && self.dynamic_free(&self.pose_half(mid), 2 * t + 1)
    }

    fn snap_ok(&self, t: usize, with_time: bool) -> bool {
        if !self.snap {
            return true;
        }
        let from = self.pose(self.goal_cell);
        let goal = self.problem.objects[self.object].goal;
        let mid = interpolate(&from, &goal, 0.5);
        if !self.pose_static_free(&goal) || !self.pose_static_free(&mid) {
            return false;
        }
        !with_time || (self.dynamic_free(&mid, 2 * t + 1) && self.dynamic_free(&goal, 2 * t + 2))
    }

    /// The goal, once reached at step `t`, stays free from then on.
    fn can_park(&self, t: usize) -> bool {
        let goal = self.problem.objects[self.object].goal;
        let settle = self.settle_h2();
        let from = 2 * t + if self.snap { 2 } else { 0 };
        (from..=settle.max(from)).all(|h2| self.dynamic_free(&goal, h2))
    }

    fn heuristic(&self, c: Cell) -> usize {
        let bins = self.problem.lattice.heading_bins as i32;
        let dh = (c.2 - self.goal_cell.2).rem_euclid(bins);
        let dh = dh.min(bins - dh);
        let dxy = (c.0 - self.goal_cell.0).abs().max((c.1 - self.goal_cell.1).abs());
        (dxy + dh) as usize + usize::from(self.snap)
    }

    /// A* over (cell, time); `with_time = false` ignores other objects.
    fn search(&mut self, with_time: bool) -> Result<Vec<Pose>, MapfError> {
        let obj = &self.problem.objects[self.object];
        let (start, goal) = (obj.start, obj.goal);
        if !self.pose_static_free(&start) || (with_time && !self.dynamic_free(&start, 0)) {
            return Err(MapfError::BlockedEndpoint {
                object: self.object,
                which: "start",
            });
        }
        if !self.pose_static_free(&goal) {
            return Err(MapfError::BlockedEndpoint {
                object: self.object,
                which: "goal",
            });
        }
        let bins = self.problem.lattice.heading_bins as i32;
        let settle_t = if with_time { self.settle_h2().div_ceil(2) } else { 0 };
        // Time stops mattering once every reservation has parked.
        let key = |c: Cell, t: usize| (c, t.min(settle_t));
        let origin: Cell = (0, 0, 0);
        let mut open = BinaryHeap::new();
        let mut parent: HashMap<(Cell, usize), (Cell, usize)> = HashMap::new();
        let mut closed: HashSet<(Cell, usize)> = HashSet::new();
        let mut counter = 0u64;
        open.push(Reverse((self.heuristic(origin), 0usize, counter, origin)));
        let mut expansions = 0usize;
        while let Some(Reverse((_, t, _, c))) = open.pop() {
            if !closed.insert(key(c, t)) {
                continue;
            }
            expansions += 1;
            if expansions > self.problem.max_expansions {
                break;
            }
            if c == self.goal_cell && self.snap_ok(t, with_time) && (!with_time || self.can_park(t)) {
                let mut cells = vec![(c, t)];
                let mut cur = (c, t);
                while let Some(&p) = parent.get(&key(cur.0, cur.1)) {
                    cells.push(p);
                    cur = p;
                }
                cells.reverse();
                let mut poses: Vec<Pose> = cells.iter().map(|(c, _)| self.pose(*c)).collect();
                poses[0] = start;
                if self.snap {
                    poses.push(goal);
                }
                return Ok(poses);
            }
            for m in MOVES {
                if !with_time && m == (0, 0, 0) {
                    continue;
                }
                let n = (c.0 + m.0, c.1 + m.1, (c.2 + m.2).rem_euclid(bins));
                // Keep the unwrapped heading for the midpoint check.
                let unwrapped = (c.0 + m.0, c.1 + m.1, c.2 + m.2);
                if closed.contains(&key(n, t + 1)) || !self.move_ok(c, unwrapped, t, with_time) {
                    continue;
                }
                if m.2 != 0 && !self.static_free((2 * n.0, 2 * n.1, 2 * n.2)) {
                    continue;
                }
                parent.entry(key(n, t + 1)).or_insert((c, t));
                counter += 1;
                open.push(Reverse((t + 1 + self.heuristic(n), t + 1, counter, n)));
            }
        }
        Err(MapfError::NoPath { object: self.object })
    }
}

/// Solo A* step count for one object, ignoring the others.
pub fn shortest_len(problem: &MapfProblem, object: usize) -> Result<usize, MapfError> {
    let mut planner = Planner::new(problem, object, &[]);
    planner.search(false).map(|p| p.len() - 1)
}

/// Plans every object in priority order and pads all paths to a common
/// length.
pub fn plan_all(problem: &MapfProblem) -> Result<Vec<TimedPath>, MapfError> {
    let order = priority_order(problem)?;
    let mut reserved: Vec<Vec<Footprint>> = Vec::new();
    let mut paths: Vec<Option<TimedPath>> = vec![None; problem.objects.len()];
    for &m in &order {
        let poses = {
            let mut planner = Planner::new(problem, m, &reserved);
            planner.search(true)?
        };
        let fp = problem.objects[m].poly.footprint().inflated(problem.object_margin());
        let mut halves = Vec::with_capacity(2 * poses.len());
        for (k, p) in poses.iter().enumerate() {
            halves.push(fp.at(p));
            if let Some(q) = poses.get(k + 1) {
                halves.push(fp.at(&interpolate(p, q, 0.5)));
            }
        }
        reserved.push(halves);
        paths[m] = Some(TimedPath { object: m, poses });
    }
    let horizon = paths.iter().flatten().map(|p| p.len()).max().unwrap_or(0);
    Ok(paths
        .into_iter()
        .map(|p| {
            let mut p = p.expect("every object planned");
            let last = *p.poses.last().expect("non-empty");
            p.poses.resize(horizon, last);
            p
        })
        .collect())
}

/// Objects sorted by solo shortest path length, ties by index.
pub fn priority_order(problem: &MapfProblem) -> Result<Vec<usize>, MapfError> {
    let mut lens = Vec::with_capacity(problem.objects.len());
    for m in 0..problem.objects.len() {
        lens.push((shortest_len(problem, m)?, m));
    }
    lens.sort();
    Ok(lens.into_iter().map(|(_, m)| m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> Polygon {
        Polygon::rectangle(side, side).unwrap()
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::from_points(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]).unwrap()
    }

    fn single(start: Pose, goal: Pose, obstacles: Vec<Polygon>, res: f64) -> MapfProblem {
        let mut p = MapfProblem::new(vec![MapfObject { poly: square(0.5), start, goal }], obstacles, 0.3);
        p.lattice.resolution = res;
        p
    }

    #[test]
    fn straight_line() {
        let p = single(Pose::origin(), Pose::new(3.0, 0.0, 0.0), vec![], 1.0);
        assert_eq!(shortest_len(&p, 0).unwrap(), 3);
        let paths = plan_all(&p).unwrap();
        assert_eq!(paths[0].poses.len(), 4);
        assert_eq!(*paths[0].poses.last().unwrap(), Pose::new(3.0, 0.0, 0.0));
        let same = single(Pose::origin(), Pose::origin(), vec![], 1.0);
        assert_eq!(shortest_len(&same, 0).unwrap(), 0);
    }

    #[test]
    fn wall_forces_detour() {
        // With margin 0.58 the columns x = 1 and x = 2 are blocked below
        // y = 4: up three, diagonal to (1, 4), across, diagonal and down three.
        let wall = rect(1.4, -5.0, 1.6, 2.6);
        let p = single(Pose::origin(), Pose::new(3.0, 0.0, 0.0), vec![wall], 1.0);
        let n = shortest_len(&p, 0).unwrap();
        assert_eq!(n, 9);
        let paths = plan_all(&p).unwrap();
        let fp = square(0.5).footprint().inflated(p.static_margin());
        for pose in &paths[0].poses {
            assert!(!collide_with_tolerance(&fp.at(pose), &rect(1.4, -5.0, 1.6, 2.6).footprint(), 0.0));
        }
    }

    #[test]
    fn goal_in_obstacle_is_reported() {
        let p = single(Pose::origin(), Pose::new(3.0, 0.0, 0.0), vec![rect(2.5, -0.5, 3.5, 0.5)], 1.0);
        assert_eq!(
            plan_all(&p).unwrap_err(),
            MapfError::BlockedEndpoint {
                object: 0,
                which: "goal"
            }
        );
    }

    #[test]
    fn off_lattice_goal_gets_snapped() {
        let p = single(Pose::origin(), Pose::new(1.1, 0.4, 0.3), vec![], 0.25);
        let paths = plan_all(&p).unwrap();
        assert_eq!(*paths[0].poses.last().unwrap(), Pose::new(1.1, 0.4, 0.3));
    }

    fn swap_problem() -> MapfProblem {
        // A 2-lane corridor: walls above and below leave room for both
        // objects side by side only in the central bay.
        let obstacles = vec![
            rect(-1.0, 1.9, 7.0, 2.3),
            rect(-1.0, -2.3, 7.0, -1.9),
            rect(2.2, -1.9, 3.8, -0.75),
        ];
        let objects = vec![
            MapfObject { poly: square(0.5), start: Pose::new(0.5, 0.5, 0.0), goal: Pose::new(5.5, 0.5, 0.0) },
            MapfObject { poly: square(0.5), start: Pose::new(5.5, 0.5, 0.0), goal: Pose::new(0.5, 0.5, 0.0) },
        ];
        let mut p = MapfProblem::new(objects, obstacles, 0.3);
        p.bounds = Some((Vec2::new(-1.0, -2.3), Vec2::new(7.0, 2.3)));
        p
    }

    #[test]
    fn swap_paths_are_pairwise_disjoint() {
        let p = swap_problem();
        let paths = plan_all(&p).unwrap();
        assert_eq!(paths[0].len(), paths[1].len());
        let fp = square(0.5).footprint().inflated(p.object_margin());
        for t in 0..paths[0].len() {
            let a = fp.at(&paths[0].at(t));
            let b = fp.at(&paths[1].at(t));
            assert!(!collide_with_tolerance(&a, &b, COLLISION_TOLERANCE), "step {t}");
        }
        assert_eq!(paths[0].poses.last().unwrap().position(), Vec2::new(5.5, 0.5));
        assert_eq!(paths[1].poses.last().unwrap().position(), Vec2::new(0.5, 0.5));
    }

    #[test]
    fn priority_follows_shortest_length() {
        let objects = vec![
            MapfObject { poly: square(0.5), start: Pose::new(0.0, 0.0, 0.0), goal: Pose::new(4.0, 0.0, 0.0) },
            MapfObject { poly: square(0.5), start: Pose::new(0.0, 3.0, 0.0), goal: Pose::new(1.0, 3.0, 0.0) },
        ];
        let p = MapfProblem::new(objects, vec![], 0.3);
        assert_eq!(priority_order(&p).unwrap(), vec![1, 0]);
    }
}
