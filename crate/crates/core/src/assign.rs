//! Receding-horizon assignment of subtasks to robot subgroups.
//!
//! Nodes assign one subtask at a time, always one whose predecessors are
//! already placed. Each assignment starts once its predecessors end and its
//! robots are free; its duration covers the robots' approach, the push and an
//! allowance for mode switches. Nodes are ranked by efficiency, the assigned
//! travel divided by the makespan.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::contact::{ObjectIntrinsics, RobotSpec};
use crate::decompose::{PartialOrder, Subtask};
use crate::geometry::{Polygon, Pose, Vec2};
use crate::modes::{mode_sufficient, PushContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignConfig {
    /// Subtasks newly assigned per planning round.
    pub horizon: usize,
    /// Largest subgroup tried for one subtask.
    pub n_cap: usize,
    /// Nominal object speed while pushing (m/s).
    pub push_speed: f64,
    /// Mean time per mode switch (s).
    pub switch_time: f64,
    pub max_expansions: usize,
    /// Every subgroup is enumerated while there are at most this many;
    /// otherwise subgroups are the nearest available robots.
    pub subset_limit: usize,
    pub sufficiency_samples: usize,
    pub seed: u64,
}

impl Default for AssignConfig {
    fn default() -> Self {
        Self {
            horizon: 4,
            n_cap: 4,
            push_speed: 0.3,
            switch_time: 2.0,
            max_expansions: 5_000,
            subset_limit: 16,
            sufficiency_samples: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectModel {
    pub poly: Polygon,
    pub intr: ObjectIntrinsics,
}

/// Travel of a pose sequence: translation plus `rho` times rotation.
pub fn path_travel(poses: &[Pose], rho: f64) -> f64 {
    poses.windows(2).map(|w| w[0].distance(&w[1]) + rho * w[0].angle_to(&w[1]).abs()).sum()
}

/// Changes of body-frame motion direction along the path, each counted as
/// one mode switch.
pub fn switch_estimate(poses: &[Pose]) -> usize {
    let dirs: Vec<(i64, i64)> = poses
        .windows(2)
        .filter(|w| w[0] != w[1])
        .map(|w| {
            let d = w[0].relative(&w[1]);
            let turn = if d.psi.abs() < 1e-9 { 0 } else { d.psi.signum() as i64 };
            if d.x.hypot(d.y) < 1e-9 {
                (-1, turn)
            } else {
                let bin = (d.y.atan2(d.x) / (std::f64::consts::PI / 8.0)).round() as i64;
                (bin.rem_euclid(16), turn)
            }
        })
        .collect();
    dirs.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub feasible: bool,
    pub duration: f64,
}

/// Completion-time estimates with a shared mode-sufficiency cache.
#[derive(Debug)]
pub struct Estimator {
    pub objects: Vec<ObjectModel>,
    pub robots: Vec<RobotSpec>,
    pub cfg: AssignConfig,
    cache: Mutex<BTreeMap<(usize, Vec<u64>), bool>>,
}

impl Estimator {
    pub fn new(objects: Vec<ObjectModel>, robots: Vec<RobotSpec>, cfg: AssignConfig) -> Self {
        Self {
            objects,
            robots,
            cfg,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// Fixes the answer for a subgroup, bypassing the rollout check.
    pub fn preset(&self, object: usize, group: &[usize], sufficient: bool) {
        let key = (object, self.spec_key(group));
        self.cache.lock().expect("cache lock").insert(key, sufficient);
    }

    fn spec_key(&self, group: &[usize]) -> Vec<u64> {
        let mut key: Vec<u64> = group
            .iter()
            .map(|&r| {
                let s = &self.robots[r];
                [s.radius, s.f_max, s.v_max, s.omega_max, s.mass]
                    .iter()
                    .fold(0xcbf2_9ce4_8422_2325u64, |h, v| (h ^ v.to_bits()).wrapping_mul(0x100_0000_01b3))
            })
            .collect();
        key.sort_unstable();
        key
    }

    /// The subgroup can realize any motion of the object. Depends only on
    /// the robots' specs, so answers are shared between equal teams.
    pub fn sufficient(&self, object: usize, group: &[usize]) -> bool {
        if group.is_empty() {
            return false;
        }
        let key = (object, self.spec_key(group));
        if let Some(&hit) = self.cache.lock().expect("cache lock").get(&key) {
            return hit;
        }
        let o = &self.objects[object];
        let team = group.iter().map(|&r| self.robots[r]).collect();
        let ctx = PushContext::new(o.poly.clone(), o.intr, team);
        let ok = mode_sufficient(&ctx, self.cfg.sufficiency_samples, self.cfg.seed).0;
        self.cache.lock().expect("cache lock").insert(key, ok);
        ok
    }

    /// Approach time for the slowest robot of the group, from `positions`
    /// to the object's boundary at the subtask start.
    pub fn approach_time(&self, s: &Subtask, group: &[usize], positions: &[Vec2]) -> f64 {
        let o = &self.objects[s.object];
        let target = s.first().position();
        group
            .iter()
            .map(|&r| {
                let spec = &self.robots[r];
                let gap = (positions[r] - target).norm() - o.poly.bounding_radius() - spec.radius;
                gap.max(0.0) / spec.v_max
            })
            .fold(0.0, f64::max)
    }

    pub fn estimate_completion(&self, s: &Subtask, group: &[usize], positions: &[Vec2]) -> Estimate {
        if s.is_stationary() {
            return Estimate {
                feasible: true,
                duration: 0.0,
            };
        }
        if !self.sufficient(s.object, group) {
            return Estimate {
                feasible: false,
                duration: f64::INFINITY,
            };
        }
        let rho = self.objects[s.object].poly.bounding_radius();
        let waypoints = s.waypoints();
        Estimate {
            feasible: true,
            duration: path_travel(&waypoints, rho) / self.cfg.push_speed
                + switch_estimate(&waypoints) as f64 * self.cfg.switch_time
                + self.approach_time(s, group, positions),
        }
    }
}

/// Execution state a planning round starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignState {
    pub now: f64,
    /// End time of every subtask already completed or committed.
    pub finished: Vec<Option<f64>>,
    pub robot_pos: Vec<Vec2>,
    pub robot_free: Vec<f64>,
    /// (subtask, sorted subgroup) pairs that must not be assigned again.
    pub excluded: Vec<(usize, Vec<usize>)>,
}

impl AssignState {
    pub fn initial(subtasks: usize, robot_pos: Vec<Vec2>) -> Self {
        let n = robot_pos.len();
        Self {
            now: 0.0,
            finished: vec![None; subtasks],
            robot_pos,
            robot_free: vec![0.0; n],
            excluded: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub subtask: usize,
    pub robots: Vec<usize>,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    /// In assignment order.
    pub entries: Vec<Assignment>,
    pub makespan: f64,
    pub efficiency: f64,
}

impl TaskPlan {
    /// Timed sequence of each robot, by start time.
    pub fn per_robot(&self, robots: usize) -> Vec<Vec<(f64, usize)>> {
        let mut out = vec![Vec::new(); robots];
        for e in &self.entries {
            for &r in &e.robots {
                out[r].push((e.start, e.subtask));
            }
        }
        for seq in &mut out {
            seq.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        out
    }

    pub fn entry(&self, subtask: usize) -> Option<&Assignment> {
        self.entries.iter().find(|e| e.subtask == subtask)
    }

    /// One line per assignment: label, robots, start and end estimates.
    pub fn gantt(&self, subtasks: &[Subtask]) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let robots: Vec<String> = e.robots.iter().map(|r| r.to_string()).collect();
            out.push_str(&format!(
                "gantt {} {} [{}] {:.6} {:.6}\n",
                e.subtask,
                subtasks[e.subtask].label(),
                robots.join(","),
                e.start,
                e.end
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssignError {
    #[error("no mode-sufficient subgroup for subtask {0}")]
    NoSubgroup(String),
}

#[derive(Debug, Clone)]
struct Node {
    entries: Vec<Assignment>,
    end_of: Vec<Option<f64>>,
    free: Vec<f64>,
    pos: Vec<Vec2>,
    length: f64,
    makespan: f64,
}

impl Node {
    fn efficiency(&self, now: f64) -> f64 {
        let span = self.makespan - now;
        if self.length <= 0.0 {
            0.0
        } else if span <= 1e-12 {
            f64::INFINITY
        } else {
            self.length / span
        }
    }
}

struct Ranked {
    eff: f64,
    makespan: f64,
    order: u64,
    node: Node,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    /// Higher efficiency, then shorter makespan, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        self.eff
            .total_cmp(&other.eff)
            .then(other.makespan.total_cmp(&self.makespan))
            .then(other.order.cmp(&self.order))
    }
}

fn subsets(items: &[usize], max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=max.min(items.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().map(|&i| items[i]).collect());
            let Some(i) = (0..size).rev().find(|&i| idx[i] < items.len() - size + i) else {
                break;
            };
            idx[i] += 1;
            for j in i + 1..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

fn subset_count(n: usize, max: usize) -> usize {
    let mut total = 0usize;
    let mut c = 1usize;
    for k in 1..=max.min(n) {
        c = c * (n - k + 1) / k;
        total = total.saturating_add(c);
    }
    total
}

struct Planner<'a> {
    subtasks: &'a [Subtask],
    order: &'a PartialOrder,
    est: &'a Estimator,
    now: f64,
    excluded: &'a [(usize, Vec<usize>)],
}

impl Planner<'_> {
    fn frontier(&self, node: &Node) -> Vec<usize> {
        (0..self.subtasks.len())
            .filter(|&s| node.end_of[s].is_none() && self.order.pre(s).iter().all(|&p| node.end_of[p].is_some()))
            .collect()
    }

    fn groups(&self, s: &Subtask, node: &Node) -> Vec<Vec<usize>> {
        let n = self.est.robots.len();
        let cap = self.est.cfg.n_cap;
        let all: Vec<usize> = (0..n).collect();
        if subset_count(n, cap) <= self.est.cfg.subset_limit {
            return subsets(&all, cap);
        }
        let target = s.first().position();
        let mut ranked = all;
        let arrival = |r: usize| node.free[r] + (node.pos[r] - target).norm() / self.est.robots[r].v_max;
        ranked.sort_by(|&a, &b| arrival(a).total_cmp(&arrival(b)).then(a.cmp(&b)));
        (1..=cap.min(n))
            .map(|k| {
                let mut g = ranked[..k].to_vec();
                g.sort_unstable();
                g
            })
            .collect()
    }

    fn place(&self, node: &Node, s: usize, group: Vec<usize>, duration: f64) -> Node {
        let st = &self.subtasks[s];
        let ready = self.order.pre(s).iter().filter_map(|&p| node.end_of[p]).fold(self.now, f64::max);
        let start = group.iter().map(|&r| node.free[r]).fold(ready, f64::max);
        let end = start + duration;
        let mut child = node.clone();
        for &r in &group {
            child.free[r] = end;
            child.pos[r] = st.last().position();
        }
        child.end_of[s] = Some(end);
        child.length += path_travel(&st.waypoints(), self.est.objects[st.object].poly.bounding_radius());
        child.makespan = child.makespan.max(end);
        child.entries.push(Assignment {
            subtask: s,
            robots: group,
            start,
            end,
        });
        child
    }

    fn children(&self, node: &Node) -> Result<Vec<Node>, AssignError> {
        let mut out = Vec::new();
        for s in self.frontier(node) {
            let st = &self.subtasks[s];
            if st.is_stationary() {
                out.push(self.place(node, s, Vec::new(), 0.0));
                continue;
            }
            let before = out.len();
            for group in self.groups(st, node) {
                if self.excluded.iter().any(|(x, g)| *x == s && *g == group) {
                    continue;
                }
                let e = self.est.estimate_completion(st, &group, &node.pos);
                if e.feasible {
                    out.push(self.place(node, s, group, e.duration));
                }
            }
            if out.len() == before {
                return Err(AssignError::NoSubgroup(st.label()));
            }
        }
        Ok(out)
    }
}

fn keep_best(best: &mut Option<Ranked>, node: Node, order: u64, now: f64) {
    let cand = Ranked {
        eff: node.efficiency(now),
        makespan: node.makespan,
        order,
        node,
    };
    if best.as_ref().is_none_or(|b| cand > *b) {
        *best = Some(cand);
    }
}

/// Assigns up to `horizon` pending subtasks, starting from `state`.
pub fn assign(
    subtasks: &[Subtask],
    order: &PartialOrder,
    est: &Estimator,
    state: &AssignState,
) -> Result<TaskPlan, AssignError> {
    let planner = Planner {
        subtasks,
        order,
        est,
        now: state.now,
        excluded: &state.excluded,
    };
    let root = Node {
        entries: Vec::new(),
        end_of: state.finished.clone(),
        free: state.robot_free.iter().map(|&t| t.max(state.now)).collect(),
        pos: state.robot_pos.clone(),
        length: 0.0,
        makespan: state.now,
    };
    let horizon = est.cfg.horizon.max(1);
    let terminal = |n: &Node| n.entries.len() >= horizon || n.end_of.iter().all(Option::is_some);
    let mut best: Option<Ranked> = None;
    let mut open = BinaryHeap::new();
    let mut counter = 0u64;
    if terminal(&root) {
        keep_best(&mut best, root, 0, state.now);
    } else {
        open.push(Ranked {
            eff: 0.0,
            makespan: root.makespan,
            order: 0,
            node: root,
        });
    }
    let mut expansions = 0;
    let mut last = None;
    while let Some(top) = open.pop() {
        if expansions >= est.cfg.max_expansions {
            last = Some(top.node);
            break;
        }
        expansions += 1;
        for child in planner.children(&top.node)? {
            counter += 1;
            if terminal(&child) {
                keep_best(&mut best, child, counter, state.now);
            } else {
                open.push(Ranked {
                    eff: child.efficiency(state.now),
                    makespan: child.makespan,
                    order: counter,
                    node: child,
                });
            }
        }
    }
    if best.is_none() {
        // Out of expansions without a full horizon: finish greedily.
        let mut node = last.expect("open nodes remain when no terminal was found");
        while !terminal(&node) {
            node = planner
                .children(&node)?
                .into_iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| {
                    a.efficiency(state.now)
                        .total_cmp(&b.efficiency(state.now))
                        .then(b.makespan.total_cmp(&a.makespan))
                        .then(j.cmp(i))
                })
                .map(|(_, n)| n)
                .expect("a non-terminal node has children");
        }
        keep_best(&mut best, node, counter + 1, state.now);
    }
    let best = best.expect("a terminal node was recorded");
    Ok(TaskPlan {
        efficiency: best.eff,
        makespan: best.makespan,
        entries: best.node.entries,
    })
}

/// Checks ordering, subgroup sufficiency and per-robot timing of a plan.
pub fn validate(
    plan: &TaskPlan,
    subtasks: &[Subtask],
    order: &PartialOrder,
    est: &Estimator,
    state: &AssignState,
) -> Result<(), String> {
    let end_of = |s: usize| plan.entry(s).map(|e| e.end).or(state.finished[s]);
    for e in &plan.entries {
        let st = &subtasks[e.subtask];
        if state.finished[e.subtask].is_some() {
            return Err(format!("{} was already finished", st.label()));
        }
        for p in order.pre(e.subtask) {
            match end_of(p) {
                Some(t) if t <= e.start + 1e-9 => {}
                _ => return Err(format!("{} starts before {} ends", st.label(), subtasks[p].label())),
            }
        }
        if !st.is_stationary() && !est.sufficient(st.object, &e.robots) {
            return Err(format!("subgroup of {} is not mode-sufficient", st.label()));
        }
        if e.end < e.start || e.start < state.now - 1e-9 {
            return Err(format!("bad interval for {}", st.label()));
        }
    }
    for (r, seq) in plan.per_robot(est.robots.len()).iter().enumerate() {
        let mut free = state.robot_free[r];
        let mut pos = state.robot_pos[r];
        for &(start, s) in seq {
            let e = plan.entry(s).expect("listed entry");
            if start < free - 1e-9 {
                return Err(format!("robot {r} is double-booked at {}", subtasks[s].label()));
            }
            let approach = est.approach_time(&subtasks[s], &[r], &{
                let mut p = state.robot_pos.clone();
                p[r] = pos;
                p
            });
            if e.end - e.start < approach - 1e-9 {
                return Err(format!("robot {r} cannot reach {} in time", subtasks[s].label()));
            }
            free = e.end;
            pos = subtasks[s].last().position();
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplanPolicy {
    pub completions: usize,
    /// Simulated seconds between planning rounds.
    pub period: f64,
}

impl Default for ReplanPolicy {
    fn default() -> Self {
        Self {
            completions: 2,
            period: 80.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReplanState {
    pub completed_since_plan: usize,
    pub elapsed_since_plan: f64,
    /// A subtask failed even after replanning its hybrid plan.
    pub failure: bool,
}

pub fn replan_trigger(state: &ReplanState, policy: &ReplanPolicy) -> bool {
    state.completed_since_plan >= policy.completions || state.elapsed_since_plan >= policy.period || state.failure
}

#[cfg(test)]
mod tests;
