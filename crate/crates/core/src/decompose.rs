//! Segmentation of timed paths into subtasks and their precedence relation.
//!
//! Each object's covered area at a step is its footprint inflated by a
//! margin (room for the pushing robots). A segment is cut one step before
//! the object would cover a spot that another object covers at an earlier
//! step, so it never runs ahead into territory it must yield.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{collide_with_tolerance, Footprint, Polygon, Pose, COLLISION_TOLERANCE};
use crate::mapf::{interpolate, MapfProblem, TimedPath};

/// Share of the planner's inter-object margin used as the covered-area
/// margin. It must stay below 1 so that areas at equal steps never meet.
pub const AREA_MARGIN_SHARE: f64 = 0.6;

pub fn area_margin(problem: &MapfProblem) -> f64 {
    AREA_MARGIN_SHARE * problem.object_margin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub id: usize,
    pub object: usize,
    /// Position among the object's segments, from 0.
    pub k: usize,
    /// First and last step index, inclusive.
    pub start: usize,
    pub end: usize,
    pub poses: Vec<Pose>,
}

impl Subtask {
    /// Poses with consecutive repeats removed.
    pub fn waypoints(&self) -> Vec<Pose> {
        let mut out: Vec<Pose> = Vec::new();
        for p in &self.poses {
            if out.last() != Some(p) {
                out.push(*p);
            }
        }
        out
    }

    pub fn is_stationary(&self) -> bool {
        self.waypoints().len() == 1
    }

    /// Translational length of the pose sequence.
    pub fn length(&self) -> f64 {
        self.poses.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    pub fn first(&self) -> Pose {
        self.poses[0]
    }

    pub fn last(&self) -> Pose {
        *self.poses.last().expect("non-empty slice")
    }

    pub fn label(&self) -> String {
        format!("S{}_{}", self.k + 1, self.object + 1)
    }
}

/// Strict precedence over subtask ids, stored transitively closed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialOrder {
    before: Vec<Vec<bool>>,
}

impl PartialOrder {
    pub fn new(n: usize) -> Self {
        Self {
            before: vec![vec![false; n]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.before.len()
    }

    pub fn is_empty(&self) -> bool {
        self.before.is_empty()
    }

    pub fn add(&mut self, a: usize, b: usize) {
        self.before[a][b] = true;
    }

    /// `a ⪯ b`: `a` must finish before `b` starts.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.before[a][b]
    }

    pub fn pre(&self, b: usize) -> Vec<usize> {
        (0..self.len()).filter(|&a| self.before[a][b]).collect()
    }

    /// Every related pair in id order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.before[a][b])
            .collect()
    }

    /// Pairs not implied by a chain through a third subtask.
    pub fn cover_edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        self.pairs()
            .into_iter()
            .filter(|&(a, b)| !(0..n).any(|c| c != a && c != b && self.before[a][c] && self.before[c][b]))
            .collect()
    }

    pub fn close(&mut self) {
        let n = self.len();
        for k in 0..n {
            for i in 0..n {
                if self.before[i][k] {
                    for j in 0..n {
                        if self.before[k][j] {
                            self.before[i][j] = true;
                        }
                    }
                }
            }
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Kahn order with smallest-id tie-break.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indeg: Vec<usize> = (0..n).map(|b| self.pre(b).len()).collect();
        let mut done = vec![false; n];
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let next = (0..n).find(|&i| !done[i] && indeg[i] == 0)?;
            done[next] = true;
            out.push(next);
            for b in 0..n {
                if self.before[next][b] {
                    indeg[b] -= 1;
                }
            }
        }
        Some(out)
    }

    /// Number of subtasks on the longest precedence chain.
    pub fn longest_chain(&self) -> usize {
        let Some(order) = self.topological_order() else {
            return 0;
        };
        let mut depth = vec![1usize; self.len()];
        for &b in &order {
            for a in self.pre(b) {
                depth[b] = depth[b].max(depth[a] + 1);
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub subtasks: Vec<Subtask>,
    pub order: PartialOrder,
    /// Passes of the outer segmentation loop.
    pub rounds: usize,
}

impl Decomposition {
    pub fn of_object(&self, m: usize) -> impl Iterator<Item = &Subtask> {
        self.subtasks.iter().filter(move |s| s.object == m)
    }

    /// Graphviz rendering of the cover relation.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph precedence {\n  rankdir=LR;\n");
        for t in &self.subtasks {
            let _ = writeln!(s, "  n{} [label=\"{}\\n[{}, {}]\"];", t.id, t.label(), t.start, t.end);
        }
        for (a, b) in self.order.cover_edges() {
            let _ = writeln!(s, "  n{a} -> n{b};");
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecomposeError {
    #[error("paths have different lengths")]
    Ragged,
    #[error("precedence relation has a cycle")]
    Cyclic,
}

/// Pairwise footprint overlaps between objects at all step pairs.
struct Contacts {
    objects: usize,
    steps: usize,
    hit: Vec<Vec<bool>>,
}

impl Contacts {
    fn new(paths: &[TimedPath], polys: &[Polygon], margin: f64) -> Self {
        let steps = paths.first().map_or(0, |p| p.len());
        let fps: Vec<Vec<Footprint>> = paths
            .iter()
            .zip(polys)
            .map(|(p, poly)| {
                let base = poly.footprint().inflated(margin);
                p.poses.iter().map(|q| base.at(q)).collect()
            })
            .collect();
        let n = paths.len();
        let mut hit = vec![Vec::new(); n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    hit[a * n + b] = (0..steps * steps)
                        .map(|i| collide_with_tolerance(&fps[a][i / steps], &fps[b][i % steps], COLLISION_TOLERANCE))
                        .collect();
                }
            }
        }
        Self { objects: n, steps, hit }
    }

    fn overlaps(&self, a: usize, t: usize, b: usize, u: usize) -> bool {
        self.hit[a * self.objects + b][t * self.steps + u]
    }

    /// First step of `a` in `[a0, a1]` whose area meets the union of `b`'s
    /// areas over steps `[b0, b1]`.
    fn first_contact(&self, a: usize, (a0, a1): (usize, usize), b: usize, (b0, b1): (usize, usize)) -> Option<usize> {
        (a0..=a1).find(|&t| (b0..=b1).any(|u| self.overlaps(a, t, b, u)))
    }
}

/// Splits all paths and orders the resulting subtasks. `margin` inflates
/// each object's footprint when comparing covered areas.
pub fn segment_and_order(paths: &[TimedPath], polys: &[Polygon], margin: f64) -> Result<Decomposition, DecomposeError> {
    let steps = paths.first().map_or(0, |p| p.len());
    if paths.iter().any(|p| p.len() != steps) || polys.len() != paths.len() {
        return Err(DecomposeError::Ragged);
    }
    if steps == 0 {
        return Ok(Decomposition {
            subtasks: Vec::new(),
            order: PartialOrder::new(0),
            rounds: 0,
        });
    }
    let last = steps - 1;
    let contacts = Contacts::new(paths, polys, margin);
    let n = paths.len();
    let mut cursor = vec![0usize; n];
    let mut cuts: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut rounds = 0;
    while cursor.iter().any(|&t| t < last) {
        rounds += 1;
        let mut progressed = false;
        for m in 0..n {
            if cursor[m] >= last {
                continue;
            }
            let split = split_point(&contacts, &cursor, m, last);
            if split == cursor[m] {
                continue;
            }
            cuts[m].push((cursor[m], split));
            cursor[m] = split;
            progressed = true;
        }
        if !progressed {
            // Two objects swap places within one step; let the lower index
            // move first.
            let m = (0..n).find(|&m| cursor[m] < last).expect("unfinished object");
            cuts[m].push((cursor[m], cursor[m] + 1));
            cursor[m] += 1;
        }
    }
    let mut subtasks = Vec::new();
    for (m, list) in cuts.iter().enumerate() {
        for (k, &(s, e)) in list.iter().enumerate() {
            subtasks.push(Subtask {
                id: subtasks.len(),
                object: m,
                k,
                start: s,
                end: e,
                poses: paths[m].poses[s..=e].to_vec(),
            });
        }
    }
    let order = relate(&contacts, &subtasks)?;
    Ok(Decomposition { subtasks, order, rounds })
}

/// Next cut for object `m`: one step before the first remaining step whose
/// area overlaps a spot another object covers at an earlier remaining step.
fn split_point(contacts: &Contacts, cursor: &[usize], m: usize, last: usize) -> usize {
    let mut split = last;
    for other in 0..cursor.len() {
        if other == m {
            continue;
        }
        let entry = (cursor[m] + 1..=last).find(|&t| (cursor[other]..t).any(|u| contacts.overlaps(m, t, other, u)));
        if let Some(t) = entry {
            split = split.min(t - 1);
        }
    }
    split
}

fn relate(contacts: &Contacts, subtasks: &[Subtask]) -> Result<PartialOrder, DecomposeError> {
    let mut order = PartialOrder::new(subtasks.len());
    for a in subtasks {
        for b in subtasks {
            if a.id == b.id {
                continue;
            }
            if a.object == b.object {
                if a.k < b.k {
                    order.add(a.id, b.id);
                }
                continue;
            }
            if b.id < a.id {
                continue;
            }
            // Closed windows make the two entry times defined together.
            let (Some(ta), Some(tb)) = (
                contacts.first_contact(a.object, (a.start, a.end), b.object, (b.start, b.end)),
                contacts.first_contact(b.object, (b.start, b.end), a.object, (a.start, a.end)),
            ) else {
                continue;
            };
            if ta <= tb {
                order.add(a.id, b.id);
            } else {
                order.add(b.id, a.id);
            }
        }
    }
    order.close();
    if (0..order.len()).any(|i| order.precedes(i, i)) {
        return Err(DecomposeError::Cyclic);
    }
    Ok(order)
}

/// Result of executing subtasks under precedence gating.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub collisions: usize,
    pub makespan: f64,
    /// (start, end) time of every subtask.
    pub windows: Vec<(f64, f64)>,
}

/// Executes every subtask as soon as all its predecessors finish, taking
/// `durations[id]` seconds each, and counts sampled instants at which two
/// object footprints overlap.
pub fn replay_ordered(
    decomp: &Decomposition,
    paths: &[TimedPath],
    polys: &[Polygon],
    durations: &[f64],
) -> Replay {
    let n = decomp.subtasks.len();
    let mut windows = vec![(0.0, 0.0); n];
    for &id in &decomp.order.topological_order().expect("acyclic order") {
        let start = decomp.order.pre(id).iter().map(|&a| windows[a].1).fold(0.0, f64::max);
        windows[id] = (start, start + durations[id]);
    }
    let makespan = windows.iter().map(|w| w.1).fold(0.0, f64::max);
    let mut times: Vec<f64> = Vec::new();
    for (t, w) in decomp.subtasks.iter().zip(&windows) {
        let slots = 4 * (t.end - t.start).max(1);
        times.extend((0..=slots).map(|j| w.0 + (w.1 - w.0) * j as f64 / slots as f64));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let fps: Vec<Footprint> = polys.iter().map(|p| p.footprint()).collect();
    let mut collisions = 0;
    for &tau in &times {
        let placed: Vec<Footprint> = (0..paths.len())
            .map(|m| fps[m].at(&pose_at(decomp, &windows, &paths[m], m, tau)))
            .collect();
        for a in 0..placed.len() {
            for b in a + 1..placed.len() {
                if collide_with_tolerance(&placed[a], &placed[b], 0.0) {
                    collisions += 1;
                }
            }
        }
    }
    Replay {
        collisions,
        makespan,
        windows,
    }
}

fn pose_at(decomp: &Decomposition, windows: &[(f64, f64)], path: &TimedPath, m: usize, tau: f64) -> Pose {
    let mut pose = path.poses[0];
    for t in decomp.of_object(m) {
        let (s, e) = windows[t.id];
        if tau >= e {
            pose = t.last();
        } else if tau >= s {
            let span = (t.end - t.start) as f64;
            let x = if e > s { (tau - s) / (e - s) * span } else { span };
            let i = (x.floor() as usize).min(t.poses.len() - 2);
            return interpolate(&t.poses[i], &t.poses[i + 1], x - i as f64);
        } else {
            break;
        }
    }
    pose
}
