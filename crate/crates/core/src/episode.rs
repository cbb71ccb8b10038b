//! Closed-loop execution of a decomposed scenario.
//!
//! Subtasks are assigned to robot subgroups in rounds. An assigned subtask
//! starts once every predecessor is complete and its robots are free; it then
//! gets a hybrid plan from the object's current pose. Its robots alternate
//! between approaching the contacts of the current mode and pushing toward
//! the next keyframe. A detected failure first triggers a new hybrid plan,
//! then reassignment with the failed subgroup excluded; when no subgroup is
//! left the episode fails.
//!
//! The trace starts with `#` header lines: scenario hash, seed, effective
//! config as JSON, workspace bounds, and one `subtask <label> <object>
//! <poses>` line per subtask. Then one line per control tick with
//! `key=value` fields: `t`, `obj` and `rob` poses, `cmd` velocity commands,
//! `eng` engaged `robot>object` pairs, `act` running subtasks as
//! `label:stage:phase`, and `ev` events. Poses are `x,y,psi` joined by `;`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assign::{assign, path_travel, replan_trigger, AssignState, Assignment, Estimator, ReplanState};
use crate::contact::{ContactPoint, PushingMode};
use crate::decompose::Decomposition;
use crate::geometry::{arc_from_poses, ArcMotion, Pose, Vec2};
use crate::hybrid::{search_traced, HybridPlan, LibraryProposer, Libraries};
use crate::scenario::Scenario;
use crate::sim::control::{goto, seek};
use crate::sim::nav::NavGrid;
use crate::sim::world::{Contactee, CONTROL_HZ, PHYSICS_HZ};
use crate::sim::{controller_step, detect_failure, ControlCommand, FailureKind, ObjectBody, Pusher, RobotBody, World, GOAL_ANGLE, GOAL_DIST};

/// Robots closer than this to their contact drive straight onto it.
const SEEK_RANGE: f64 = 0.25;
/// Navigation goal: this far outside the contact along its normal.
const STANDOFF: f64 = 0.1;
/// Extra grid margin around obstacles and objects.
const NAV_MARGIN: f64 = 0.03;
const WAYPOINT_REACHED: f64 = 0.08;
const PATH_REFRESH: f64 = 1.0;
/// Gap kept between idle robots and a moving object.
const PARK_GAP: f64 = 0.2;
/// Every robot must sit this close to its contact before a push starts, so
/// no single robot meets the object first.
const SEAT_TOL: f64 = 0.003;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub time: f64,
    pub subtask: String,
    pub kind: String,
}

/// Simulation-derived outcome; identical across reruns of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub success: bool,
    pub reason: Option<String>,
    pub makespan: f64,
    /// Per object: distance and heading error to its goal.
    pub terminal_errors: Vec<[f64; 2]>,
    pub modes: usize,
    pub switches: usize,
    pub collisions: usize,
    pub rounds: usize,
    pub replans: usize,
    pub reassignments: usize,
    pub hybrid_expansions: usize,
    pub failures: Vec<FailureRecord>,
    /// Executed (start, end) of every subtask.
    pub windows: Vec<Option<[f64; 2]>>,
    /// Subgroup that completed each subtask.
    pub groups: Vec<Vec<usize>>,
}

impl ExecutionReport {
    /// Executed schedule, one line per completed subtask.
    pub fn gantt(&self, decomp: &Decomposition) -> String {
        let mut out = String::new();
        for (s, w) in self.windows.iter().enumerate() {
            if let Some([a, b]) = w {
                let robots: Vec<String> = self.groups[s].iter().map(|r| r.to_string()).collect();
                let _ = writeln!(out, "gantt {s} {} [{}] {a:.6} {b:.6}", decomp.subtasks[s].label(), robots.join(","));
            }
        }
        out
    }
}

/// Wall-clock planning time in seconds; varies between runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub hybrid: f64,
    pub assign: f64,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub report: ExecutionReport,
    pub trace: String,
    pub timings: Timings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Approach,
    Push,
}

#[derive(Debug, Clone)]
struct NavPath {
    planned: f64,
    goal: Vec2,
    points: Vec<Vec2>,
}

#[derive(Debug, Clone)]
struct Job {
    subtask: usize,
    object: usize,
    robots: Vec<usize>,
    plan: HybridPlan,
    stage: usize,
    phase: Phase,
    /// Start of the current phase.
    since: f64,
    stage_since: f64,
    /// Object poses while pushing in this stage, kept across re-seats.
    history: Vec<(f64, Pose)>,
    pushed: bool,
    arc: ArcMotion,
    mode: Option<PushingMode>,
    replans: usize,
    paths: BTreeMap<usize, NavPath>,
}

enum Outcome {
    Running,
    Done,
    Failed(FailureKind),
}

struct Runner<'a> {
    sc: &'a Scenario,
    decomp: &'a Decomposition,
    libs: &'a mut Libraries,
    est: Estimator,
    world: World,
    jobs: Vec<Job>,
    queue: Vec<Assignment>,
    done: Vec<Option<f64>>,
    started: Vec<Option<f64>>,
    excluded: Vec<(usize, Vec<usize>)>,
    replan: ReplanState,
    last_round: f64,
    fired: Vec<bool>,
    blocked: BTreeSet<(usize, String)>,
    grid: Option<NavGrid>,
    events: Vec<String>,
    report: ExecutionReport,
    timings: Timings,
}

fn contactee_name(c: &Contactee) -> String {
    match c {
        Contactee::Obstacle(k) => format!("obstacle{k}"),
        Contactee::Object(k) => format!("object{k}"),
    }
}

impl<'a> Runner<'a> {
    fn new(sc: &'a Scenario, decomp: &'a Decomposition, libs: &'a mut Libraries) -> Self {
        let cfg = sc.config();
        let objects = sc
            .objects
            .iter()
            .map(|o| ObjectBody::new(o.model.poly.clone(), o.model.intr, o.start))
            .collect();
        let robots = sc.robots.iter().zip(&sc.robot_starts).map(|(s, p)| RobotBody::new(*s, *p)).collect();
        let n = decomp.subtasks.len();
        Self {
            sc,
            decomp,
            libs,
            est: Estimator::new(sc.object_models(), sc.robots.clone(), cfg.assign.clone()),
            world: World::new(objects, robots, sc.static_obstacles()),
            jobs: Vec::new(),
            queue: Vec::new(),
            done: vec![None; n],
            started: vec![None; n],
            excluded: Vec::new(),
            replan: ReplanState::default(),
            last_round: 0.0,
            fired: vec![false; cfg.episode.faults.len()],
            blocked: BTreeSet::new(),
            grid: None,
            events: Vec::new(),
            report: ExecutionReport {
                success: false,
                reason: None,
                makespan: 0.0,
                terminal_errors: Vec::new(),
                modes: 0,
                switches: 0,
                collisions: 0,
                rounds: 0,
                replans: 0,
                reassignments: 0,
                hybrid_expansions: 0,
                failures: Vec::new(),
                windows: vec![None; n],
                groups: vec![Vec::new(); n],
            },
            timings: Timings::default(),
        }
    }

    fn now(&self) -> f64 {
        self.world.time
    }

    fn label(&self, s: usize) -> String {
        self.decomp.subtasks[s].label()
    }

    fn rho(&self, object: usize) -> f64 {
        self.sc.objects[object].model.poly.bounding_radius()
    }

    /// Index of the subtask waypoint nearest to the object's pose.
    fn progress(&self, s: usize) -> usize {
        let st = &self.decomp.subtasks[s];
        let pose = self.world.objects[st.object].pose;
        let rho = self.rho(st.object);
        let wps = st.waypoints();
        (0..wps.len())
            .min_by(|&a, &b| {
                let d = |i: usize| wps[i].distance(&pose) + rho * wps[i].angle_to(&pose).abs();
                d(a).total_cmp(&d(b))
            })
            .unwrap_or(0)
    }

    fn remaining(&self, s: usize) -> f64 {
        let st = &self.decomp.subtasks[s];
        let wps = st.waypoints();
        let from = self.progress(s);
        path_travel(&wps[from..], self.rho(st.object)) / self.sc.config().assign.push_speed
    }

    fn round(&mut self) -> Result<(), String> {
        let clock = Instant::now();
        let now = self.now();
        let mut finished = self.done.clone();
        let mut free = vec![now; self.sc.robots.len()];
        for job in &self.jobs {
            let end = now + self.remaining(job.subtask);
            finished[job.subtask] = Some(end);
            for &r in &job.robots {
                free[r] = end;
            }
        }
        let state = AssignState {
            now,
            finished,
            robot_pos: self.world.robots.iter().map(|r| r.pose.position()).collect(),
            robot_free: free,
            excluded: self.excluded.clone(),
        };
        let result = assign(&self.decomp.subtasks, &self.decomp.order, &self.est, &state);
        self.timings.assign += clock.elapsed().as_secs_f64();
        let plan = result.map_err(|e| e.to_string())?;
        self.queue = plan.entries;
        self.report.rounds += 1;
        self.replan = ReplanState::default();
        self.last_round = now;
        self.events.push(format!("round:{}", self.report.rounds));
        Ok(())
    }

    fn startable(&self, i: usize) -> bool {
        let e = &self.queue[i];
        let pre_done = self.decomp.order.pre(e.subtask).iter().all(|&p| self.done[p].is_some());
        let busy = e.robots.iter().any(|r| self.jobs.iter().any(|j| j.robots.contains(r)));
        // Keep each robot's planned order.
        let waits = self.queue.iter().enumerate().any(|(k, o)| {
            k != i && o.robots.iter().any(|r| e.robots.contains(r)) && (o.start < e.start || (o.start == e.start && k < i))
        });
        pre_done && !busy && !waits
    }

    fn start_ready(&mut self) {
        while let Some(i) = (0..self.queue.len()).find(|&i| self.startable(i)) {
            let e = self.queue.remove(i);
            self.begin(e.subtask, e.robots);
        }
    }

    fn finish(&mut self, s: usize) {
        let now = self.now();
        self.done[s] = Some(now);
        self.report.windows[s] = Some([self.started[s].unwrap_or(now), now]);
        self.replan.completed_since_plan += 1;
        self.events.push(format!("done:{}", self.label(s)));
    }

    fn begin(&mut self, s: usize, robots: Vec<usize>) {
        let now = self.now();
        self.started[s] = Some(now);
        self.report.groups[s] = robots.clone();
        let names: Vec<String> = robots.iter().map(|r| r.to_string()).collect();
        self.events.push(format!("start:{}:{}", self.label(s), names.join(",")));
        if self.decomp.subtasks[s].is_stationary() {
            self.finish(s);
            return;
        }
        let object = self.decomp.subtasks[s].object;
        match self.plan_for(s, &robots, 0) {
            Some(plan) => {
                let pose = self.world.objects[object].pose;
                self.jobs.push(Job {
                    subtask: s,
                    object,
                    robots,
                    plan,
                    stage: 0,
                    phase: Phase::Approach,
                    since: now,
                    stage_since: now,
                    history: vec![(now, pose)],
                    pushed: false,
                    arc: arc_from_poses(&pose, &pose),
                    mode: None,
                    replans: 0,
                    paths: BTreeMap::new(),
                });
                let j = self.jobs.len() - 1;
                self.enter_stage(j);
            }
            None => {
                self.report.failures.push(FailureRecord {
                    time: now,
                    subtask: self.label(s),
                    kind: "plan".into(),
                });
                self.events.push(format!("fail:{}:plan", self.label(s)));
                self.reassign(s, robots);
            }
        }
    }

    /// Hybrid plan from the object's current pose through the rest of the
    /// subtask's waypoints.
    fn plan_for(&mut self, s: usize, robots: &[usize], attempt: usize) -> Option<HybridPlan> {
        let cfg = self.sc.config();
        let st = &self.decomp.subtasks[s];
        let pose = self.world.objects[st.object].pose;
        let wps = st.waypoints();
        let mut guide = vec![pose];
        guide.extend_from_slice(&wps[(self.progress(s) + 1).min(wps.len())..]);
        if guide.len() == 1 {
            guide.push(st.last());
        }
        let ctx = self.sc.push_context(st.object, robots);
        let mut scfg = cfg.search.clone();
        scfg.seed ^= (attempt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let clock = Instant::now();
        let (result, stats) = search_traced(&ctx, &guide, self.libs, &LibraryProposer::default(), &scfg);
        self.timings.hybrid += clock.elapsed().as_secs_f64();
        self.report.hybrid_expansions += stats.expansions;
        result.ok()
    }

    fn enter_stage(&mut self, j: usize) {
        let now = self.now();
        let label = self.label(self.jobs[j].subtask);
        let pose = self.world.objects[self.jobs[j].object].pose;
        let job = &mut self.jobs[j];
        let mode = job.plan.stages[job.stage].mode.clone();
        if let Some(m) = mode {
            let same = job.mode.as_ref().is_some_and(|p| p.robots == m.robots && p.same_contacts(&m));
            if !same {
                self.events.push(format!("mode:{label}"));
                self.report.modes += 1;
                if job.mode.is_some() {
                    self.events.push(format!("switch:{label}"));
                    self.report.switches += 1;
                }
                job.phase = Phase::Approach;
                job.since = now;
                job.paths.clear();
                for &r in &job.robots {
                    self.world.robots[r].pusher = None;
                }
            }
            job.mode = Some(m);
        }
        let target = job.plan.stages.get(job.stage + 1).map_or(pose, |k| k.pose);
        self.events.push(format!("key:{label}:{:.6},{:.6},{:.6}", target.x, target.y, target.psi));
        job.stage_since = now;
        job.history = vec![(now, pose)];
        job.pushed = false;
        job.arc = arc_from_poses(&pose, &target);
    }

    fn nav_grid(&mut self) -> &NavGrid {
        if self.grid.is_none() {
            let cfg = &self.sc.config().episode;
            let (lo, hi) = self.sc.bounds;
            let clearance = self.sc.robots.iter().map(|r| r.radius).fold(0.0, f64::max) + NAV_MARGIN;
            let mut g = NavGrid::new(lo, hi, cfg.nav_resolution);
            for o in &self.sc.obstacles {
                g.mark(o, &Pose::origin(), clearance);
            }
            for o in &self.world.objects {
                g.mark(&o.poly, &o.pose, clearance);
            }
            self.grid = Some(g);
        }
        self.grid.as_ref().expect("just built")
    }

    fn follow(&mut self, j: usize, robot: usize, goal: Vec2) -> ControlCommand {
        let now = self.now();
        let pos = self.world.robots[robot].pose.position();
        let stale = self.jobs[j]
            .paths
            .get(&robot)
            .is_none_or(|p| now - p.planned > PATH_REFRESH || (p.goal - goal).norm() > STANDOFF);
        if stale {
            let points = self.nav_grid().path(&pos, &goal);
            self.jobs[j].paths.insert(robot, NavPath { planned: now, goal, points });
        }
        let path = self.jobs[j].paths.get_mut(&robot).expect("planned above");
        while path.points.len() > 1 && (path.points[0] - pos).norm() < WAYPOINT_REACHED {
            path.points.remove(0);
        }
        let r = &self.world.robots[robot];
        goto(r, &path.points[0], r.spec.v_max, &self.sc.config().control)
    }

    /// Moves a robot out of the way of objects being pushed.
    fn park(&self, robot: usize) -> ControlCommand {
        let r = &self.world.robots[robot];
        let pos = r.pose.position();
        for job in self.jobs.iter().filter(|j| j.phase == Phase::Push) {
            let o = &self.world.objects[job.object];
            let d = pos - o.pose.position();
            let reach = o.poly.bounding_radius() + r.spec.radius + PARK_GAP;
            if d.norm() < reach && d.norm() > 1e-9 {
                let to = o.pose.position() + d.normalize() * (reach + 0.05);
                return goto(r, &to, r.spec.v_max, &self.sc.config().control);
            }
        }
        ControlCommand::IDLE
    }

    /// The robot's touch point drifted along the boundary, or the robot
    /// lost the surface.
    fn slipped(&self, robot: usize, object: usize, contact: &ContactPoint, slip: f64) -> bool {
        let o = &self.world.objects[object];
        let r = &self.world.robots[robot];
        let local = o.pose.inverse_transform_point(&r.pose.position());
        let gap = o.poly.signed_distance(&local).0 - r.spec.radius;
        o.poly.boundary_gap(o.poly.project(&local).s, contact.s) > slip || gap > 2.0 * slip
    }

    fn drive(&mut self, j: usize, cmds: &mut [ControlCommand]) -> Outcome {
        let now = self.now();
        let object = self.jobs[j].object;
        loop {
            let job = &self.jobs[j];
            if job.stage + 1 >= job.plan.stages.len() {
                return Outcome::Done;
            }
            let target = job.plan.stages[job.stage + 1].pose;
            if !self.world.objects[object].pose.within(&target, GOAL_DIST, GOAL_ANGLE) {
                break;
            }
            self.jobs[j].stage += 1;
            if self.jobs[j].stage + 1 < self.jobs[j].plan.stages.len() {
                self.enter_stage(j);
            }
        }
        let cfg = self.sc.config();
        let gains = cfg.control;
        let pose = self.world.objects[object].pose;
        let (stage, target) = {
            let job = &self.jobs[j];
            (job.stage, job.plan.stages[job.stage + 1].pose)
        };
        let Some(mode) = self.jobs[j].plan.stages[stage].mode.clone() else {
            return Outcome::Failed(FailureKind::Stuck);
        };
        let slots: Vec<(usize, ContactPoint)> = mode
            .robots
            .iter()
            .zip(&mode.contacts)
            .map(|(&t, c)| (self.jobs[j].robots[t], *c))
            .collect();
        for &r in &self.jobs[j].robots.clone() {
            if !slots.iter().any(|(g, _)| *g == r) {
                self.world.robots[r].pusher = None;
                cmds[r] = self.park(r);
            }
        }
        let label = self.label(self.jobs[j].subtask);
        match self.jobs[j].phase {
            Phase::Approach => {
                let mut seated = true;
                for &(r, c) in &slots {
                    self.world.robots[r].pusher = Some(Pusher {
                        object,
                        contact: c,
                        active: false,
                    });
                    let anchor = self.world.contact_anchor(r, &pose, &c);
                    let d = (self.world.robots[r].pose.position() - anchor).norm();
                    seated &= d < SEAT_TOL;
                    cmds[r] = if d < SEEK_RANGE {
                        seek(&self.world.robots[r], &c, &pose, &gains)
                    } else {
                        let out = pose.transform_vector(&c.n());
                        self.follow(j, r, anchor - out * STANDOFF)
                    };
                }
                if seated {
                    let job = &mut self.jobs[j];
                    job.phase = Phase::Push;
                    job.since = now;
                    if !job.pushed {
                        job.pushed = true;
                        job.history = vec![(now, pose)];
                        job.arc = arc_from_poses(&pose, &target);
                    }
                    self.events.push(format!("push:{label}"));
                } else if now - self.jobs[j].since > cfg.episode.approach_timeout {
                    return Outcome::Failed(FailureKind::Stuck);
                }
            }
            Phase::Push => {
                let slipped = slots.iter().any(|&(r, c)| self.slipped(r, object, &c, cfg.episode.slip));
                if slipped {
                    let job = &mut self.jobs[j];
                    job.phase = Phase::Approach;
                    job.since = now;
                    for &(r, _) in &slots {
                        self.world.robots[r].pusher = None;
                        cmds[r] = ControlCommand::IDLE;
                    }
                    self.events.push(format!("slip:{label}"));
                    return Outcome::Running;
                }
                for &(r, c) in &slots {
                    self.world.robots[r].pusher = Some(Pusher {
                        object,
                        contact: c,
                        active: true,
                    });
                    cmds[r] = controller_step(&self.world.robots[r], &c, &pose, &target, &gains);
                }
                let job = &mut self.jobs[j];
                job.history.push((now, pose));
                if let Some(kind) = detect_failure(&job.history, &job.arc, &cfg.failure) {
                    return Outcome::Failed(kind);
                }
                if now - job.stage_since > cfg.episode.stage_timeout {
                    return Outcome::Failed(FailureKind::Stuck);
                }
            }
        }
        Outcome::Running
    }

    fn release(&mut self, robots: &[usize]) {
        for &r in robots {
            self.world.robots[r].pusher = None;
        }
    }

    fn reassign(&mut self, s: usize, mut robots: Vec<usize>) {
        robots.sort_unstable();
        self.release(&robots);
        self.excluded.push((s, robots));
        self.started[s] = None;
        self.report.reassignments += 1;
        self.replan.failure = true;
        self.events.push(format!("reassign:{}", self.label(s)));
    }

    fn on_failure(&mut self, j: usize, kind: FailureKind) {
        let (s, robots, replans) = {
            let job = &self.jobs[j];
            (job.subtask, job.robots.clone(), job.replans)
        };
        let label = self.label(s);
        self.report.failures.push(FailureRecord {
            time: self.now(),
            subtask: label.clone(),
            kind: kind.to_string(),
        });
        self.events.push(format!("fail:{label}:{kind}"));
        if replans < self.sc.config().episode.max_replans {
            self.report.replans += 1;
            self.jobs[j].replans += 1;
            if let Some(plan) = self.plan_for(s, &robots, replans + 1) {
                let job = &mut self.jobs[j];
                job.plan = plan;
                job.stage = 0;
                job.mode = None;
                self.events.push(format!("replan:{label}"));
                self.enter_stage(j);
                return;
            }
        }
        self.jobs.remove(j);
        self.reassign(s, robots);
    }

    fn inject_faults(&mut self) {
        let now = self.now();
        for k in 0..self.fired.len() {
            let f = &self.sc.config().episode.faults[k];
            if self.fired[k] || now < f.time {
                continue;
            }
            let Some(j) = (0..self.jobs.len())
                .filter(|&j| self.jobs[j].phase == Phase::Push && f.object.is_none_or(|o| o == self.jobs[j].object))
                .min_by_key(|&j| self.jobs[j].subtask)
            else {
                continue;
            };
            self.fired[k] = true;
            let poly = &self.sc.objects[self.jobs[j].object].model.poly;
            let per = poly.perimeter();
            let job = &mut self.jobs[j];
            let stage = job.stage;
            if let Some(m) = job.plan.stages[stage].mode.as_mut() {
                for c in &mut m.contacts {
                    *c = ContactPoint::on(poly, (c.s + 0.5 * per).rem_euclid(per));
                }
                m.forces = None;
            }
            self.events.push(format!("fault:{}", self.label(self.jobs[j].subtask)));
            self.enter_stage(j);
        }
    }

    fn physics(&mut self, cmds: &[ControlCommand]) {
        let substeps = (PHYSICS_HZ / CONTROL_HZ).round() as usize;
        for _ in 0..substeps {
            let steps = self.world.step(cmds, 1.0 / PHYSICS_HZ);
            let mut now_blocked = BTreeSet::new();
            for (m, st) in steps.iter().enumerate() {
                if let Some(c) = &st.blocked_by {
                    let key = (m, contactee_name(c));
                    if !self.blocked.contains(&key) {
                        self.report.collisions += 1;
                        self.events.push(format!("collision:object{m}:{}", key.1));
                    }
                    now_blocked.insert(key);
                }
            }
            self.blocked = now_blocked;
        }
    }

    fn trace_line(&self, out: &mut String, cmds: &[ControlCommand]) {
        let _ = write!(out, "t={:.6} obj=", self.now());
        let poses: Vec<String> = self
            .world
            .objects
            .iter()
            .map(|o| format!("{:.6},{:.6},{:.6}", o.pose.x, o.pose.y, o.pose.psi))
            .collect();
        out.push_str(&poses.join(";"));
        let robots: Vec<String> = self
            .world
            .robots
            .iter()
            .map(|r| format!("{:.6},{:.6},{:.6}", r.pose.x, r.pose.y, r.pose.psi))
            .collect();
        let _ = write!(out, " rob={}", robots.join(";"));
        let c: Vec<String> = cmds
            .iter()
            .map(|c| format!("{:.6},{:.6},{:.6}", c.v_hat.x, c.v_hat.y, c.omega_hat))
            .collect();
        let _ = write!(out, " cmd={}", c.join(";"));
        let eng: Vec<String> = (0..self.world.robots.len())
            .filter(|&r| self.world.robots[r].pusher.is_some_and(|p| p.active) && self.world.is_engaged(r))
            .map(|r| format!("{r}>{}", self.world.robots[r].pusher.expect("engaged").object))
            .collect();
        let _ = write!(out, " eng={}", eng.join(";"));
        let act: Vec<String> = self
            .jobs
            .iter()
            .map(|j| {
                let phase = if j.phase == Phase::Push { "push" } else { "approach" };
                format!("{}:{}:{phase}", self.label(j.subtask), j.stage)
            })
            .collect();
        let _ = writeln!(out, " act={} ev={}", act.join(";"), self.events.join(";"));
    }

    fn run(mut self) -> Episode {
        let sc = self.sc;
        let cfg = sc.config();
        let mut trace = String::new();
        let _ = writeln!(trace, "# copush trace");
        let _ = writeln!(trace, "# scenario {:016x}", sc.hash());
        let _ = writeln!(trace, "# seed {}", sc.seed());
        let _ = writeln!(trace, "# config {}", serde_json::to_string(cfg).expect("plain data"));
        let (lo, hi) = sc.bounds;
        let _ = writeln!(trace, "# workspace {:.6},{:.6},{:.6},{:.6}", lo.x, lo.y, hi.x, hi.y);
        for st in &self.decomp.subtasks {
            let poses: Vec<String> = st.waypoints().iter().map(|p| format!("{:.6},{:.6},{:.6}", p.x, p.y, p.psi)).collect();
            let _ = writeln!(trace, "# subtask {} {} {}", st.label(), st.object, poses.join(";"));
        }
        let outcome: Result<(), String> = loop {
            self.grid = None;
            let pending = self.done.iter().any(Option::is_none);
            if !pending {
                break Ok(());
            }
            if self.now() > cfg.episode.max_time {
                break Err(format!("time limit of {} s reached", cfg.episode.max_time));
            }
            self.replan.elapsed_since_plan = self.now() - self.last_round;
            let idle = self.jobs.is_empty() && !(0..self.queue.len()).any(|i| self.startable(i));
            if self.report.rounds == 0 || replan_trigger(&self.replan, &cfg.replan) || idle {
                if let Err(e) = self.round() {
                    break Err(e);
                }
            }
            self.start_ready();
            if self.done.iter().all(Option::is_some) {
                break Ok(());
            }
            if self.jobs.is_empty() && !self.replan.failure {
                break Err("no assigned subtask can start".into());
            }
            self.inject_faults();
            let mut cmds = vec![ControlCommand::IDLE; self.world.robots.len()];
            let mut j = 0;
            while j < self.jobs.len() {
                match self.drive(j, &mut cmds) {
                    Outcome::Running => j += 1,
                    Outcome::Done => {
                        let job = self.jobs.remove(j);
                        self.release(&job.robots);
                        self.finish(job.subtask);
                    }
                    Outcome::Failed(kind) => {
                        let before = self.jobs.len();
                        self.on_failure(j, kind);
                        if self.jobs.len() == before {
                            j += 1;
                        }
                    }
                }
            }
            for r in 0..self.world.robots.len() {
                if !self.jobs.iter().any(|j| j.robots.contains(&r)) {
                    self.world.robots[r].pusher = None;
                    cmds[r] = self.park(r);
                }
            }
            self.physics(&cmds);
            self.trace_line(&mut trace, &cmds);
            self.events.clear();
        };
        let now = self.now();
        let report = &mut self.report;
        report.success = outcome.is_ok();
        report.reason = outcome.err();
        report.makespan = now;
        report.terminal_errors = self
            .world
            .objects
            .iter()
            .zip(&sc.objects)
            .map(|(o, s)| [o.pose.distance(&s.goal), o.pose.angle_to(&s.goal).abs()])
            .collect();
        Episode {
            report: self.report,
            trace,
            timings: self.timings,
        }
    }
}

/// Runs the scenario's decomposition to completion or failure. Plans found
/// along the way are added to `libs`.
pub fn run_episode(sc: &Scenario, decomp: &Decomposition, libs: &mut Libraries) -> Episode {
    Runner::new(sc, decomp, libs).run()
}
