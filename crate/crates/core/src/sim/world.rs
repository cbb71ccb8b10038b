//! Quasi-static world stepping.
//!
//! Robots are point-mass disks driven by clipped P-control. Objects have no
//! inertia: each physics step an object either follows the twist implied by
//! the robots engaged with it, provided that twist is sustainable against
//! ground friction, or stays at rest.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contact::{
    friction_wrench, limit_surface_params, min_residual, ContactPoint, GeneralizedForce, LimitSurfaceParams,
    ObjectIntrinsics, RobotSpec, GRAVITY,
};
use crate::geometry::{collide_with_tolerance, integrate_twist, Footprint, Polygon, Pose, Twist, Vec2};

pub const FORCE_GAIN: f64 = 400.0;
pub const TORQUE_GAIN: f64 = 20.0;
pub const PHYSICS_HZ: f64 = 240.0;
pub const CONTROL_HZ: f64 = 60.0;
pub const ENGAGE_TOL: f64 = 0.02;
/// Boundary drift of a robot's touch point from its assigned contact beyond
/// which the contact has slipped.
pub const SLIP_TOL: f64 = 0.05;
/// Surface gap below which an engaged robot transmits motion.
pub const TOUCH_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ObjectBody {
    pub poly: Polygon,
    pub intr: ObjectIntrinsics,
    pub lsp: LimitSurfaceParams,
    pub footprint: Footprint,
    pub pose: Pose,
    pub twist: Twist,
}

impl ObjectBody {
    /// `poly` must be expressed about its centroid.
    pub fn new(poly: Polygon, intr: ObjectIntrinsics, pose: Pose) -> Self {
        let lsp = limit_surface_params(&poly, &intr, GRAVITY).expect("validated object");
        let footprint = poly.footprint();
        Self {
            poly,
            intr,
            lsp,
            footprint,
            pose,
            twist: Twist::ZERO,
        }
    }

    pub fn placed(&self) -> Footprint {
        self.footprint.at(&self.pose)
    }
}

/// A robot assigned to push `object` at `contact`; it only transmits force
/// while `active`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pusher {
    pub object: usize,
    pub contact: ContactPoint,
    pub active: bool,
}

#[derive(Debug, Clone)]
pub struct RobotBody {
    pub spec: RobotSpec,
    pub pose: Pose,
    pub vel: Vec2,
    pub omega: f64,
    pub pusher: Option<Pusher>,
}

impl RobotBody {
    pub fn new(spec: RobotSpec, pose: Pose) -> Self {
        Self {
            spec,
            pose,
            vel: Vec2::zeros(),
            omega: 0.0,
            pusher: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub v_hat: Vec2,
    pub omega_hat: f64,
}

impl ControlCommand {
    pub const IDLE: ControlCommand = ControlCommand {
        v_hat: Vec2::new(0.0, 0.0),
        omega_hat: 0.0,
    };
}

/// Kinematic snapshot of every body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub robots: Vec<(Pose, [f64; 3])>,
    pub objects: Vec<(Pose, Twist)>,
}

/// What happened to one object during a step.
#[derive(Debug, Clone, Default)]
pub struct ObjectStep {
    pub engaged: Vec<usize>,
    pub twist: Twist,
    /// Ground friction wrench sustained while moving.
    pub friction: Option<GeneralizedForce>,
    /// Motion was rejected because it would overlap an obstacle or object.
    pub blocked_by: Option<Contactee>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contactee {
    Obstacle(usize),
    Object(usize),
}

#[derive(Debug, Clone)]
pub struct World {
    pub objects: Vec<ObjectBody>,
    pub robots: Vec<RobotBody>,
    pub obstacles: Vec<Polygon>,
    obstacle_fps: Vec<Footprint>,
    pub time: f64,
}

fn robot_inertia(r: &RobotSpec) -> f64 {
    0.5 * r.mass * r.radius * r.radius
}

/// Body twist reproducing the robot velocities at the contacts in the least
/// squares sense, with tangential mismatch weighted by `1 − slip`.
///
/// Remaining freedom is resolved by the smallest `pᵀ·D2·p`. That choice makes
/// the sustaining wrench a combination of the contact force directions, so a
/// lone sticking contact gets the quasi-static `ω = (f_max/m_max)²·(c × v)`
/// and full slip gives the frictionless-contact motion.
fn sticking_twist(contacts: &[(Vec2, Vec2, Vec2, Vec2)], lsp: &LimitSurfaceParams, slip: f64) -> Twist {
    // (position, normal, tangent, robot velocity), all in the body frame.
    let scale = [1.0, 1.0, lsp.f_max / lsp.m_max];
    let wt = (1.0 - slip).max(0.0).sqrt();
    let mut a = DMatrix::<f64>::zeros(2 * contacts.len(), 3);
    let mut b = DVector::<f64>::zeros(2 * contacts.len());
    for (i, (c, n, t, u)) in contacts.iter().enumerate() {
        for (row, dir, w) in [(2 * i, n, 1.0), (2 * i + 1, t, wt)] {
            // dir · (v + ω × c)
            let coeffs = [dir.x, dir.y, crate::geometry::cross2(c, dir)];
            for k in 0..3 {
                a[(row, k)] = w * coeffs[k] * scale[k];
            }
            b[row] = w * dir.dot(u);
        }
    }
    match a.svd(true, true).solve(&b, 1e-9) {
        Ok(z) => Twist::new(z[0] * scale[0], z[1] * scale[1], z[2] * scale[2]),
        Err(_) => Twist::ZERO,
    }
}

impl World {
    pub fn new(objects: Vec<ObjectBody>, robots: Vec<RobotBody>, obstacles: Vec<Polygon>) -> Self {
        let obstacle_fps = obstacles.iter().map(|o| o.footprint()).collect();
        Self {
            objects,
            robots,
            obstacles,
            obstacle_fps,
            time: 0.0,
        }
    }

    pub fn obstacle_footprints(&self) -> &[Footprint] {
        &self.obstacle_fps
    }

    pub fn snapshot(&self) -> WorldState {
        WorldState {
            time: self.time,
            robots: self
                .robots
                .iter()
                .map(|r| (r.pose, [r.vel.x, r.vel.y, r.omega]))
                .collect(),
            objects: self.objects.iter().map(|o| (o.pose, o.twist)).collect(),
        }
    }

    /// Robot centre target for a contact on an object at `pose`.
    pub fn contact_anchor(&self, robot: usize, object_pose: &Pose, contact: &ContactPoint) -> Vec2 {
        object_pose.transform_point(&contact.robot_center(self.robots[robot].spec.radius))
    }

    /// Boundary point a robot touches, if it is within `ENGAGE_TOL` of the
    /// object's surface.
    pub fn touch_point(&self, robot: usize, object: usize) -> Option<ContactPoint> {
        self.surface_gap(robot, object)
            .filter(|(_, gap)| gap.abs() < ENGAGE_TOL)
            .map(|(c, _)| c)
    }

    fn surface_gap(&self, robot: usize, object: usize) -> Option<(ContactPoint, f64)> {
        let r = &self.robots[robot];
        let obj = &self.objects[object];
        let local = obj.pose.inverse_transform_point(&r.pose.position());
        let (d, _) = obj.poly.signed_distance(&local);
        Some((obj.poly.project(&local).into(), d - r.spec.radius))
    }

    /// Robot touches its object no farther than `SLIP_TOL` along the
    /// boundary from its assigned contact.
    pub fn is_engaged(&self, robot: usize) -> bool {
        let Some(p) = self.robots[robot].pusher else {
            return false;
        };
        self.touch_point(robot, p.object)
            .is_some_and(|c| self.objects[p.object].poly.boundary_gap(c.s, p.contact.s) <= SLIP_TOL)
    }

    /// Engaged, allowed to push, and moving into the object.
    fn engaged_for_push(&self, robot: usize) -> bool {
        let r = &self.robots[robot];
        match r.pusher {
            Some(p) if p.active && self.is_engaged(robot) && self.surface_gap(robot, p.object).is_some_and(|(_, g)| g < TOUCH_TOL) => {
                let obj = &self.objects[p.object];
                let n = obj.pose.transform_vector(&p.contact.n());
                r.vel.dot(&n) > 0.0
            }
            _ => false,
        }
    }

    /// Object twist from the given engaged robots, after the friction gate.
    fn resolve_object(&self, m: usize, engaged: &[usize]) -> (Twist, Option<GeneralizedForce>) {
        let obj = &self.objects[m];
        let mut geo = Vec::with_capacity(engaged.len());
        let mut contacts = Vec::with_capacity(engaged.len());
        let mut caps = Vec::with_capacity(engaged.len());
        for &i in engaged {
            let r = &self.robots[i];
            let c = self.touch_point(i, m).expect("engaged robots touch");
            let u = obj.pose.inverse().transform_vector(&r.vel);
            geo.push((c.pos(), c.n(), c.t(), u));
            contacts.push(c);
            caps.push(r.spec.f_max);
        }
        let feasible = |p: &Twist| -> Option<GeneralizedForce> {
            if p.norm_with(1.0) < 1e-9 {
                return None;
            }
            let q = friction_wrench(p, &obj.lsp).ok()?;
            let target = GeneralizedForce::new(-q.fx, -q.fy, -q.chi);
            let (loss, _) = min_residual(&contacts, &caps, obj.intr.mu_contact, &target, &Vec2::zeros()).ok()?;
            (loss <= 1e-6 * (1.0 + obj.lsp.f_max)).then_some(q)
        };
        let stick = sticking_twist(&geo, &obj.lsp, 0.0);
        if let Some(q) = feasible(&stick) {
            return (stick, Some(q));
        }
        // Let contacts slide tangentially: bisect on the slip blend.
        let full = sticking_twist(&geo, &obj.lsp, 1.0);
        let Some(q_full) = feasible(&full) else {
            return (Twist::ZERO, None);
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = (full, q_full);
        for _ in 0..10 {
            let mid = 0.5 * (lo + hi);
            let p = sticking_twist(&geo, &obj.lsp, mid);
            match feasible(&p) {
                Some(q) => {
                    best = (p, q);
                    hi = mid;
                }
                None => lo = mid,
            }
        }
        (best.0, Some(best.1))
    }

    fn object_blocked(&self, m: usize, pose: &Pose) -> Option<Contactee> {
        let obj = &self.objects[m];
        let moved = obj.footprint.at(pose);
        let here = obj.placed();
        for (k, o) in self.obstacle_fps.iter().enumerate() {
            if collide_with_tolerance(&moved, o, 0.0) && !collide_with_tolerance(&here, o, 0.0) {
                return Some(Contactee::Obstacle(k));
            }
        }
        for (k, other) in self.objects.iter().enumerate() {
            if k == m {
                continue;
            }
            let f = other.placed();
            if collide_with_tolerance(&moved, &f, 0.0) && !collide_with_tolerance(&here, &f, 0.0) {
                return Some(Contactee::Object(k));
            }
        }
        None
    }

    /// Advances every body by `dt`; `commands` has one entry per robot.
    pub fn step(&mut self, commands: &[ControlCommand], dt: f64) -> Vec<ObjectStep> {
        assert_eq!(commands.len(), self.robots.len(), "one command per robot");
        for (r, cmd) in self.robots.iter_mut().zip(commands) {
            let mut f = (cmd.v_hat - r.vel) * FORCE_GAIN;
            let fmax = r.spec.f_max.max(0.0);
            if f.norm() > fmax {
                f *= fmax / f.norm();
            }
            let tmax = fmax * r.spec.radius;
            let tau = (TORQUE_GAIN * (cmd.omega_hat - r.omega)).clamp(-tmax, tmax);
            r.vel += f / r.spec.mass * dt;
            r.omega += tau / robot_inertia(&r.spec) * dt;
        }

        let mut reports = Vec::with_capacity(self.objects.len());
        for m in 0..self.objects.len() {
            let engaged: Vec<usize> = (0..self.robots.len())
                .filter(|&i| self.robots[i].pusher.is_some_and(|p| p.object == m) && self.engaged_for_push(i))
                .collect();
            let mut rep = ObjectStep {
                engaged: engaged.clone(),
                ..Default::default()
            };
            if !engaged.is_empty() {
                let (p, q) = self.resolve_object(m, &engaged);
                if q.is_some() {
                    let next = integrate_twist(&self.objects[m].pose, &p, dt);
                    match self.object_blocked(m, &next) {
                        Some(c) => rep.blocked_by = Some(c),
                        None => {
                            rep.twist = p;
                            rep.friction = q;
                        }
                    }
                }
            }
            reports.push(rep);
        }
        for (obj, rep) in self.objects.iter_mut().zip(&reports) {
            obj.twist = rep.twist;
            obj.pose = integrate_twist(&obj.pose, &rep.twist, dt);
        }

        for r in self.robots.iter_mut() {
            let p = r.pose.position() + r.vel * dt;
            r.pose = Pose::new(p.x, p.y, r.pose.psi + r.omega * dt);
        }
        self.resolve_penetration();
        self.time += dt;
        reports
    }

    /// Pushes robots out of objects, obstacles and each other, removing the
    /// approaching velocity component.
    fn resolve_penetration(&mut self) {
        for i in 0..self.robots.len() {
            let radius = self.robots[i].spec.radius;
            for m in 0..self.objects.len() {
                let obj = &self.objects[m];
                let local = obj.pose.inverse_transform_point(&self.robots[i].pose.position());
                if local.norm() > obj.poly.bounding_radius() + radius {
                    continue;
                }
                let (d, closest) = obj.poly.signed_distance(&local);
                if d < radius {
                    let mut dir = local - closest;
                    if d < 0.0 {
                        dir = -dir;
                    }
                    let len = dir.norm();
                    let out = if len > 1e-12 { dir / len } else { local.normalize() };
                    let shift = obj.pose.transform_vector(&(out * (radius - d)));
                    // Contact-point velocity of the object.
                    let w = obj.twist;
                    let vc_body = Vec2::new(w.vx - w.omega * closest.y, w.vy + w.omega * closest.x);
                    let vc = obj.pose.transform_vector(&vc_body);
                    let n_world = obj.pose.transform_vector(&out);
                    let r = &mut self.robots[i];
                    let p = r.pose.position() + shift;
                    r.pose = Pose::new(p.x, p.y, r.pose.psi);
                    let rel = (r.vel - vc).dot(&n_world);
                    if rel < 0.0 {
                        r.vel -= n_world * rel;
                    }
                }
            }
            for o in &self.obstacles {
                let pos = self.robots[i].pose.position();
                let (d, closest) = o.signed_distance(&pos);
                if d < radius {
                    let mut dir = pos - closest;
                    if d < 0.0 {
                        dir = -dir;
                    }
                    let len = dir.norm();
                    if len < 1e-12 {
                        continue;
                    }
                    let out = dir / len;
                    let r = &mut self.robots[i];
                    let p = pos + out * (radius - d);
                    r.pose = Pose::new(p.x, p.y, r.pose.psi);
                    let rel = r.vel.dot(&out);
                    if rel < 0.0 {
                        r.vel -= out * rel;
                    }
                }
            }
        }
        for i in 0..self.robots.len() {
            for j in (i + 1)..self.robots.len() {
                let d = self.robots[j].pose.position() - self.robots[i].pose.position();
                let min = self.robots[i].spec.radius + self.robots[j].spec.radius;
                let len = d.norm();
                if len < min && len > 1e-12 {
                    let n = d / len;
                    let push = n * (0.5 * (min - len));
                    let (a, b) = (self.robots[i].pose, self.robots[j].pose);
                    self.robots[i].pose = Pose::new(a.x - push.x, a.y - push.y, a.psi);
                    self.robots[j].pose = Pose::new(b.x + push.x, b.y + push.y, b.psi);
                    let rel = (self.robots[j].vel - self.robots[i].vel).dot(&n);
                    if rel < 0.0 {
                        self.robots[i].vel += n * (0.5 * rel);
                        self.robots[j].vel -= n * (0.5 * rel);
                    }
                }
            }
        }
    }
}
