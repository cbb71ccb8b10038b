//! Kinematic tracking of object arcs through the pushing robots.

use serde::{Deserialize, Serialize};

use crate::contact::ContactPoint;
use crate::geometry::{arc_from_poses, wrap_angle, Pose, Vec2};

use super::world::{ControlCommand, RobotBody};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gains {
    pub k_vel: f64,
    pub k_rot: f64,
    /// Look-ahead distance of the reference pose.
    pub delta_c: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            k_vel: 5.0,
            k_rot: 1.0,
            delta_c: 0.1,
        }
    }
}

/// First pose along the live arc from `current` to `goal` farther than
/// `delta_c` from `current`, or `goal` if the whole arc is closer.
pub fn reference_pose(current: &Pose, goal: &Pose, delta_c: f64) -> Pose {
    let arc = arc_from_poses(current, goal);
    let dist = |p: &Pose| {
        let d = p.position() - current.position();
        (d.norm_squared() + wrap_angle(p.psi - current.psi).powi(2)).sqrt()
    };
    if dist(goal) <= delta_c {
        return *goal;
    }
    let steps = ((arc.travel(1.0) / (0.1 * delta_c)).ceil() as usize).max(1);
    (1..=steps)
        .map(|i| arc.pose_at_fraction(i as f64 / steps as f64))
        .find(|p| dist(p) > delta_c)
        .unwrap_or(*goal)
}

/// Velocity that drives a robot onto `contact` of an object placed at `target`.
pub fn seek(robot: &RobotBody, contact: &ContactPoint, target: &Pose, gains: &Gains) -> ControlCommand {
    let anchor = target.transform_point(&contact.robot_center(robot.spec.radius));
    let mut v = (anchor - robot.pose.position()) * gains.k_vel;
    if v.norm() > robot.spec.v_max {
        v *= robot.spec.v_max / v.norm();
    }
    let n = contact.n();
    let heading = target.psi + n.y.atan2(n.x);
    let omega = (gains.k_rot * wrap_angle(heading - robot.pose.psi)).clamp(-robot.spec.omega_max, robot.spec.omega_max);
    ControlCommand { v_hat: v, omega_hat: omega }
}

/// Command for a pushing robot tracking the arc from the object's current
/// pose to the stage's next keyframe.
pub fn controller_step(robot: &RobotBody, contact: &ContactPoint, object: &Pose, next_keyframe: &Pose, gains: &Gains) -> ControlCommand {
    let reference = reference_pose(object, next_keyframe, gains.delta_c);
    seek(robot, contact, &reference, gains)
}

/// Points a free robot at `waypoint` at most `speed` fast.
pub fn goto(robot: &RobotBody, waypoint: &Vec2, speed: f64, gains: &Gains) -> ControlCommand {
    let mut v = (waypoint - robot.pose.position()) * gains.k_vel;
    let cap = speed.min(robot.spec.v_max);
    if v.norm() > cap {
        v *= cap / v.norm();
    }
    ControlCommand { v_hat: v, omega_hat: 0.0 }
}
