//! Single-object arc tracking, used to verify pushing modes.

use crate::contact::{ContactPoint, ObjectIntrinsics, PushingMode, RobotSpec};
use crate::geometry::{dist_point_to_arc, ArcMotion, Polygon, Pose};

use super::control::{controller_step, Gains};
use super::failure::{detect_failure, FailurePolicy};
use super::world::{ControlCommand, ObjectBody, Pusher, RobotBody, World, CONTROL_HZ, PHYSICS_HZ};

pub const GOAL_DIST: f64 = 0.05;
pub const GOAL_ANGLE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOutcome {
    pub success: bool,
    pub terminal: Pose,
    pub max_deviation: f64,
    pub duration: f64,
}

/// Places the mode's robots on their contacts at the arc start and tracks the
/// arc in closed loop until the end pose is reached, tracking fails, or time
/// runs out.
pub fn track_arc(
    poly: &Polygon,
    intr: &ObjectIntrinsics,
    team: &[RobotSpec],
    mode: &PushingMode,
    arc: &ArcMotion,
    obstacles: &[Polygon],
    gains: &Gains,
    policy: &FailurePolicy,
) -> RolloutOutcome {
    let start = arc.start;
    let goal = arc.end();
    if start.within(&goal, GOAL_DIST, GOAL_ANGLE) && arc.is_degenerate() {
        return RolloutOutcome {
            success: true,
            terminal: start,
            max_deviation: 0.0,
            duration: 0.0,
        };
    }
    let obj = ObjectBody::new(poly.clone(), *intr, start);
    let contacts: Vec<ContactPoint> = mode.contacts.clone();
    let robots: Vec<RobotBody> = mode
        .robots
        .iter()
        .zip(&contacts)
        .map(|(&slot, c)| {
            let spec = team[slot];
            let p = start.transform_point(&c.robot_center(spec.radius));
            let n = start.transform_vector(&c.n());
            let mut r = RobotBody::new(spec, Pose::new(p.x, p.y, n.y.atan2(n.x)));
            r.pusher = Some(Pusher {
                object: 0,
                contact: *c,
                active: true,
            });
            r
        })
        .collect();
    let mut world = World::new(vec![obj], robots, obstacles.to_vec());

    let substeps = (PHYSICS_HZ / CONTROL_HZ).round() as usize;
    let dt = 1.0 / PHYSICS_HZ;
    let horizon = arc.travel(poly.bounding_radius()) / 0.1 + 3.0;
    let mut history: Vec<(f64, Pose)> = vec![(0.0, start)];
    let mut max_dev: f64 = 0.0;
    let mut cmds = vec![ControlCommand::IDLE; world.robots.len()];
    loop {
        let pose = world.objects[0].pose;
        if pose.within(&goal, GOAL_DIST, GOAL_ANGLE) {
            return RolloutOutcome {
                success: max_dev < policy.delta_f,
                terminal: pose,
                max_deviation: max_dev,
                duration: world.time,
            };
        }
        if world.time > horizon || detect_failure(&history, arc, policy).is_some() {
            return RolloutOutcome {
                success: false,
                terminal: pose,
                max_deviation: max_dev,
                duration: world.time,
            };
        }
        for (i, cmd) in cmds.iter_mut().enumerate() {
            *cmd = controller_step(&world.robots[i], &contacts[i], &pose, &goal, gains);
        }
        for _ in 0..substeps {
            world.step(&cmds, dt);
        }
        let pose = world.objects[0].pose;
        max_dev = max_dev.max(dist_point_to_arc(&pose.position(), arc));
        history.push((world.time, pose));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{arc_from_poses, Vec2};

    fn square() -> (Polygon, ObjectIntrinsics) {
        let p = Polygon::rectangle(1.0, 1.0).unwrap();
        let i = ObjectIntrinsics::uniform(&p, 10.0, 0.2, 0.8);
        (p, i)
    }

    fn mode_at(poly: &Polygon, pts: &[(f64, f64)]) -> PushingMode {
        let cs = pts.iter().map(|&(x, y)| ContactPoint::from(poly.project(&Vec2::new(x, y)))).collect();
        PushingMode::new(cs, (0..pts.len()).collect()).unwrap()
    }

    #[test]
    fn symmetric_straight_push_tracks() {
        let (poly, intr) = square();
        let team = [RobotSpec::default(); 2];
        let mode = mode_at(&poly, &[(-0.5, 0.25), (-0.5, -0.25)]);
        let arc = arc_from_poses(&Pose::origin(), &Pose::new(1.0, 0.0, 0.0));
        let out = track_arc(&poly, &intr, &team, &mode, &arc, &[], &Gains::default(), &FailurePolicy::default());
        assert!(out.success, "{out:?}");
    }

    #[test]
    fn single_contact_cannot_spin_in_place() {
        let (poly, intr) = square();
        let team = [RobotSpec::default()];
        let mode = mode_at(&poly, &[(-0.5, 0.3)]);
        let arc = arc_from_poses(&Pose::origin(), &Pose::new(0.0, 0.0, 1.5));
        let out = track_arc(&poly, &intr, &team, &mode, &arc, &[], &Gains::default(), &FailurePolicy::default());
        assert!(!out.success, "{out:?}");
    }

    #[test]
    fn zero_length_arc_is_trivially_tracked() {
        let (poly, intr) = square();
        let mode = mode_at(&poly, &[(-0.5, 0.0)]);
        let arc = arc_from_poses(&Pose::origin(), &Pose::origin());
        let out = track_arc(&poly, &intr, &[RobotSpec::default()], &mode, &arc, &[], &Gains::default(), &FailurePolicy::default());
        assert!(out.success);
    }
}
