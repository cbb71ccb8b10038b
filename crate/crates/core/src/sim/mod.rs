//! Closed-loop quasi-static execution.

pub mod control;
pub mod failure;
pub mod rollout;
pub mod world;
pub mod nav;

pub use control::{controller_step, Gains};
pub use failure::{detect_failure, FailureKind, FailurePolicy};
pub use rollout::{track_arc, RolloutOutcome, GOAL_ANGLE, GOAL_DIST};
pub use world::{ControlCommand, ObjectBody, ObjectStep, Pusher, RobotBody, World, WorldState};
