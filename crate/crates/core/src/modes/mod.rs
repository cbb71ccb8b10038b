//! Pushing-mode generation: multi-start hill climbing over boundary contact
//! stations, certified by the feasibility LP and a simulator rollout.

mod library;
mod sufficiency;

pub use library::{ModeEntry, ModeKey, ModeLibrary};
pub use sufficiency::{mode_sufficient, positively_spans, Primitive};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contact::{
    default_basis, force_feasibility_loss, limit_surface_params, multi_directional_loss, multi_directional_loss_with_floor, ContactPoint,
    LimitSurfaceParams, ObjectIntrinsics, PushingMode, RobotSpec, FEASIBLE_LOSS, GRAVITY,
};
use crate::geometry::{ArcMotion, Fnv, Polygon, Pose, Twist};
use crate::sim::{track_arc, FailurePolicy, Gains};

pub const MULTI_STARTS: usize = 8;
pub const REFINE_ROUNDS: usize = 20;
pub const DEFAULT_BUDGET: usize = 200;
/// Share of its force limit every robot in a searched mode must contribute.
pub const ENGAGED_FLOOR: f64 = 0.05;

/// One object and the robot team that pushes it.
#[derive(Debug, Clone)]
pub struct PushContext {
    /// Footprint about the centroid.
    pub poly: Polygon,
    pub intr: ObjectIntrinsics,
    pub lsp: LimitSurfaceParams,
    pub team: Vec<RobotSpec>,
    /// Static obstacles in world coordinates, seen by rollouts.
    pub obstacles: Vec<Polygon>,
    pub gains: Gains,
    pub policy: FailurePolicy,
}

impl PushContext {
    pub fn new(poly: Polygon, intr: ObjectIntrinsics, team: Vec<RobotSpec>) -> Self {
        let lsp = limit_surface_params(&poly, &intr, GRAVITY).expect("validated object");
        Self {
            poly,
            intr,
            lsp,
            team,
            obstacles: Vec::new(),
            gains: Gains::default(),
            policy: FailurePolicy::default(),
        }
    }

    pub fn with_obstacles(mut self, obstacles: Vec<Polygon>) -> Self {
        self.obstacles = obstacles;
        self
    }

    /// Force-feasibility loss of `mode` for twist `p`.
    pub fn loss(&self, mode: &PushingMode, p: &Twist) -> f64 {
        let robots: Vec<RobotSpec> = mode.robots.iter().map(|&i| self.team[i]).collect();
        force_feasibility_loss(mode, p, &self.lsp, self.intr.mu_contact, &robots).map_or(f64::INFINITY, |r| r.0)
    }

    /// Search objective: multi-directional loss with every robot pushing.
    pub fn multi_loss(&self, mode: &PushingMode, p: &Twist) -> f64 {
        let robots: Vec<RobotSpec> = mode.robots.iter().map(|&i| self.team[i]).collect();
        multi_directional_loss_with_floor(mode, &default_basis(p), &self.lsp, self.intr.mu_contact, &robots, ENGAGED_FLOOR)
            .unwrap_or(f64::INFINITY)
    }

    /// Multi-directional loss without the engagement floor, as used in plan
    /// costs.
    pub fn plan_loss(&self, mode: &PushingMode, p: &Twist) -> f64 {
        let robots: Vec<RobotSpec> = mode.robots.iter().map(|&i| self.team[i]).collect();
        multi_directional_loss(mode, &default_basis(p), &self.lsp, self.intr.mu_contact, &robots).unwrap_or(f64::INFINITY)
    }

    /// Hash of the object shape and the team's specs.
    pub fn team_key(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.poly.signature());
        for r in &self.team {
            for v in [r.radius, r.f_max, r.v_max, r.omega_max, r.mass] {
                h.write_u64(v.to_bits());
            }
        }
        h.finish()
    }

    pub fn is_force_feasible(&self, mode: &PushingMode, p: &Twist) -> bool {
        self.loss(mode, p) <= FEASIBLE_LOSS
    }

    fn max_diameter(&self) -> f64 {
        self.team.iter().map(|r| r.diameter()).fold(0.0, f64::max)
    }

    /// Stations are pairwise farther apart than a robot diameter along the
    /// boundary, robots placed there overlap neither the object nor each
    /// other, and under twist `p` every contact point moves into its robot's
    /// side of the object (the robot pushes rather than trails).
    fn valid_stations(&self, stations: &[f64], p: &Twist) -> bool {
        let gap = self.max_diameter();
        for (i, &s) in stations.iter().enumerate() {
            let c = ContactPoint::on(&self.poly, s);
            if !pushes_along(&c, p) {
                return false;
            }
            let r = self.team[i].radius;
            let anchor = c.robot_center(r);
            if self.poly.signed_distance(&anchor).0 < r - 1e-6 {
                return false;
            }
            for (j, &t) in stations.iter().enumerate().take(i) {
                if self.poly.boundary_gap(s, t) <= gap {
                    return false;
                }
                let other = ContactPoint::on(&self.poly, t).robot_center(self.team[j].radius);
                if (anchor - other).norm() < r + self.team[j].radius {
                    return false;
                }
            }
        }
        true
    }

    pub fn mode_at(&self, stations: &[f64]) -> PushingMode {
        let contacts = stations.iter().map(|&s| ContactPoint::on(&self.poly, s)).collect();
        PushingMode::new(contacts, (0..stations.len()).collect()).expect("one robot per station")
    }
}

/// Contact-point velocity under `p` has an inward normal component of at
/// least a tenth of its magnitude.
pub fn pushes_along(c: &ContactPoint, p: &Twist) -> bool {
    let x = c.pos();
    let v = crate::geometry::Vec2::new(p.vx - p.omega * x.y, p.vy + p.omega * x.x);
    let speed = v.norm();
    speed > 1e-12 && c.n().dot(&v) >= 0.1 * speed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCandidate {
    pub mode: PushingMode,
    pub loss: f64,
    pub force_feasible: bool,
    pub practically_feasible: bool,
    /// Largest distance from the arc seen in the verifying rollout.
    pub tracking_error: f64,
}

/// Rollout check: the mode tracks `arc` to within the goal tolerance without
/// straying `delta_f` from it.
pub fn practical_feasibility(ctx: &PushContext, mode: &PushingMode, arc: &ArcMotion) -> bool {
    track_arc(&ctx.poly, &ctx.intr, &ctx.team, mode, arc, &ctx.obstacles, &ctx.gains, &ctx.policy).success
}

/// Searches for a mode realizing the unit arc of `p` from the origin.
pub fn generate_mode(ctx: &PushContext, p: &Twist, budget: usize, seed: u64) -> Option<ModeCandidate> {
    generate_mode_on_arc(ctx, &ArcMotion::new(Pose::origin(), *p, 1.0), budget, seed)
}

/// Mode search for a specific arc. `budget` caps the number of loss
/// evaluations. Starts draw from independent seeded streams and only a start
/// that finishes its refinement is judged, so a larger budget replays the
/// same search and then continues it.
pub fn generate_mode_on_arc(ctx: &PushContext, arc: &ArcMotion, budget: usize, seed: u64) -> Option<ModeCandidate> {
    let p = arc.unit_twist();
    if p.norm_with(1.0) < 1e-12 || ctx.team.is_empty() || ctx.team.iter().all(|r| r.f_max <= 0.0) {
        return None;
    }
    let n = ctx.team.len();
    let per = ctx.poly.perimeter();
    let mut left = budget;
    for k in 0..MULTI_STARTS {
        if left == 0 {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1)));
        let Some(mut stations) = (0..256)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..per)).collect::<Vec<f64>>())
            .find(|s| ctx.valid_stations(s, &p))
        else {
            continue;
        };
        let mut loss = ctx.multi_loss(&ctx.mode_at(&stations), &p);
        left -= 1;
        let mut step = 0.05 * per;
        for _ in 0..REFINE_ROUNDS {
            if loss <= FEASIBLE_LOSS {
                break;
            }
            if left == 0 {
                return None;
            }
            let trial: Vec<f64> = stations
                .iter()
                .map(|s| (s + rng.random_range(-step..=step)).rem_euclid(per))
                .collect();
            if !ctx.valid_stations(&trial, &p) {
                step *= 0.5;
                continue;
            }
            let l = ctx.multi_loss(&ctx.mode_at(&trial), &p);
            left -= 1;
            if l < loss {
                stations = trial;
                loss = l;
            } else {
                step *= 0.5;
            }
        }
        let mut mode = ctx.mode_at(&stations);
        let robots: Vec<RobotSpec> = mode.robots.iter().map(|&i| ctx.team[i]).collect();
        let Ok((jf, forces)) = force_feasibility_loss(&mode, &p, &ctx.lsp, ctx.intr.mu_contact, &robots) else {
            continue;
        };
        if jf > FEASIBLE_LOSS {
            continue;
        }
        mode.forces = Some(forces);
        let run = track_arc(&ctx.poly, &ctx.intr, &ctx.team, &mode, arc, &ctx.obstacles, &ctx.gains, &ctx.policy);
        if run.success {
            return Some(ModeCandidate {
                mode,
                loss,
                force_feasible: true,
                practically_feasible: true,
                tracking_error: run.max_deviation,
            });
        }
    }
    None
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn square_ctx(n: usize, f_max: f64) -> PushContext {
        let poly = Polygon::rectangle(1.0, 1.0).unwrap();
        let intr = ObjectIntrinsics::uniform(&poly, 10.0, 0.2, 0.8);
        PushContext::new(poly, intr, vec![RobotSpec { f_max, ..RobotSpec::default() }; n])
    }

    #[test]
    fn straight_push_uses_trailing_edge() {
        let ctx = square_ctx(2, 100.0);
        let p = Twist::new(1.0, 0.0, 0.0);
        let cand = generate_mode(&ctx, &p, DEFAULT_BUDGET, 7).expect("mode");
        assert!(cand.force_feasible && cand.practically_feasible);
        assert!(ctx.loss(&cand.mode, &p) <= FEASIBLE_LOSS);
        for c in &cand.mode.contacts {
            assert!((c.position[0] + 0.5).abs() < 1e-9, "{c:?}");
        }
    }

    #[test]
    fn hopeless_inputs_give_nothing() {
        let p = Twist::new(1.0, 0.0, 0.0);
        assert!(generate_mode(&square_ctx(2, 0.0), &p, DEFAULT_BUDGET, 1).is_none());
        assert!(generate_mode(&square_ctx(2, 100.0), &p, 0, 1).is_none());
    }

    #[test]
    fn larger_budget_keeps_result() {
        let ctx = square_ctx(2, 100.0);
        let p = Twist::new(0.6, 0.3, 0.4);
        for budget in [5usize, 20, 60] {
            if generate_mode(&ctx, &p, budget, 3).is_some() {
                assert!(generate_mode(&ctx, &p, budget * 4, 3).is_some());
            }
        }
    }
}
