use serde::{Deserialize, Serialize};

use super::pose::arc_coefficients;
use super::{point_segment_distance, rotate, wrap_angle, Pose, Twist, Vec2};
use std::f64::consts::PI;

/// Trajectory of a rigid body under a constant body twist: a circular arc,
/// or a straight segment when ω = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcMotion {
    pub start: Pose,
    pub twist: Twist,
    pub duration: f64,
    end: Pose,
}

impl ArcMotion {
    pub fn new(start: Pose, twist: Twist, duration: f64) -> Self {
        let end = super::integrate_twist(&start, &twist, duration);
        Self {
            start,
            twist,
            duration,
            end,
        }
    }

    pub fn end(&self) -> Pose {
        self.end
    }

    /// Pose after `t` seconds along the arc (clamped to the duration).
    pub fn pose_at(&self, t: f64) -> Pose {
        super::integrate_twist(&self.start, &self.twist, t.clamp(0.0, self.duration))
    }

    /// Pose at fraction `u ∈ [0, 1]` of the arc.
    pub fn pose_at_fraction(&self, u: f64) -> Pose {
        self.pose_at(u.clamp(0.0, 1.0) * self.duration)
    }

    /// Twist that traverses the whole arc in unit time.
    pub fn unit_twist(&self) -> Twist {
        self.twist.scaled(self.duration)
    }

    pub fn translation_length(&self) -> f64 {
        self.twist.linear().norm() * self.duration
    }

    pub fn rotation(&self) -> f64 {
        (self.twist.omega * self.duration).abs()
    }

    /// Length metric combining translation with rotation swept at radius `rho`.
    pub fn travel(&self, rho: f64) -> f64 {
        self.translation_length() + rho * self.rotation()
    }

    pub fn is_degenerate(&self) -> bool {
        self.translation_length() < 1e-12 && self.rotation() < 1e-12
    }

    /// Evenly spaced poses including both endpoints, at most `max_step` metres
    /// (rotation weighted by `rho`) apart.
    pub fn sample(&self, max_step: f64, rho: f64) -> Vec<Pose> {
        let n = ((self.travel(rho) / max_step).ceil() as usize).max(1);
        (0..=n)
            .map(|i| self.pose_at_fraction(i as f64 / n as f64))
            .collect()
    }
}

/// Unique unit-duration arc from `s0` to `s1`. The heading change is the
/// shortest signed angle, with a tie at π resolved to +π.
pub fn arc_from_poses(s0: &Pose, s1: &Pose) -> ArcMotion {
    let dpsi = wrap_angle(s1.psi - s0.psi);
    let d_world = s1.position() - s0.position();
    let d = rotate(&d_world, -s0.psi);
    let (a, b) = arc_coefficients(dpsi);
    // Invert [[a, -b], [b, a]].
    let det = a * a + b * b;
    let vx = (a * d.x + b * d.y) / det;
    let vy = (-b * d.x + a * d.y) / det;
    ArcMotion::new(*s0, Twist::new(vx, vy, dpsi), 1.0)
}

/// Minimum distance from `p` to the positional trace of `arc`.
pub fn dist_point_to_arc(p: &Vec2, arc: &ArcMotion) -> f64 {
    let start = arc.start.position();
    let end = arc.end().position();
    let phi = arc.twist.omega * arc.duration;
    let v = arc.twist.linear();
    if v.norm() * arc.duration < 1e-12 {
        return (p - start).norm();
    }
    if phi.abs() < 1e-9 {
        return point_segment_distance(p, &start, &end);
    }
    let w = arc.twist.omega;
    let icr_body = Vec2::new(-v.y / w, v.x / w);
    let center = start + rotate(&icr_body, arc.start.psi);
    let radius = v.norm() / w.abs();
    let rel = p - center;
    if phi.abs() >= 2.0 * PI {
        return (rel.norm() - radius).abs();
    }
    let a0 = (start - center).y.atan2((start - center).x);
    let beta = rel.y.atan2(rel.x);
    let delta = ((beta - a0) * phi.signum()).rem_euclid(2.0 * PI);
    if delta <= phi.abs() {
        (rel.norm() - radius).abs()
    } else {
        (p - start).norm().min((p - end).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn arcs_from_simple_poses() {
        let o = Pose::origin();
        let a = arc_from_poses(&o, &o);
        assert!(a.twist.is_zero() || a.twist.linear().norm() < 1e-15);
        assert_eq!(a.duration, 1.0);
        let b = arc_from_poses(&o, &Pose::new(2.0, 0.0, 0.0));
        assert!((b.twist.vx - 2.0).abs() < 1e-12 && b.twist.vy.abs() < 1e-12);
        let c = arc_from_poses(&o, &Pose::new(1.0, 1.0, FRAC_PI_2));
        assert!((c.twist.vx - FRAC_PI_2).abs() < 1e-12);
        assert!(c.twist.vy.abs() < 1e-12);
        assert!((c.twist.omega - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn heading_tie_goes_positive() {
        let a = arc_from_poses(&Pose::origin(), &Pose::new(0.0, 0.0, PI));
        assert!((a.twist.omega - PI).abs() < 1e-12);
        let b = arc_from_poses(&Pose::new(0.0, 0.0, 0.5), &Pose::new(1.0, 0.0, 0.5 - PI));
        assert!((b.twist.omega - PI).abs() < 1e-12);
    }

    #[test]
    fn distances_to_straight_arc() {
        let arc = arc_from_poses(&Pose::origin(), &Pose::new(2.0, 0.0, 0.0));
        assert!(dist_point_to_arc(&Vec2::new(1.0, 0.0), &arc) < 1e-12);
        assert!((dist_point_to_arc(&Vec2::new(1.0, 1.0), &arc) - 1.0).abs() < 1e-12);
        assert!((dist_point_to_arc(&Vec2::new(3.0, 0.0), &arc) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_to_quarter_circle_matches_sampling() {
        let arc = ArcMotion::new(Pose::origin(), Twist::new(FRAC_PI_2, 0.0, FRAC_PI_2), 1.0);
        // Arc length is π/2; sample at 1e-4 m.
        let n = (FRAC_PI_2 / 1e-4).ceil() as usize;
        for q in [Vec2::new(2.0, 2.0), Vec2::new(0.0, 3.0), Vec2::new(-1.0, -1.0), Vec2::new(0.5, 0.2)] {
            let brute = (0..=n)
                .map(|i| (arc.pose_at_fraction(i as f64 / n as f64).position() - q).norm())
                .fold(f64::INFINITY, f64::min);
            let d = dist_point_to_arc(&q, &arc);
            assert!((d - brute).abs() < 1e-6, "{q:?}: {d} vs {brute}");
        }
        // (2,2) lies outside the swept angular range; the end point (1,1) is nearest.
        let expected = std::f64::consts::SQRT_2;
        assert!((dist_point_to_arc(&Vec2::new(2.0, 2.0), &arc) - expected).abs() < 1e-12);
    }

    #[test]
    fn stored_end_matches_integration() {
        let a = ArcMotion::new(Pose::new(1.0, -2.0, 0.3), Twist::new(0.4, 0.1, -0.8), 2.5);
        let e = crate::geometry::integrate_twist(&a.start, &a.twist, a.duration);
        assert!(a.end().distance(&e) < 1e-9);
    }
}
