use serde::{Deserialize, Serialize};

use super::{rotate, wrap_angle, Vec2};

/// Planar pose. `psi` is kept in (-π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn origin() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// `self ⊕ other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let p = self.position() + rotate(&other.position(), self.psi);
        Pose::new(p.x, p.y, self.psi + other.psi)
    }

    pub fn inverse(&self) -> Pose {
        let p = rotate(&(-self.position()), -self.psi);
        Pose::new(p.x, p.y, -self.psi)
    }

    /// `self⁻¹ ⊕ other`.
    pub fn relative(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    /// Maps a body-frame point into the world.
    pub fn transform_point(&self, p: &Vec2) -> Vec2 {
        self.position() + rotate(p, self.psi)
    }

    pub fn transform_vector(&self, v: &Vec2) -> Vec2 {
        rotate(v, self.psi)
    }

    /// Maps a world point into this body frame.
    pub fn inverse_transform_point(&self, p: &Vec2) -> Vec2 {
        rotate(&(p - self.position()), -self.psi)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.position() - other.position()).norm()
    }

    pub fn angle_to(&self, other: &Pose) -> f64 {
        wrap_angle(other.psi - self.psi).abs()
    }

    /// True when both the position and heading errors are within bounds.
    pub fn within(&self, other: &Pose, dist: f64, angle: f64) -> bool {
        self.distance(other) <= dist && self.angle_to(other) <= angle
    }
}

/// Body-frame generalized velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn linear(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    pub fn scaled(&self, k: f64) -> Twist {
        Twist::new(self.vx * k, self.vy * k, self.omega * k)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.vx, self.vy, self.omega]
    }

    pub fn is_zero(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.omega == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }

    /// Euclidean norm with the angular part weighted by a length `rho`.
    pub fn norm_with(&self, rho: f64) -> f64 {
        (self.vx * self.vx + self.vy * self.vy + (rho * self.omega).powi(2)).sqrt()
    }

    /// Rotates the linear part within the body plane.
    pub fn rotate_linear(&self, angle: f64) -> Twist {
        let v = rotate(&self.linear(), angle);
        Twist::new(v.x, v.y, self.omega)
    }
}

/// `sin(φ)/φ` and `(1 - cos φ)/φ`, series-expanded near zero.
pub(crate) fn arc_coefficients(phi: f64) -> (f64, f64) {
    if phi.abs() < 1e-4 {
        let p2 = phi * phi;
        (1.0 - p2 / 6.0 + p2 * p2 / 120.0, phi / 2.0 - phi * p2 / 24.0)
    } else {
        (phi.sin() / phi, (1.0 - phi.cos()) / phi)
    }
}

/// Pose reached after applying the constant body twist for `t` seconds.
///
/// The world displacement is `(∫₀ᵗ Rot(ωτ + ψ₀) dτ) · v`, evaluated in closed
/// form; ω = 0 reduces to a straight line.
pub fn integrate_twist(start: &Pose, twist: &Twist, t: f64) -> Pose {
    let phi = twist.omega * t;
    let (a, b) = arc_coefficients(phi);
    // ∫ Rot(ωτ) dτ = t · [[a, -b], [b, a]]
    let local = Vec2::new(
        t * (a * twist.vx - b * twist.vy),
        t * (b * twist.vx + a * twist.vy),
    );
    let d = rotate(&local, start.psi);
    Pose::new(start.x + d.x, start.y + d.y, start.psi + phi)
}
