//! Planar geometry: SE(2) poses, body-frame twists, constant-twist arcs,
//! polygons and collision queries.

mod arc;
mod polygon;
mod pose;
mod sat;

pub use arc::{arc_from_poses, dist_point_to_arc, ArcMotion};
pub use polygon::{BoundaryPoint, Footprint, Polygon};
pub(crate) use polygon::Fnv;
pub use pose::{integrate_twist, Pose, Twist};
pub use sat::{collide, collide_with_tolerance, swept_region_intersects, SweptHit};

use std::f64::consts::PI;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Global penetration tolerance (m) shared by every collision query.
pub const COLLISION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs ≥ 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has zero area")]
    Degenerate,
    #[error("polygon is self-intersecting (edges {0} and {1})")]
    SelfIntersecting(usize, usize),
    #[error("non-finite vertex coordinate")]
    NonFinite,
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

#[inline]
pub fn cross2(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

#[inline]
pub fn rotate(v: &Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Left-hand perpendicular, (x, y) -> (-y, x).
#[inline]
pub fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Closest distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (p - closest_on_segment(p, a, b)).norm()
}

pub fn closest_on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= f64::EPSILON {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}
