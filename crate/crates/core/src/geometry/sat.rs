//! Separating-axis collision tests on convex decompositions.

use super::{perp, Footprint, Polygon, Pose, Vec2, COLLISION_TOLERANCE};

fn project(part: &[Vec2], axis: &Vec2) -> (f64, f64) {
    part.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Separated iff some edge normal of either part shows a gap larger than
/// `tol`. A negative `tol` demands that much penetration.
fn convex_collide(a: &[Vec2], b: &[Vec2], tol: f64) -> bool {
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let e = poly[(i + 1) % n] - poly[i];
            let len = e.norm();
            if len < 1e-15 {
                continue;
            }
            let axis = perp(&e) / len;
            let (a0, a1) = project(a, &axis);
            let (b0, b1) = project(b, &axis);
            let gap = (b0 - a1).max(a0 - b1);
            if gap > tol {
                return false;
            }
        }
    }
    true
}

/// World-frame footprints intersect, or come within `tol` of each other.
pub fn collide_with_tolerance(a: &Footprint, b: &Footprint, tol: f64) -> bool {
    if !a.aabb_overlaps(b, tol.max(0.0)) {
        return false;
    }
    a.parts
        .iter()
        .any(|pa| b.parts.iter().any(|pb| convex_collide(pa, pb, tol)))
}

/// True iff the transformed polygons intersect or touch within the global
/// penetration tolerance.
pub fn collide(a: &Polygon, pose_a: &Pose, b: &Polygon, pose_b: &Pose) -> bool {
    collide_with_tolerance(
        &a.footprint().at(pose_a),
        &b.footprint().at(pose_b),
        COLLISION_TOLERANCE,
    )
}

/// Result of a swept-region query: the earliest pose index of the first
/// sequence whose footprint touches the union swept by the second.
pub type SweptHit = Option<usize>;

/// Earliest index `i` into `poses_a` such that `a` at `poses_a[i]` meets the
/// union of `b` over all of `poses_b`.
pub fn swept_region_intersects(
    a: &Footprint,
    poses_a: &[Pose],
    b: &Footprint,
    poses_b: &[Pose],
) -> SweptHit {
    let placed_b: Vec<Footprint> = poses_b.iter().map(|p| b.at(p)).collect();
    let union = Footprint::new(Vec::new());
    let (min, max) = placed_b.iter().fold((union.min, union.max), |(lo, hi), f| (lo.inf(&f.min), hi.sup(&f.max)));
    let bound = Footprint { parts: Vec::new(), min, max };
    poses_a.iter().position(|pa| {
        let fa = a.at(pa);
        fa.aabb_overlaps(&bound, COLLISION_TOLERANCE)
            && placed_b
                .iter()
                .any(|fb| collide_with_tolerance(&fa, fb, COLLISION_TOLERANCE))
    })
}
