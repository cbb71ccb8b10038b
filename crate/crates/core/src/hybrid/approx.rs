//! Last-resort approximation of a short arc by at most three primitive
//! pushes.

use crate::geometry::{dist_point_to_arc, integrate_twist, ArcMotion, Pose};
use crate::lp::{LinearProgram, Relation};
use crate::modes::Primitive;

use super::Keyframe;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApproxError {
    #[error("twist is not a non-negative combination of the primitives")]
    NotSpanned,
}

/// Writes the arc's unit twist as `Σ λ_j p_j` with `λ ≥ 0` and the least
/// total duration. A vertex solution has at most three nonzero weights.
pub fn decompose_twist(arc: &ArcMotion, primitives: &[Primitive]) -> Result<Vec<(usize, f64)>, ApproxError> {
    let p = arc.unit_twist().as_array();
    let mut lp = LinearProgram::new(primitives.len());
    lp.set_objective(vec![1.0; primitives.len()]);
    for (k, &pk) in p.iter().enumerate() {
        lp.add_constraint(primitives.iter().map(|q| q.twist.as_array()[k]).collect(), Relation::Eq, pk);
    }
    let sol = lp.solve().map_err(|_| ApproxError::NotSpanned)?;
    Ok(sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 1e-12)
        .map(|(j, &l)| (j, l))
        .collect())
}

/// Keyframes that apply each weighted primitive in turn from the arc start.
/// The last keyframe is where the sequence ends, which differs from the arc
/// end by a second-order amount.
pub fn seq_arc_approx(arc: &ArcMotion, primitives: &[Primitive]) -> Result<Vec<Keyframe>, ApproxError> {
    let weights = decompose_twist(arc, primitives)?;
    let mut pose = arc.start;
    let mut out = Vec::with_capacity(weights.len() + 1);
    for (j, lambda) in weights {
        out.push(Keyframe {
            pose,
            mode: Some(primitives[j].mode.clone()),
        });
        pose = integrate_twist(&pose, &primitives[j].twist, lambda);
    }
    out.push(Keyframe { pose, mode: None });
    Ok(out)
}

/// Hausdorff distance between the positional traces of the fragment's
/// sub-arcs and of `arc`, sampled every `step` metres.
pub fn trace_deviation(arc: &ArcMotion, fragment: &[Keyframe], step: f64) -> f64 {
    let subs: Vec<ArcMotion> = fragment
        .windows(2)
        .map(|w| crate::geometry::arc_from_poses(&w[0].pose, &w[1].pose))
        .collect();
    let mut worst: f64 = 0.0;
    for s in &subs {
        for q in s.sample(step, 0.0) {
            worst = worst.max(dist_point_to_arc(&q.position(), arc));
        }
    }
    for q in arc.sample(step, 0.0) {
        let d = subs
            .iter()
            .map(|s| dist_point_to_arc(&q.position(), s))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    worst
}

/// End-pose gap between a fragment and its arc.
pub fn endpoint_gap(arc: &ArcMotion, fragment: &[Keyframe]) -> Pose {
    let end = fragment.last().map_or(arc.start, |k| k.pose);
    arc.end().relative(&end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{ContactPoint, PushingMode};
    use crate::geometry::{Polygon, Twist};

    fn axis_primitives() -> Vec<Primitive> {
        let sq = Polygon::rectangle(1.0, 1.0).unwrap();
        let mode = PushingMode::new(vec![ContactPoint::on(&sq, 0.0)], vec![0]).unwrap();
        [
            [0.4, 0.0, 0.0],
            [-0.4, 0.0, 0.0],
            [0.0, 0.4, 0.0],
            [0.0, -0.4, 0.0],
            [0.0, 0.0, 0.4],
            [0.0, 0.0, -0.4],
        ]
        .iter()
        .map(|v| Primitive {
            twist: Twist::new(v[0], v[1], v[2]),
            mode: mode.clone(),
        })
        .collect()
    }

    #[test]
    fn single_primitive_arc() {
        let prims = axis_primitives();
        let arc = ArcMotion::new(Pose::new(1.0, 2.0, 0.3), prims[2].twist, 1.0);
        let w = decompose_twist(&arc, &prims).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].0, 2);
        assert!((w[0].1 - 1.0).abs() < 1e-9);
        let frag = seq_arc_approx(&arc, &prims).unwrap();
        assert_eq!(frag.len(), 2);
        assert!(frag[1].pose.within(&arc.end(), 1e-9, 1e-9));
    }

    #[test]
    fn average_of_two_primitives() {
        let prims = axis_primitives();
        let avg = Twist::new(0.2, 0.2, 0.0);
        let arc = ArcMotion::new(Pose::origin(), avg, 1.0);
        let w = decompose_twist(&arc, &prims).unwrap();
        assert_eq!(w.len(), 2);
        for (_, l) in &w {
            assert!((l - 0.5).abs() < 1e-9);
        }
        let frag = seq_arc_approx(&arc, &prims).unwrap();
        // Staircase: (0, 0) → (0.2, 0) → (0.2, 0.2) against the diagonal.
        let dev = trace_deviation(&arc, &frag, 1e-3);
        let exact = 0.2 / 2f64.sqrt();
        assert!((dev - exact).abs() < 2e-3, "{dev}");
    }

    #[test]
    fn deviation_scales_linearly() {
        let prims = axis_primitives();
        let dir = Twist::new(0.6, -0.3, 0.8);
        let ratios: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&eps| {
                let scale = eps / dir.norm_with(1.0);
                let arc = ArcMotion::new(Pose::new(0.5, 0.5, 1.0), dir.scaled(scale), 1.0);
                trace_deviation(&arc, &seq_arc_approx(&arc, &prims).unwrap(), eps / 500.0) / eps
            })
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi <= 2.0 * lo, "{ratios:?}");
    }

    #[test]
    fn unspanned_twist_is_rejected() {
        let prims = axis_primitives()[..3].to_vec();
        let arc = ArcMotion::new(Pose::origin(), Twist::new(0.0, -0.1, 0.0), 1.0);
        assert_eq!(decompose_twist(&arc, &prims), Err(ApproxError::NotSpanned));
    }
}
