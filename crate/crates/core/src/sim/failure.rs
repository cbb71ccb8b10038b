//! Deviation and stall detection over a sliding window of object poses.

use serde::{Deserialize, Serialize};

use crate::geometry::{dist_point_to_arc, wrap_angle, ArcMotion, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailurePolicy {
    pub delta_f: f64,
    pub t_c: f64,
    pub r_stuck: f64,
    /// Stalls this close to the stage goal are not failures.
    pub proximity: f64,
}

impl Default for FailurePolicy {
    fn default() -> Self {
        Self {
            delta_f: 0.3,
            t_c: 5.0,
            r_stuck: 0.02,
            proximity: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    Deviation,
    Stuck,
}

impl std::fmt::Display for FailureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureKind::Deviation => "deviation",
            FailureKind::Stuck => "stuck",
        })
    }
}

fn pose_gap(a: &Pose, b: &Pose) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + wrap_angle(a.psi - b.psi).powi(2)).sqrt()
}

/// Inspects the last `t_c` seconds of `(time, pose)` samples against the
/// stage arc. Returns nothing until the history spans a full window.
pub fn detect_failure(history: &[(f64, Pose)], arc: &ArcMotion, policy: &FailurePolicy) -> Option<FailureKind> {
    let (t_end, last) = *history.last()?;
    if t_end - history[0].0 < policy.t_c - 1e-9 {
        return None;
    }
    let start = history.partition_point(|(t, _)| *t < t_end - policy.t_c - 1e-9);
    let window = &history[start..];
    if window.iter().any(|(_, p)| dist_point_to_arc(&p.position(), arc) >= policy.delta_f) {
        return Some(FailureKind::Deviation);
    }
    if pose_gap(&last, &arc.end()) <= policy.proximity {
        return None;
    }
    // The bounding-box diagonal bounds every pairwise gap.
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    let ref_psi = window[0].1.psi;
    for (_, p) in window {
        let v = [p.x, p.y, wrap_angle(p.psi - ref_psi)];
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let diameter = (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt();
    if diameter < policy.r_stuck {
        return Some(FailureKind::Stuck);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::arc_from_poses;

    fn arc() -> ArcMotion {
        arc_from_poses(&Pose::origin(), &Pose::new(2.0, 0.0, 0.0))
    }

    #[test]
    fn perfect_tracking_is_fine() {
        let h: Vec<_> = (0..=60).map(|i| (i as f64 * 0.1, Pose::new(i as f64 * 0.03, 0.0, 0.0))).collect();
        assert_eq!(detect_failure(&h, &arc(), &FailurePolicy::default()), None);
    }

    #[test]
    fn frozen_object_is_stuck() {
        let h: Vec<_> = (0..=60).map(|i| (i as f64 * 0.1, Pose::new(0.5, 0.0, 0.0))).collect();
        let policy = FailurePolicy { r_stuck: 0.05, ..FailurePolicy::default() };
        assert_eq!(detect_failure(&h, &arc(), &policy), Some(FailureKind::Stuck));
        // Too short a history says nothing.
        assert_eq!(detect_failure(&h[..10], &arc(), &policy), None);
    }

    #[test]
    fn drift_past_threshold_is_deviation() {
        // Lateral offset ramps 0 → 0.6 over 6 s, crossing 0.3 once at t = 3.
        let h: Vec<_> = (0..=60).map(|i| (i as f64 * 0.1, Pose::new(i as f64 * 0.02, i as f64 * 0.01, 0.0))).collect();
        assert_eq!(detect_failure(&h, &arc(), &FailurePolicy::default()), Some(FailureKind::Deviation));
        let before: Vec<_> = h.iter().copied().filter(|(t, _)| *t < 2.95).collect();
        let policy = FailurePolicy { t_c: 2.0, ..FailurePolicy::default() };
        assert_eq!(detect_failure(&before, &arc(), &policy), None);
    }
}
