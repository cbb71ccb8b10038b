use nalgebra::Matrix3xX;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::contact::PushingMode;
use crate::geometry::Twist;
use crate::lp::{LinearProgram, Relation};

use super::{generate_mode, PushContext, DEFAULT_BUDGET};

/// A verified twist direction with the mode that realizes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub twist: Twist,
    pub mode: PushingMode,
}

/// Vectors positively span ℝ³ iff they span it linearly and some strictly
/// positive combination of them vanishes.
pub fn positively_spans(vectors: &[[f64; 3]]) -> bool {
    if vectors.len() < 4 {
        return false;
    }
    let m = Matrix3xX::from_fn(vectors.len(), |r, c| vectors[c][r]);
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    if sv.min() <= 1e-9 * top.max(1e-300) {
        return false;
    }
    // Σ λ_i v_i = 0 with λ_i ≥ 1, written for μ = λ − 1 ≥ 0.
    let n = vectors.len();
    let mut lp = LinearProgram::new(n);
    for k in 0..3 {
        let row: Vec<f64> = vectors.iter().map(|v| v[k]).collect();
        let rhs = -row.iter().sum::<f64>();
        lp.add_constraint(row, Relation::Eq, rhs);
    }
    lp.solve().is_ok()
}

/// Twists travelling `length` metres under the `|v| + ρ|ω|` metric.
fn scaled(dir: [f64; 3], rho: f64, length: f64) -> Twist {
    let t = Twist::new(dir[0], dir[1], dir[2] / rho);
    let travel = t.linear().norm() + rho * t.omega.abs();
    t.scaled(length / travel)
}

/// Tries up to `samples` twist directions (the six axis directions first,
/// then random ones) and collects those with a practically feasible mode.
/// The team is sufficient once the collected twists positively span ℝ³.
pub fn mode_sufficient(ctx: &PushContext, samples: usize, seed: u64) -> (bool, Vec<Primitive>) {
    let rho = ctx.poly.bounding_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let mut found: Vec<Primitive> = Vec::new();
    for i in 0..samples {
        let dir = if i < axes.len() {
            axes[i]
        } else {
            let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
            v
        };
        let p = scaled(dir, rho, 0.4);
        if let Some(c) = generate_mode(ctx, &p, DEFAULT_BUDGET, seed.wrapping_add(i as u64)) {
            found.push(Primitive { twist: p, mode: c.mode });
            let vs: Vec<[f64; 3]> = found.iter().map(|q| [q.twist.vx, q.twist.vy, rho * q.twist.omega]).collect();
            if positively_spans(&vs) {
                return (true, found);
            }
        }
    }
    (false, found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::tests::square_ctx;

    #[test]
    fn span_certificates() {
        let axes = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
        assert!(positively_spans(&axes));
        assert!(!positively_spans(&axes[..5]));
        // Simplex directions: four vectors summing to zero.
        assert!(positively_spans(&[[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]));
        assert!(!positively_spans(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]));
    }

    #[test]
    fn three_robots_suffice_for_a_square() {
        let (ok, prims) = mode_sufficient(&square_ctx(3, 100.0), 24, 5);
        assert!(ok && prims.len() >= 4, "{}", prims.len());
    }

    #[test]
    fn weak_robot_or_no_samples_is_insufficient() {
        assert!(!mode_sufficient(&square_ctx(1, 10.0), 12, 5).0);
        assert!(!mode_sufficient(&square_ctx(3, 100.0), 0, 5).0);
    }
}
