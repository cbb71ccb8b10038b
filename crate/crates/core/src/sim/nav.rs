//! Occupancy-grid paths for robots travelling to their contacts.

use pathfinding::prelude::astar;

use crate::geometry::{Polygon, Pose, Vec2};

const STRAIGHT: u32 = 10;
const DIAGONAL: u32 = 14;
/// Cost multiplier for entering an occupied cell. Occupied cells stay
/// passable so a robot that starts inside a margin can always leave it.
const OCCUPIED: u32 = 60;

type Cell = (usize, usize);

#[derive(Debug, Clone)]
pub struct NavGrid {
    lo: Vec2,
    res: f64,
    nx: usize,
    ny: usize,
    occupied: Vec<bool>,
}

impl NavGrid {
    pub fn new(lo: Vec2, hi: Vec2, res: f64) -> Self {
        let nx = ((hi.x - lo.x) / res).ceil().max(1.0) as usize;
        let ny = ((hi.y - lo.y) / res).ceil().max(1.0) as usize;
        Self {
            lo,
            res,
            nx,
            ny,
            occupied: vec![false; nx * ny],
        }
    }

    fn center(&self, (i, j): Cell) -> Vec2 {
        self.lo + Vec2::new((i as f64 + 0.5) * self.res, (j as f64 + 0.5) * self.res)
    }

    pub fn cell(&self, p: &Vec2) -> Cell {
        let i = ((p.x - self.lo.x) / self.res).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p.y - self.lo.y) / self.res).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    pub fn is_occupied(&self, p: &Vec2) -> bool {
        let (i, j) = self.cell(p);
        self.occupied[j * self.nx + i]
    }

    /// Marks cells whose centres lie within `clearance` of `poly` placed at
    /// `pose`.
    pub fn mark(&mut self, poly: &Polygon, pose: &Pose, clearance: f64) {
        let pts: Vec<Vec2> = poly.vertices().iter().map(|v| pose.transform_point(v)).collect();
        let min = pts.iter().fold(Vec2::repeat(f64::INFINITY), |a, p| a.inf(p)) - Vec2::repeat(clearance);
        let max = pts.iter().fold(Vec2::repeat(f64::NEG_INFINITY), |a, p| a.sup(p)) + Vec2::repeat(clearance);
        let (i0, j0) = self.cell(&min);
        let (i1, j1) = self.cell(&max);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let local = pose.inverse_transform_point(&self.center((i, j)));
                if poly.signed_distance(&local).0 < clearance {
                    self.occupied[j * self.nx + i] = true;
                }
            }
        }
    }

    fn successors(&self, (i, j): Cell) -> Vec<(Cell, u32)> {
        let mut out = Vec::with_capacity(8);
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
                    continue;
                }
                let c = (ni as usize, nj as usize);
                let base = if di != 0 && dj != 0 { DIAGONAL } else { STRAIGHT };
                let k = if self.occupied[c.1 * self.nx + c.0] { OCCUPIED } else { 1 };
                out.push((c, base * k));
            }
        }
        out
    }

    fn visible(&self, a: &Vec2, b: &Vec2) -> bool {
        let steps = ((b - a).norm() / (0.5 * self.res)).ceil() as usize;
        (0..=steps).all(|k| {
            let u = if steps == 0 { 0.0 } else { k as f64 / steps as f64 };
            !self.is_occupied(&(a + (b - a) * u))
        })
    }

    /// Waypoints from `from` to `to`, excluding `from` and ending at `to`.
    /// Free cells are preferred; the path crosses occupied ones only when
    /// nothing else connects.
    pub fn path(&self, from: &Vec2, to: &Vec2) -> Vec<Vec2> {
        let (start, goal) = (self.cell(from), self.cell(to));
        let h = |c: &Cell| {
            let dx = c.0.abs_diff(goal.0) as u32;
            let dy = c.1.abs_diff(goal.1) as u32;
            STRAIGHT * dx.max(dy) + (DIAGONAL - STRAIGHT) * dx.min(dy)
        };
        let Some((cells, _)) = astar(&start, |c| self.successors(*c), h, |c| *c == goal) else {
            return vec![*to];
        };
        let mut pts: Vec<Vec2> = cells[1..cells.len().saturating_sub(1)].iter().map(|&c| self.center(c)).collect();
        pts.push(*to);
        // Greedy shortcutting over free lines of sight.
        let mut out = Vec::new();
        let mut at = *from;
        let mut i = 0;
        while i < pts.len() {
            let mut j = pts.len() - 1;
            while j > i && !self.visible(&at, &pts[j]) {
                j -= 1;
            }
            out.push(pts[j]);
            at = pts[j];
            i = j + 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_grid_goes_straight() {
        let g = NavGrid::new(Vec2::new(-2.0, -2.0), Vec2::new(2.0, 2.0), 0.05);
        let p = g.path(&Vec2::new(-1.0, 0.0), &Vec2::new(1.0, 0.0));
        assert_eq!(p, vec![Vec2::new(1.0, 0.0)]);
    }

    #[test]
    fn path_avoids_marked_block() {
        let mut g = NavGrid::new(Vec2::new(-2.0, -2.0), Vec2::new(2.0, 2.0), 0.05);
        let wall = Polygon::rectangle(0.2, 2.0).unwrap();
        g.mark(&wall, &Pose::origin(), 0.15);
        let p = g.path(&Vec2::new(-1.0, 0.0), &Vec2::new(1.0, 0.0));
        assert!(p.len() > 1);
        let mut at = Vec2::new(-1.0, 0.0);
        for q in &p {
            for k in 0..=20 {
                let x = at + (q - at) * (k as f64 / 20.0);
                assert!(wall.signed_distance(&x).0 > 0.1, "{x:?}");
            }
            at = *q;
        }
    }
}
