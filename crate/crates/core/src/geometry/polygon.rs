use serde::{Deserialize, Serialize};

use super::{closest_on_segment, cross2, perp, GeometryError, Pose, Vec2};
use std::f64::consts::PI;

/// Simple polygon with counter-clockwise vertices, decomposed into convex
/// parts on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon {
    vertices: Vec<Vec2>,
    parts: Vec<Vec<Vec2>>,
    cumulative: Vec<f64>,
    area: f64,
    centroid: Vec2,
}

/// A point on the polygon boundary, parameterized by arc length from vertex 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub s: f64,
    pub position: Vec2,
    pub edge: usize,
    /// Unit normal pointing into the polygon.
    pub normal: Vec2,
    /// Unit edge direction (counter-clockwise).
    pub tangent: Vec2,
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| cross2(&v[i], &v[(i + 1) % n])).sum::<f64>() * 0.5
}

fn segments_intersect(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2) -> bool {
    let o = |p: &Vec2, q: &Vec2, r: &Vec2| cross2(&(q - p), &(r - p));
    let d1 = o(c, d, a);
    let d2 = o(c, d, b);
    let d3 = o(a, b, c);
    let d4 = o(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: &Vec2, q: &Vec2, r: &Vec2, v: f64| {
        v.abs() < 1e-12
            && r.x >= p.x.min(q.x) - 1e-12
            && r.x <= p.x.max(q.x) + 1e-12
            && r.y >= p.y.min(q.y) - 1e-12
            && r.y <= p.y.max(q.y) + 1e-12
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

fn point_in_triangle(p: &Vec2, a: &Vec2, b: &Vec2, c: &Vec2) -> bool {
    let c1 = cross2(&(b - a), &(p - a));
    let c2 = cross2(&(c - b), &(p - b));
    let c3 = cross2(&(a - c), &(p - c));
    c1 >= -1e-12 && c2 >= -1e-12 && c3 >= -1e-12
}

fn is_convex_ring(v: &[Vec2]) -> bool {
    let n = v.len();
    (0..n).all(|i| {
        let a = v[i];
        let b = v[(i + 1) % n];
        let c = v[(i + 2) % n];
        cross2(&(b - a), &(c - b)) >= -1e-9
    })
}

/// Ear clipping on a CCW ring; returns index triples.
fn triangulate(v: &[Vec2]) -> Vec<[usize; 3]> {
    let mut ring: Vec<usize> = (0..v.len()).collect();
    let mut tris = Vec::with_capacity(v.len().saturating_sub(2));
    while ring.len() > 3 {
        let n = ring.len();
        let mut ear = None;
        let mut best = (f64::NEG_INFINITY, 0);
        for i in 0..n {
            let (ia, ib, ic) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            let turn = cross2(&(v[ib] - v[ia]), &(v[ic] - v[ib]));
            if turn > best.0 {
                best = (turn, i);
            }
            if turn <= 1e-12 {
                continue;
            }
            let blocked = ring.iter().any(|&j| {
                j != ia && j != ib && j != ic && point_in_triangle(&v[j], &v[ia], &v[ib], &v[ic])
            });
            if !blocked {
                ear = Some(i);
                break;
            }
        }
        // Numerical fallback: clip the most convex vertex.
        let i = ear.unwrap_or(best.1);
        tris.push([ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]]);
        ring.remove(i);
    }
    tris.push([ring[0], ring[1], ring[2]]);
    tris
}

/// Greedy Hertel–Mehlhorn merge of triangles into convex pieces.
fn convex_parts(v: &[Vec2]) -> Vec<Vec<Vec2>> {
    if is_convex_ring(v) {
        return vec![v.to_vec()];
    }
    let mut pieces: Vec<Vec<usize>> = triangulate(v).into_iter().map(|t| t.to_vec()).collect();
    let shares = |p: &[usize], a: usize, b: usize| -> Option<usize> {
        (0..p.len()).find(|&i| p[i] == a && p[(i + 1) % p.len()] == b)
    };
    loop {
        let mut merged = false;
        'outer: for i in 0..pieces.len() {
            for j in (i + 1)..pieces.len() {
                let pi = &pieces[i];
                for k in 0..pi.len() {
                    let (a, b) = (pi[k], pi[(k + 1) % pi.len()]);
                    if let Some(m) = shares(&pieces[j], b, a) {
                        let pj = &pieces[j];
                        // Walk pi from b around to a, then pj from a around to b (exclusive).
                        let mut ring = Vec::with_capacity(pi.len() + pj.len() - 2);
                        for t in 0..pi.len() {
                            ring.push(pi[(k + 1 + t) % pi.len()]);
                        }
                        for t in 2..pj.len() {
                            ring.push(pj[(m + t) % pj.len()]);
                        }
                        let pts: Vec<Vec2> = ring.iter().map(|&q| v[q]).collect();
                        if is_convex_ring(&pts) {
                            pieces[i] = ring;
                            pieces.remove(j);
                            merged = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if !merged {
            break;
        }
    }
    pieces
        .into_iter()
        .map(|p| p.into_iter().map(|q| v[q]).collect())
        .collect()
}

/// Convex hull (monotone chain), counter-clockwise.
pub(crate) fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if cross2(&(b - a), &(p - b)) <= 1e-15 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut vertices = vertices;
        let a = signed_area(&vertices);
        if a.abs() < 1e-12 {
            return Err(GeometryError::Degenerate);
        }
        if a < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(
                    &vertices[i],
                    &vertices[(i + 1) % n],
                    &vertices[j],
                    &vertices[(j + 1) % n],
                ) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        let area = a.abs();
        let mut c = Vec2::zeros();
        for i in 0..n {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            c += (p + q) * cross2(&p, &q);
        }
        let centroid = c / (6.0 * area);
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut s = 0.0;
        cumulative.push(0.0);
        for i in 0..n {
            s += (vertices[(i + 1) % n] - vertices[i]).norm();
            cumulative.push(s);
        }
        let parts = convex_parts(&vertices);
        Ok(Self {
            vertices,
            parts,
            cumulative,
            area,
            centroid,
        })
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self, GeometryError> {
        Self::new(points.iter().map(|&(x, y)| Vec2::new(x, y)).collect())
    }

    /// Axis-aligned rectangle centred at the origin.
    pub fn rectangle(width: f64, height: f64) -> Result<Self, GeometryError> {
        let (w, h) = (width / 2.0, height / 2.0);
        Self::from_points(&[(-w, -h), (w, -h), (w, h), (-w, h)])
    }

    /// Regular polygon approximating a circle of `radius`.
    pub fn regular(sides: usize, radius: f64) -> Result<Self, GeometryError> {
        Self::new(
            (0..sides)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / sides as f64;
                    Vec2::new(radius * a.cos(), radius * a.sin())
                })
                .collect(),
        )
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn parts(&self) -> &[Vec<Vec2>] {
        &self.parts
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn centroid(&self) -> Vec2 {
        self.centroid
    }

    pub fn perimeter(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn is_convex(&self) -> bool {
        self.parts.len() == 1
    }

    /// Copy translated so the centroid sits at the origin.
    pub fn centered(&self) -> Polygon {
        let c = self.centroid;
        Polygon::new(self.vertices.iter().map(|v| v - c).collect()).expect("translation keeps validity")
    }

    pub fn scaled(&self, k: f64) -> Polygon {
        Polygon::new(self.vertices.iter().map(|v| v * k).collect()).expect("scaling keeps validity")
    }

    /// Largest vertex distance from the body origin.
    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Triangles of an ear-clipping triangulation, counter-clockwise.
    pub fn triangles(&self) -> Vec<[Vec2; 3]> {
        triangulate(&self.vertices)
            .into_iter()
            .map(|[a, b, c]| [self.vertices[a], self.vertices[b], self.vertices[c]])
            .collect()
    }

    fn edge(&self, i: usize) -> (Vec2, Vec2) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    /// Boundary point at arc length `s` (taken modulo the perimeter).
    pub fn point_at(&self, s: f64) -> BoundaryPoint {
        let per = self.perimeter();
        let s = s.rem_euclid(per);
        let n = self.vertices.len();
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        };
        let (a, b) = self.edge(i);
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let tangent = (b - a) / len;
        let t = (s - self.cumulative[i]).clamp(0.0, len);
        BoundaryPoint {
            s,
            position: a + tangent * t,
            edge: i,
            normal: perp(&tangent),
            tangent,
        }
    }

    /// Closest boundary point to a body-frame point.
    pub fn project(&self, p: &Vec2) -> BoundaryPoint {
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for i in 0..self.vertices.len() {
            let (a, b) = self.edge(i);
            let q = closest_on_segment(p, &a, &b);
            let d = (p - q).norm_squared();
            if d < best.0 {
                best = (d, i, (q - a).norm());
            }
        }
        self.point_at(self.cumulative[best.1] + best.2)
    }

    /// Geodesic distance along the boundary between two arc-length stations.
    pub fn boundary_gap(&self, s1: f64, s2: f64) -> f64 {
        let per = self.perimeter();
        let d = (s1 - s2).rem_euclid(per);
        d.min(per - d)
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let (a, b) = self.edge(i);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Signed distance from a body-frame point to the boundary (negative
    /// inside) and the closest boundary point.
    pub fn signed_distance(&self, p: &Vec2) -> (f64, Vec2) {
        let bp = self.project(p);
        let d = (p - bp.position).norm();
        if self.contains(p) {
            (-d, bp.position)
        } else {
            (d, bp.position)
        }
    }

    pub fn footprint(&self) -> Footprint {
        Footprint::new(self.parts.clone())
    }

    /// Stable 64-bit hash of the vertex list (FNV-1a over µm-rounded coords).
    pub fn signature(&self) -> u64 {
        let mut h = Fnv::new();
        for v in &self.vertices {
            h.write_i64((v.x * 1e6).round() as i64);
            h.write_i64((v.y * 1e6).round() as i64);
        }
        h.finish()
    }
}

impl TryFrom<Vec<[f64; 2]>> for Polygon {
    type Error = GeometryError;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Polygon::new(v.into_iter().map(|[x, y]| Vec2::new(x, y)).collect())
    }
}

impl From<Polygon> for Vec<[f64; 2]> {
    fn from(p: Polygon) -> Self {
        p.vertices.iter().map(|v| [v.x, v.y]).collect()
    }
}

/// FNV-1a, used for signatures that land in persisted files.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fnv(u64);

impl Fnv {
    pub fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    pub fn write_i64(&mut self, v: i64) {
        self.write_bytes(&v.to_le_bytes());
    }
    pub fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }
    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// A union of convex parts, in whatever frame it was built in.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub parts: Vec<Vec<Vec2>>,
    pub min: Vec2,
    pub max: Vec2,
}

impl Footprint {
    pub fn new(parts: Vec<Vec<Vec2>>) -> Self {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in parts.iter().flatten() {
            min = min.inf(p);
            max = max.sup(p);
        }
        Self { parts, min, max }
    }

    /// Footprint mapped through `pose`.
    pub fn at(&self, pose: &Pose) -> Footprint {
        Footprint::new(
            self.parts
                .iter()
                .map(|part| part.iter().map(|v| pose.transform_point(v)).collect())
                .collect(),
        )
    }

    /// Conservative Minkowski sum with a disk of radius `r` (16-gon
    /// circumscribing the disk).
    pub fn inflated(&self, r: f64) -> Footprint {
        if r <= 0.0 {
            return self.clone();
        }
        const SIDES: usize = 16;
        let rc = r / (PI / SIDES as f64).cos();
        let ring: Vec<Vec2> = (0..SIDES)
            .map(|i| {
                let a = 2.0 * PI * (i as f64 + 0.5) / SIDES as f64;
                Vec2::new(rc * a.cos(), rc * a.sin())
            })
            .collect();
        Footprint::new(
            self.parts
                .iter()
                .map(|part| {
                    let pts: Vec<Vec2> = part.iter().flat_map(|v| ring.iter().map(move |d| v + d)).collect();
                    convex_hull(&pts)
                })
                .collect(),
        )
    }

    pub fn aabb_overlaps(&self, other: &Footprint, tol: f64) -> bool {
        self.min.x <= other.max.x + tol
            && other.min.x <= self.max.x + tol
            && self.min.y <= other.max.y + tol
            && other.min.y <= self.max.y + tol
    }

    /// Distance from a point to the footprint (0 inside).
    pub fn distance_to_point(&self, p: &Vec2) -> f64 {
        self.parts
            .iter()
            .map(|part| {
                let n = part.len();
                let inside = (0..n).all(|i| cross2(&(part[(i + 1) % n] - part[i]), &(p - part[i])) >= 0.0);
                if inside {
                    0.0
                } else {
                    (0..n)
                        .map(|i| super::point_segment_distance(p, &part[i], &part[(i + 1) % n]))
                        .fold(f64::INFINITY, f64::min)
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}
