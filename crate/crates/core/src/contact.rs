//! Quasi-static pushing mechanics: Coulomb contact cones, generalized
//! wrenches, the ellipsoidal limit surface and force-feasibility losses.

use serde::{Deserialize, Serialize};

use crate::geometry::{cross2, BoundaryPoint, Polygon, Twist, Vec2};
use crate::lp::{LinearProgram, LpError, Relation};

/// Loss values at or below this count as force feasible (N).
pub const FEASIBLE_LOSS: f64 = 1e-6;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContactError {
    #[error("friction direction is undefined for a zero twist")]
    ZeroTwist,
    #[error("mode has {contacts} contacts but {forces} forces")]
    DimensionMismatch { contacts: usize, forces: usize },
    #[error("mode has {contacts} contacts but {robots} robots")]
    RobotMismatch { contacts: usize, robots: usize },
    #[error("degenerate object: {0}")]
    Degenerate(&'static str),
    #[error("feasibility LP failed: {0}")]
    Lp(#[from] LpError),
}

/// Intrinsic parameters of a pushed object. Pressure is uniform over the footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectIntrinsics {
    pub mass: f64,
    pub inertia: f64,
    pub mu_contact: f64,
    pub mu_ground: f64,
}

impl ObjectIntrinsics {
    /// Uniform-density inertia about the centroid of `poly`.
    pub fn uniform(poly: &Polygon, mass: f64, mu_contact: f64, mu_ground: f64) -> Self {
        let c = poly.centroid();
        let j: f64 = poly
            .triangles()
            .iter()
            .map(|t| {
                let [a, b, d] = t.map(|v| v - c);
                let area = 0.5 * cross2(&(b - a), &(d - a));
                area / 6.0 * (a.norm_squared() + b.norm_squared() + d.norm_squared() + a.dot(&b) + b.dot(&d) + d.dot(&a))
            })
            .sum();
        Self {
            mass,
            inertia: mass * j / poly.area(),
            mu_contact,
            mu_ground,
        }
    }

    pub fn validate(&self) -> Result<(), ContactError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.mass) {
            return Err(ContactError::Degenerate("mass must be positive"));
        }
        if !ok(self.inertia) {
            return Err(ContactError::Degenerate("inertia must be positive"));
        }
        if !ok(self.mu_contact) || !ok(self.mu_ground) {
            return Err(ContactError::Degenerate("friction coefficients must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSurfaceParams {
    pub f_max: f64,
    pub m_max: f64,
}

impl LimitSurfaceParams {
    /// Diagonal of `D1 = diag(f_max, f_max, m_max)⁻¹`.
    pub fn d1(&self) -> [f64; 3] {
        [1.0 / self.f_max, 1.0 / self.f_max, 1.0 / self.m_max]
    }

    /// Diagonal of `D2 = diag(1, 1, m_max²/f_max²)`.
    pub fn d2(&self) -> [f64; 3] {
        [1.0, 1.0, (self.m_max / self.f_max).powi(2)]
    }

    /// `‖D1·q‖₂`; equals 1 on the limit surface.
    pub fn surface_norm(&self, q: &GeneralizedForce) -> f64 {
        let d = self.d1();
        let a = q.as_array();
        (0..3).map(|i| (d[i] * a[i]).powi(2)).sum::<f64>().sqrt()
    }
}

/// Contact location on an object boundary, in the object's body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    /// Arc-length station along the boundary.
    pub s: f64,
    pub position: [f64; 2],
    /// Unit normal pointing into the object.
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

impl ContactPoint {
    pub fn on(poly: &Polygon, s: f64) -> Self {
        poly.point_at(s).into()
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.position[0], self.position[1])
    }

    pub fn n(&self) -> Vec2 {
        Vec2::new(self.normal[0], self.normal[1])
    }

    pub fn t(&self) -> Vec2 {
        Vec2::new(self.tangent[0], self.tangent[1])
    }

    /// Where a disk robot of `radius` sits when touching this contact.
    pub fn robot_center(&self, radius: f64) -> Vec2 {
        self.pos() - self.n() * radius
    }
}

impl From<BoundaryPoint> for ContactPoint {
    fn from(b: BoundaryPoint) -> Self {
        Self {
            s: b.s,
            position: [b.position.x, b.position.y],
            normal: [b.normal.x, b.normal.y],
            tangent: [b.tangent.x, b.tangent.y],
        }
    }
}

/// Force at one contact, split into normal and tangential components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactForce {
    pub normal: f64,
    pub tangential: f64,
}

pub type ForceVector = Vec<ContactForce>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushingMode {
    pub contacts: Vec<ContactPoint>,
    pub robots: Vec<usize>,
    #[serde(default)]
    pub forces: Option<ForceVector>,
}

impl PushingMode {
    pub fn new(contacts: Vec<ContactPoint>, robots: Vec<usize>) -> Result<Self, ContactError> {
        if contacts.len() != robots.len() {
            return Err(ContactError::RobotMismatch {
                contacts: contacts.len(),
                robots: robots.len(),
            });
        }
        Ok(Self {
            contacts,
            robots,
            forces: None,
        })
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    /// Same contact stations, ignoring robot ids and forces.
    pub fn same_contacts(&self, other: &PushingMode) -> bool {
        self.contacts.len() == other.contacts.len()
            && self
                .contacts
                .iter()
                .zip(&other.contacts)
                .all(|(a, b)| (a.pos() - b.pos()).norm() < 1e-9)
    }

    /// Contact of a given robot, if it takes part in this mode.
    pub fn contact_of(&self, robot: usize) -> Option<&ContactPoint> {
        self.robots.iter().position(|&r| r == robot).map(|i| &self.contacts[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneralizedForce {
    pub fx: f64,
    pub fy: f64,
    pub chi: f64,
}

impl GeneralizedForce {
    pub fn new(fx: f64, fy: f64, chi: f64) -> Self {
        Self { fx, fy, chi }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.fx, self.fy, self.chi]
    }

    pub fn dot(&self, p: &Twist) -> f64 {
        self.fx * p.vx + self.fy * p.vy + self.chi * p.omega
    }

    pub fn l1(&self) -> f64 {
        self.fx.abs() + self.fy.abs() + self.chi.abs()
    }
}

/// Disk-shaped pushing robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub radius: f64,
    pub f_max: f64,
    pub v_max: f64,
    pub omega_max: f64,
    #[serde(default = "RobotSpec::default_mass")]
    pub mass: f64,
}

impl RobotSpec {
    fn default_mass() -> f64 {
        10.0
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
}

impl Default for RobotSpec {
    fn default() -> Self {
        Self {
            radius: 0.15,
            f_max: 100.0,
            v_max: 1.0,
            omega_max: 2.0,
            mass: 10.0,
        }
    }
}

// Degree-5 rule on the reference triangle: (barycentric a, b, c, weight).
const GAUSS7: [(f64, f64, f64, f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132_394_152_788_506_2;
    const W2: f64 = 0.125_939_180_544_827_2;
    [
        (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, W0),
        (A1, B1, B1, W1),
        (B1, A1, B1, W1),
        (B1, B1, A1, W1),
        (A2, B2, B2, W2),
        (B2, A2, B2, W2),
        (B2, B2, A2, W2),
    ]
};

fn gauss_triangle(a: Vec2, b: Vec2, c: Vec2, depth: u32, f: &dyn Fn(Vec2) -> f64) -> f64 {
    if depth > 0 {
        let (ab, bc, ca) = ((a + b) / 2.0, (b + c) / 2.0, (c + a) / 2.0);
        return gauss_triangle(a, ab, ca, depth - 1, f)
            + gauss_triangle(ab, b, bc, depth - 1, f)
            + gauss_triangle(ca, bc, c, depth - 1, f)
            + gauss_triangle(ab, bc, ca, depth - 1, f);
    }
    let area = 0.5 * cross2(&(b - a), &(c - a)).abs();
    GAUSS7
        .iter()
        .map(|&(l0, l1, l2, w)| w * f(a * l0 + b * l1 + c * l2))
        .sum::<f64>()
        * area
}

/// `∫_Ω ‖r − r_com‖ dA` by triangulation and subdivided 7-point Gauss.
pub fn polar_moment_of_distance(poly: &Polygon) -> f64 {
    let c = poly.centroid();
    // The integrand has a kink at the centroid, so a few levels of
    // subdivision are needed for ~1e-7 relative accuracy.
    poly.triangles()
        .iter()
        .map(|t| gauss_triangle(t[0], t[1], t[2], 5, &|p: Vec2| (p - c).norm()))
        .sum()
}

pub fn limit_surface_params(poly: &Polygon, intr: &ObjectIntrinsics, g: f64) -> Result<LimitSurfaceParams, ContactError> {
    intr.validate()?;
    let area = poly.area();
    if area <= 1e-12 {
        return Err(ContactError::Degenerate("zero-area footprint"));
    }
    let f_max = intr.mu_ground * intr.mass * g;
    let m_max = intr.mu_ground * g * intr.mass / area * polar_moment_of_distance(poly);
    Ok(LimitSurfaceParams { f_max, m_max })
}

/// Ground friction wrench opposing a body twist: `−D2·p / ‖D1·D2·p‖`.
pub fn friction_wrench(p: &Twist, lsp: &LimitSurfaceParams) -> Result<GeneralizedForce, ContactError> {
    if p.is_zero() || !p.is_finite() || p.norm_with(1.0) < 1e-300 {
        return Err(ContactError::ZeroTwist);
    }
    let d1 = lsp.d1();
    let d2 = lsp.d2();
    let v = p.as_array();
    let d2p = [d2[0] * v[0], d2[1] * v[1], d2[2] * v[2]];
    let norm = (0..3).map(|i| (d1[i] * d2p[i]).powi(2)).sum::<f64>().sqrt();
    Ok(GeneralizedForce::new(-d2p[0] / norm, -d2p[1] / norm, -d2p[2] / norm))
}

/// Wrench of a unit force `f` applied at `c`, relative to `com`.
fn unit_wrench(c: &Vec2, f: &Vec2, com: &Vec2) -> [f64; 3] {
    [f.x, f.y, cross2(&(c - com), f)]
}

/// Columns of `J`: per contact, the wrench of a unit normal force then of a
/// unit tangential force.
pub fn jacobian(contacts: &[ContactPoint], com: &Vec2) -> Vec<[f64; 3]> {
    contacts
        .iter()
        .flat_map(|c| [unit_wrench(&c.pos(), &c.n(), com), unit_wrench(&c.pos(), &c.t(), com)])
        .collect()
}

pub fn wrench_from_forces(mode: &PushingMode, forces: &[ContactForce], com: &Vec2) -> Result<GeneralizedForce, ContactError> {
    if mode.contacts.len() != forces.len() {
        return Err(ContactError::DimensionMismatch {
            contacts: mode.contacts.len(),
            forces: forces.len(),
        });
    }
    let mut q = [0.0; 3];
    for (c, f) in mode.contacts.iter().zip(forces) {
        let force = c.n() * f.normal + c.t() * f.tangential;
        let w = unit_wrench(&c.pos(), &force, com);
        for k in 0..3 {
            q[k] += w[k];
        }
    }
    Ok(GeneralizedForce::new(q[0], q[1], q[2]))
}

/// Minimum L1 residual `‖J·F − w‖₁` over cone-constrained contact forces,
/// with per-contact normal force caps.
pub fn min_residual(contacts: &[ContactPoint], caps: &[f64], mu: f64, target: &GeneralizedForce, com: &Vec2) -> Result<(f64, ForceVector), ContactError> {
    min_residual_with_floor(contacts, caps, 0.0, mu, target, com)
}

/// As [`min_residual`], but every contact must carry a normal force of at
/// least `floor · cap`.
pub fn min_residual_with_floor(
    contacts: &[ContactPoint],
    caps: &[f64],
    floor: f64,
    mu: f64,
    target: &GeneralizedForce,
    com: &Vec2,
) -> Result<(f64, ForceVector), ContactError> {
    if contacts.len() != caps.len() {
        return Err(ContactError::RobotMismatch {
            contacts: contacts.len(),
            robots: caps.len(),
        });
    }
    let n = contacts.len();
    // Per contact: weights on the cone edges n + μt and n − μt; then r⁺, r⁻.
    let nv = 2 * n + 6;
    let mut lp = LinearProgram::new(nv);
    let mut obj = vec![0.0; nv];
    for c in obj.iter_mut().skip(2 * n) {
        *c = 1.0;
    }
    lp.set_objective(obj);
    let edges: Vec<[f64; 3]> = contacts
        .iter()
        .flat_map(|c| {
            let (p, nn, t) = (c.pos(), c.n(), c.t());
            [unit_wrench(&p, &(nn + t * mu), com), unit_wrench(&p, &(nn - t * mu), com)]
        })
        .collect();
    let w = target.as_array();
    for k in 0..3 {
        let mut row = vec![0.0; nv];
        for (j, e) in edges.iter().enumerate() {
            row[j] = e[k];
        }
        // J·F − w + r⁺ − r⁻ = 0
        row[2 * n + k] = 1.0;
        row[2 * n + 3 + k] = -1.0;
        lp.add_constraint(row, Relation::Eq, w[k]);
    }
    for (i, &cap) in caps.iter().enumerate() {
        let mut row = vec![0.0; nv];
        row[2 * i] = 1.0;
        row[2 * i + 1] = 1.0;
        if floor > 0.0 && cap > 0.0 {
            lp.add_constraint(row.clone(), Relation::Ge, floor * cap);
        }
        lp.add_constraint(row, Relation::Le, cap.max(0.0));
    }
    let sol = lp.solve()?;
    let forces = (0..n)
        .map(|i| {
            let (a, b) = (sol.x[2 * i], sol.x[2 * i + 1]);
            ContactForce {
                normal: a + b,
                tangential: mu * (a - b),
            }
        })
        .collect();
    Ok((sol.objective.max(0.0), forces))
}

/// `min_F ‖J·F + q_μ(p)‖₁` subject to the contact cones and robot force limits.
pub fn force_feasibility_loss(
    mode: &PushingMode,
    p: &Twist,
    lsp: &LimitSurfaceParams,
    mu_contact: f64,
    robots: &[RobotSpec],
) -> Result<(f64, ForceVector), ContactError> {
    if mode.contacts.len() != robots.len() {
        return Err(ContactError::RobotMismatch {
            contacts: mode.contacts.len(),
            robots: robots.len(),
        });
    }
    let q = friction_wrench(p, lsp)?;
    let target = GeneralizedForce::new(-q.fx, -q.fy, -q.chi);
    let caps: Vec<f64> = robots.iter().map(|r| r.f_max).collect();
    min_residual(&mode.contacts, &caps, mu_contact, &target, &Vec2::zeros())
}

/// The target twist (weight 4) plus its linear part rotated ±15° and its
/// angular rate scaled by 1 ± 0.25 (weight 1 each).
pub fn default_basis(p: &Twist) -> Vec<(Twist, f64)> {
    let yaw = 15f64.to_radians();
    vec![
        (*p, 4.0),
        (p.rotate_linear(yaw), 1.0),
        (p.rotate_linear(-yaw), 1.0),
        (Twist::new(p.vx, p.vy, p.omega * 1.25), 1.0),
        (Twist::new(p.vx, p.vy, p.omega * 0.75), 1.0),
    ]
}

pub fn multi_directional_loss(
    mode: &PushingMode,
    basis: &[(Twist, f64)],
    lsp: &LimitSurfaceParams,
    mu_contact: f64,
    robots: &[RobotSpec],
) -> Result<f64, ContactError> {
    multi_directional_loss_with_floor(mode, basis, lsp, mu_contact, robots, 0.0)
}

/// Multi-directional loss where each robot must push with at least
/// `floor · f_max`.
pub fn multi_directional_loss_with_floor(
    mode: &PushingMode,
    basis: &[(Twist, f64)],
    lsp: &LimitSurfaceParams,
    mu_contact: f64,
    robots: &[RobotSpec],
    floor: f64,
) -> Result<f64, ContactError> {
    if mode.contacts.len() != robots.len() {
        return Err(ContactError::RobotMismatch {
            contacts: mode.contacts.len(),
            robots: robots.len(),
        });
    }
    let caps: Vec<f64> = robots.iter().map(|r| r.f_max).collect();
    let mut total = 0.0;
    for (d, w) in basis {
        let q = friction_wrench(d, lsp)?;
        let target = GeneralizedForce::new(-q.fx, -q.fy, -q.chi);
        total += w * min_residual_with_floor(&mode.contacts, &caps, floor, mu_contact, &target, &Vec2::zeros())?.0;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Polygon {
        Polygon::rectangle(1.0, 1.0).unwrap()
    }

    fn intr() -> ObjectIntrinsics {
        ObjectIntrinsics::uniform(&square(), 10.0, 0.2, 0.8)
    }

    fn lsp() -> LimitSurfaceParams {
        limit_surface_params(&square(), &intr(), GRAVITY).unwrap()
    }

    fn contact(x: f64, y: f64, nx: f64, ny: f64) -> ContactPoint {
        ContactPoint {
            s: 0.0,
            position: [x, y],
            normal: [nx, ny],
            tangent: [-ny, nx],
        }
    }

    fn mode(cs: Vec<ContactPoint>) -> PushingMode {
        let ids = (0..cs.len()).collect();
        PushingMode::new(cs, ids).unwrap()
    }

    #[test]
    fn square_limit_surface() {
        let l = lsp();
        assert!((l.f_max - 78.48).abs() < 1e-9);
        // ∫‖r‖dA over the unit square is (√2 + ln(1 + √2)) / 6.
        let exact = (std::f64::consts::SQRT_2 + (1.0 + std::f64::consts::SQRT_2).ln()) / 6.0;
        assert!((l.m_max - 78.48 * exact).abs() / l.m_max < 1e-5, "{}", l.m_max);
        assert!((l.m_max - 30.03).abs() < 0.01);
        let big = limit_surface_params(&square().scaled(2.0), &intr(), GRAVITY).unwrap();
        assert!((big.m_max - 2.0 * l.m_max).abs() < 1e-6);
        assert_eq!(big.f_max, l.f_max);
    }

    #[test]
    fn distance_moment_matches_monte_carlo() {
        let poly = Polygon::from_points(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 0.4), (0.0, 1.5)]).unwrap();
        let c = poly.centroid();
        let (lo, hi) = (Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.5));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let p = Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if poly.contains(&p) {
                sum += (p - c).norm();
            }
        }
        let mc = sum / n as f64 * 3.0;
        let quad = polar_moment_of_distance(&poly);
        assert!((mc - quad).abs() / quad < 0.005, "{mc} vs {quad}");
    }

    #[test]
    fn inertia_of_square() {
        // m(a² + b²)/12
        assert!((intr().inertia - 10.0 * 2.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn friction_wrench_axes() {
        let l = lsp();
        let q = friction_wrench(&Twist::new(1.0, 0.0, 0.0), &l).unwrap();
        assert!((q.fx + l.f_max).abs() < 1e-9 && q.fy == 0.0 && q.chi == 0.0);
        let q = friction_wrench(&Twist::new(0.0, 0.0, 1.0), &l).unwrap();
        assert!((q.chi + l.m_max).abs() < 1e-9);
        assert_eq!(friction_wrench(&Twist::ZERO, &l), Err(ContactError::ZeroTwist));
    }

    #[test]
    fn wrench_examples() {
        let m = mode(vec![contact(-0.5, 0.0, 1.0, 0.0)]);
        let zero = wrench_from_forces(&m, &[ContactForce::default()], &Vec2::zeros()).unwrap();
        assert_eq!(zero, GeneralizedForce::default());
        let f = [ContactForce { normal: 10.0, tangential: 0.0 }];
        assert_eq!(wrench_from_forces(&m, &f, &Vec2::zeros()).unwrap(), GeneralizedForce::new(10.0, 0.0, 0.0));
        let m = mode(vec![contact(-0.5, 0.2, 1.0, 0.0)]);
        let w = wrench_from_forces(&m, &f, &Vec2::zeros()).unwrap();
        assert!((w.chi + 2.0).abs() < 1e-12);
        assert!(matches!(
            wrench_from_forces(&m, &[], &Vec2::zeros()),
            Err(ContactError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn wrench_equals_jacobian_product() {
        let cs = vec![contact(-0.5, 0.3, 1.0, 0.0), contact(0.2, -0.5, 0.0, 1.0)];
        let m = mode(cs.clone());
        let f = [ContactForce { normal: 3.0, tangential: -1.0 }, ContactForce { normal: 7.0, tangential: 0.5 }];
        let j = jacobian(&cs, &Vec2::zeros());
        let flat = [3.0, -1.0, 7.0, 0.5];
        let mut jf = [0.0; 3];
        for (col, x) in j.iter().zip(flat) {
            for k in 0..3 {
                jf[k] += col[k] * x;
            }
        }
        let w = wrench_from_forces(&m, &f, &Vec2::zeros()).unwrap();
        for k in 0..3 {
            assert!((w.as_array()[k] - jf[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn feasibility_examples() {
        let l = lsp();
        let robots = [RobotSpec::default(); 2];
        let two = mode(vec![contact(-0.5, 0.25, 1.0, 0.0), contact(-0.5, -0.25, 1.0, 0.0)]);
        let (loss, forces) = force_feasibility_loss(&two, &Twist::new(1.0, 0.0, 0.0), &l, 0.2, &robots).unwrap();
        assert!(loss < FEASIBLE_LOSS, "{loss}");
        let w = wrench_from_forces(&two, &forces, &Vec2::zeros()).unwrap();
        assert!((w.fx - l.f_max).abs() < 1e-6);

        let one = mode(vec![contact(-0.5, 0.0, 1.0, 0.0)]);
        let (loss, _) = force_feasibility_loss(&one, &Twist::new(-1.0, 0.0, 0.0), &l, 0.2, &robots[..1]).unwrap();
        assert!((loss - l.f_max).abs() < 1e-6);

        let weak = [RobotSpec { f_max: 0.0, ..RobotSpec::default() }; 2];
        let p = Twist::new(0.3, -0.2, 0.5);
        let (loss, _) = force_feasibility_loss(&two, &p, &l, 0.2, &weak).unwrap();
        assert!((loss - friction_wrench(&p, &l).unwrap().l1()).abs() < 1e-9);
    }

    #[test]
    fn multi_directional_examples() {
        let l = lsp();
        let robots = [RobotSpec::default(); 2];
        let two = mode(vec![contact(-0.5, 0.25, 1.0, 0.0), contact(-0.5, -0.25, 1.0, 0.0)]);
        let p = Twist::new(1.0, 0.0, 0.0);
        let single = multi_directional_loss(&two, &[(p, 1.0)], &l, 0.2, &robots).unwrap();
        let direct = force_feasibility_loss(&two, &p, &l, 0.2, &robots).unwrap().0;
        assert_eq!(single, direct);

        let weak = [RobotSpec { f_max: 0.0, ..RobotSpec::default() }; 2];
        let basis = default_basis(&Twist::new(0.5, 0.1, 0.3));
        let expect: f64 = basis.iter().map(|(d, w)| w * friction_wrench(d, &l).unwrap().l1()).sum();
        let got = multi_directional_loss(&two, &basis, &l, 0.2, &weak).unwrap();
        assert!((got - expect).abs() < 1e-9);

        // Symmetric edge push beats a single corner contact.
        let basis = default_basis(&p);
        let corner = mode(vec![contact(-0.5, -0.5, 1.0, 0.0), contact(-0.5, -0.5 + 0.3, 1.0, 0.0)]);
        let edge = multi_directional_loss(&two, &basis, &l, 0.2, &robots).unwrap();
        let off = multi_directional_loss(&corner, &basis, &l, 0.2, &robots).unwrap();
        let lone = multi_directional_loss(&mode(vec![contact(-0.5, -0.5, 1.0, 0.0)]), &basis, &l, 0.2, &robots[..1]).unwrap();
        assert!(edge < off && edge < lone, "{edge} {off} {lone}");
    }

    #[test]
    fn random_twists_lie_on_limit_surface() {
        let l = lsp();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = Twist::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0));
            let q = friction_wrench(&p, &l).unwrap();
            assert!((l.surface_norm(&q) - 1.0).abs() < 1e-9);
            assert!(q.dot(&p) < 0.0);
        }
    }
}
