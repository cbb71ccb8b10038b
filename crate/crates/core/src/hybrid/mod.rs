//! Keyframe-guided best-first search over hybrid plans.
//!
//! A plan alternates keyframe poses and pushing modes. The search repeatedly
//! takes the cheapest open plan, finds its first stage without a mode and
//! tries, in order: splitting a colliding arc at a guide pose, the plan
//! library, the proposer, direct mode generation, iterative keyframe
//! sampling, and finally a midpoint split (or, for short arcs, the
//! primitive-sequence approximation).

mod approx;
mod library;

pub use approx::{decompose_twist, endpoint_gap, seq_arc_approx, trace_deviation, ApproxError};
pub use library::{canonical, LibraryProposer, NoProposer, PlanEntry, PlanKey, PlanLibrary, Proposer, KEY_QUANTUM};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::contact::{force_feasibility_loss, PushingMode, RobotSpec, FEASIBLE_LOSS};
use crate::geometry::{arc_from_poses, collide_with_tolerance, ArcMotion, Pose, COLLISION_TOLERANCE};
use crate::modes::{
    generate_mode_on_arc, mode_sufficient, practical_feasibility, ModeLibrary, Primitive, PushContext, DEFAULT_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub pose: Pose,
    /// Mode pushing from this keyframe to the next; `None` when unassigned
    /// and on the last keyframe.
    pub mode: Option<PushingMode>,
}

impl Keyframe {
    pub fn bare(pose: Pose) -> Self {
        Self { pose, mode: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridPlan {
    pub stages: Vec<Keyframe>,
    pub cost: f64,
}

/// Arcs shorter than this under the travel metric need no mode.
const NEGLIGIBLE_TRAVEL: f64 = 1e-6;

impl HybridPlan {
    pub fn start(&self) -> Pose {
        self.stages[0].pose
    }

    pub fn goal(&self) -> Pose {
        self.stages.last().expect("non-empty plan").pose
    }

    pub fn arcs(&self) -> Vec<ArcMotion> {
        arcs_of(&self.stages)
    }

    pub fn is_complete(&self) -> bool {
        first_open_stage(&self.stages, 1.0).is_none()
    }

    /// Distinct consecutive modes.
    pub fn mode_count(&self) -> usize {
        let mut count = 0;
        let mut prev: Option<&PushingMode> = None;
        for m in self.stages.iter().filter_map(|k| k.mode.as_ref()) {
            if !prev.is_some_and(|p| same_mode(p, m)) {
                count += 1;
            }
            prev = Some(m);
        }
        count
    }

    pub fn switch_count(&self) -> usize {
        self.mode_count().saturating_sub(1)
    }
}

fn same_mode(a: &PushingMode, b: &PushingMode) -> bool {
    a.robots == b.robots && a.same_contacts(b)
}

fn arcs_of(stages: &[Keyframe]) -> Vec<ArcMotion> {
    stages.windows(2).map(|w| arc_from_poses(&w[0].pose, &w[1].pose)).collect()
}

/// Index of the first stage that moves the object but has no mode.
fn first_open_stage(stages: &[Keyframe], rho: f64) -> Option<usize> {
    (0..stages.len().saturating_sub(1)).find(|&l| {
        stages[l].mode.is_none() && arc_from_poses(&stages[l].pose, &stages[l + 1].pose).travel(rho) > NEGLIGIBLE_TRAVEL
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub w_s: f64,
    pub w_n: f64,
    /// Travel below which an arc is approximated by primitives (m).
    pub epsilon: f64,
    pub h_max: usize,
    /// Initial keyframe perturbation as a share of the arc travel.
    pub sigma0: f64,
    pub sampling_rounds: usize,
    pub node_cap: usize,
    /// Nominal object speed while pushing (m/s).
    pub push_speed: f64,
    /// Loss evaluations allowed per mode search.
    pub mode_budget: usize,
    /// Extra obstacle clearance required along arcs (m).
    pub clearance: f64,
    /// Candidate twists tried when certifying mode sufficiency.
    pub sufficiency_samples: usize,
    /// Trade-off between duration and control effort in the overall
    /// objective; carried for reporting.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            w_s: 1.0,
            w_n: 1.0,
            epsilon: 0.3,
            h_max: 4,
            sigma0: 0.1,
            sampling_rounds: 3,
            node_cap: 500,
            push_speed: 0.3,
            mode_budget: DEFAULT_BUDGET,
            clearance: 0.0,
            sufficiency_samples: 30,
            alpha: 1.0,
            seed: 0,
        }
    }
}

/// Time for the robots to walk the boundary from their contacts in `a` to
/// those in `b`; robots present in only one mode are not counted.
pub fn switch_time(ctx: &PushContext, a: &PushingMode, b: &PushingMode) -> f64 {
    a.robots
        .iter()
        .zip(&a.contacts)
        .filter_map(|(r, ca)| {
            let cb = b.contact_of(*r)?;
            Some(ctx.poly.boundary_gap(ca.s, cb.s) / ctx.team[*r].v_max)
        })
        .fold(0.0, f64::max)
}

/// Stage costs: multi-directional loss of each assigned mode, weighted
/// switch times between consecutive modes and weighted travel time.
pub fn plan_cost(ctx: &PushContext, stages: &[Keyframe], cfg: &SearchConfig) -> f64 {
    let rho = ctx.poly.bounding_radius();
    let mut total = 0.0;
    for (l, arc) in arcs_of(stages).iter().enumerate() {
        let moves = arc.travel(rho) > NEGLIGIBLE_TRAVEL;
        if let (Some(m), true) = (&stages[l].mode, moves) {
            total += ctx.plan_loss(m, &arc.unit_twist());
        }
        if let (Some(a), Some(b)) = (&stages[l].mode, stages.get(l + 1).and_then(|k| k.mode.as_ref())) {
            total += cfg.w_s * switch_time(ctx, a, b);
        }
        total += cfg.w_n * arc.travel(rho) / cfg.push_speed;
    }
    total
}

/// Caches shared across searches.
#[derive(Debug, Clone, Default)]
pub struct Libraries {
    pub plans: PlanLibrary,
    pub modes: ModeLibrary,
    /// Verified primitive sets by team key.
    pub primitives: BTreeMap<u64, Vec<Primitive>>,
}

impl Libraries {
    /// Mode-sufficiency primitives for the context, computed once.
    pub fn primitives_for(&mut self, ctx: &PushContext, cfg: &SearchConfig) -> &[Primitive] {
        self.primitives
            .entry(ctx.team_key())
            .or_insert_with(|| mode_sufficient(ctx, cfg.sufficiency_samples, cfg.seed).1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("node cap reached after {0} expansions")]
    NodeCap(usize),
    #[error("no open plans left after {0} expansions")]
    Exhausted(usize),
    #[error("empty guide path")]
    EmptyGuide,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub expansions: usize,
    /// Costs of every complete plan generated.
    pub complete_costs: Vec<f64>,
}

struct Node {
    cost: f64,
    stages: Vec<Keyframe>,
    order: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Reversed so the heap pops the cheapest, then fewest stages, then
    /// oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.stages.len().cmp(&self.stages.len()))
            .then(other.order.cmp(&self.order))
    }
}

/// Searches a complete plan from `guide[0]` to the last guide pose. The guide
/// is a collision-free pose sequence used to anchor inserted keyframes.
pub fn search(
    ctx: &PushContext,
    guide: &[Pose],
    libs: &mut Libraries,
    proposer: &dyn Proposer,
    cfg: &SearchConfig,
) -> Result<HybridPlan, SearchError> {
    search_traced(ctx, guide, libs, proposer, cfg).0
}

pub fn search_traced(
    ctx: &PushContext,
    guide: &[Pose],
    libs: &mut Libraries,
    proposer: &dyn Proposer,
    cfg: &SearchConfig,
) -> (Result<HybridPlan, SearchError>, SearchStats) {
    let mut stats = SearchStats::default();
    let (Some(&start), Some(&goal)) = (guide.first(), guide.last()) else {
        return (Err(SearchError::EmptyGuide), stats);
    };
    let mut guide_poses: Vec<Pose> = Vec::with_capacity(guide.len());
    for p in guide {
        if guide_poses.last() != Some(p) {
            guide_poses.push(*p);
        }
    }
    let mut s = Searcher {
        ctx,
        cfg,
        proposer,
        guide: guide_poses,
        rho: ctx.poly.bounding_radius(),
    };
    let root = vec![Keyframe::bare(start), Keyframe::bare(goal)];
    let mut open = BinaryHeap::new();
    let mut order = 0u64;
    open.push(Node {
        cost: plan_cost(ctx, &root, cfg),
        stages: root,
        order,
    });
    while let Some(node) = open.pop() {
        if first_open_stage(&node.stages, s.rho).is_none() {
            libs.plans.insert(ctx.team_key(), ctx.team.len(), &node.stages);
            return (
                Ok(HybridPlan {
                    stages: node.stages,
                    cost: node.cost,
                }),
                stats,
            );
        }
        if stats.expansions >= cfg.node_cap {
            return (Err(SearchError::NodeCap(stats.expansions)), stats);
        }
        stats.expansions += 1;
        let seed = cfg.seed ^ 0x2545_f491_4f6c_dd1du64.wrapping_mul(stats.expansions as u64);
        for stages in s.expand(&node.stages, libs, seed) {
            order += 1;
            let cost = plan_cost(ctx, &stages, cfg);
            if first_open_stage(&stages, s.rho).is_none() {
                stats.complete_costs.push(cost);
            }
            open.push(Node { cost, stages, order });
        }
    }
    (Err(SearchError::Exhausted(stats.expansions)), stats)
}

struct Searcher<'a> {
    ctx: &'a PushContext,
    cfg: &'a SearchConfig,
    proposer: &'a dyn Proposer,
    guide: Vec<Pose>,
    rho: f64,
}

impl Searcher<'_> {
    fn expand(&mut self, stages: &[Keyframe], libs: &mut Libraries, seed: u64) -> Vec<Vec<Keyframe>> {
        let Some(l) = first_open_stage(stages, self.rho) else {
            return Vec::new();
        };
        let (a, b) = (stages[l].pose, stages[l + 1].pose);
        let arc = arc_from_poses(&a, &b);
        let insert = |pose: Pose| {
            let mut out = stages.to_vec();
            out.insert(l + 1, Keyframe::bare(pose));
            out
        };
        let splice = |frag: Vec<Keyframe>| {
            let mut out = stages[..l].to_vec();
            out.extend(frag);
            out.extend_from_slice(&stages[l + 1..]);
            out
        };
        if !arc_clear(self.ctx, &arc, self.cfg.clearance) {
            return self.guide_between(&a, &b).map(insert).into_iter().collect();
        }
        let key = self.ctx.team_key();
        let n = self.ctx.team.len();
        if let Some(frag) = libs.plans.lookup(key, n, &a, &b) {
            if let Some(frag) = verify_fragment(self.ctx, frag, self.cfg) {
                return vec![splice(open_ended(frag))];
            }
        }
        for frag in self.proposer.propose(&libs.plans, key, n, &a, &b) {
            if let Some(frag) = verify_fragment(self.ctx, frag, self.cfg) {
                return vec![splice(open_ended(frag))];
            }
        }
        if let Some(mode) = mode_for_arc(self.ctx, &arc, &mut libs.modes, self.cfg, seed) {
            let mut out = stages.to_vec();
            out[l].mode = Some(mode);
            return vec![out];
        }
        if let Some(frag) = iter_samp(self.ctx, &a, &b, &mut libs.modes, self.cfg, seed) {
            return vec![splice(open_ended(frag))];
        }
        if arc.travel(self.rho) < self.cfg.epsilon {
            let prims = libs.primitives_for(self.ctx, self.cfg).to_vec();
            return match seq_arc_approx(&arc, &prims) {
                Ok(frag) => vec![splice(approx_fragment(self.ctx, frag, &b))],
                Err(_) => Vec::new(),
            };
        }
        let mid = self.guide_between(&a, &b).unwrap_or_else(|| arc.pose_at_fraction(0.5));
        vec![insert(mid)]
    }

    /// Guide pose halfway by index between the guide poses nearest `a` and
    /// `b`, if one lies strictly between them.
    fn guide_between(&self, a: &Pose, b: &Pose) -> Option<Pose> {
        let nearest = |p: &Pose| {
            (0..self.guide.len())
                .min_by(|&i, &j| {
                    let d = |k: usize| self.guide[k].distance(p) + self.rho * self.guide[k].angle_to(p);
                    d(i).total_cmp(&d(j))
                })
                .expect("non-empty guide")
        };
        let (i, j) = (nearest(a), nearest(b));
        let (lo, hi) = (i.min(j), i.max(j));
        (hi - lo >= 2).then(|| self.guide[(lo + hi) / 2])
    }
}

/// Drops a fragment's terminal keyframe so it can be spliced in front of the
/// existing next keyframe.
fn open_ended(mut frag: Vec<Keyframe>) -> Vec<Keyframe> {
    frag.pop();
    frag
}

/// A primitive sequence ends near, not at, the target; a remaining gap
/// becomes its own open stage.
fn approx_fragment(ctx: &PushContext, mut frag: Vec<Keyframe>, target: &Pose) -> Vec<Keyframe> {
    let end = frag.pop().expect("terminal keyframe");
    let gap = arc_from_poses(&end.pose, target).travel(ctx.poly.bounding_radius());
    if gap > NEGLIGIBLE_TRAVEL {
        frag.push(end);
    }
    // Modes were verified for the primitive twists; refresh their forces for
    // the stages they now drive.
    let last = frag.len();
    for l in 0..last {
        let next = if l + 1 < last { frag[l + 1].pose } else { *target };
        let arc = arc_from_poses(&frag[l].pose, &next);
        if let Some(m) = frag[l].mode.take() {
            frag[l].mode = Some(with_forces(ctx, m.clone(), &arc).unwrap_or(m));
        }
    }
    frag
}

/// Object footprint along the arc keeps `clearance` from every obstacle.
pub fn arc_clear(ctx: &PushContext, arc: &ArcMotion, clearance: f64) -> bool {
    let fp = ctx.poly.footprint().inflated(clearance);
    let obstacles: Vec<_> = ctx.obstacles.iter().map(|o| o.footprint()).collect();
    arc.sample(0.05, ctx.poly.bounding_radius()).iter().all(|p| {
        let placed = fp.at(p);
        !obstacles.iter().any(|o| collide_with_tolerance(&placed, o, COLLISION_TOLERANCE))
    })
}

/// The mode with forces solved for `arc`, if it is force feasible there.
fn with_forces(ctx: &PushContext, mut mode: PushingMode, arc: &ArcMotion) -> Option<PushingMode> {
    if mode.robots.iter().any(|&r| r >= ctx.team.len()) {
        return None;
    }
    let robots: Vec<RobotSpec> = mode.robots.iter().map(|&i| ctx.team[i]).collect();
    let (loss, forces) =
        force_feasibility_loss(&mode, &arc.unit_twist(), &ctx.lsp, ctx.intr.mu_contact, &robots).ok()?;
    (loss <= FEASIBLE_LOSS).then(|| {
        mode.forces = Some(forces);
        mode
    })
}

/// Every moving stage of the fragment has a mode that is force feasible and
/// tracks its arc, and every arc is clear.
fn verify_fragment(ctx: &PushContext, mut frag: Vec<Keyframe>, cfg: &SearchConfig) -> Option<Vec<Keyframe>> {
    if frag.len() < 2 {
        return None;
    }
    let rho = ctx.poly.bounding_radius();
    for l in 0..frag.len() - 1 {
        let arc = arc_from_poses(&frag[l].pose, &frag[l + 1].pose);
        if arc.travel(rho) <= NEGLIGIBLE_TRAVEL {
            continue;
        }
        let mode = with_forces(ctx, frag[l].mode.clone()?, &arc)?;
        if !arc_clear(ctx, &arc, cfg.clearance) || !practical_feasibility(ctx, &mode, &arc) {
            return None;
        }
        frag[l].mode = Some(mode);
    }
    Some(frag)
}

/// Library mode for the arc's twist if it still verifies, else a freshly
/// generated one, which is then cached.
fn mode_for_arc(
    ctx: &PushContext,
    arc: &ArcMotion,
    modes: &mut ModeLibrary,
    cfg: &SearchConfig,
    seed: u64,
) -> Option<PushingMode> {
    let p = arc.unit_twist();
    let key = ctx.team_key();
    if let Some(m) = modes.query(key, &p).cloned() {
        if let Some(m) = with_forces(ctx, m, arc) {
            if practical_feasibility(ctx, &m, arc) {
                return Some(m);
            }
        }
    }
    let cand = generate_mode_on_arc(ctx, arc, cfg.mode_budget, seed)?;
    modes.insert(key, &p, cand.mode.clone(), cand.tracking_error);
    Some(cand.mode)
}

/// Splits the arc `a → b` into `h` sub-arcs for `h = 2..=h_max`, jittering
/// the inner keyframes with a spread that shrinks by 0.7 per round, until
/// every sub-arc gets a mode. Returns the keyframes including `b`.
pub fn iter_samp(
    ctx: &PushContext,
    a: &Pose,
    b: &Pose,
    modes: &mut ModeLibrary,
    cfg: &SearchConfig,
    seed: u64,
) -> Option<Vec<Keyframe>> {
    let arc = arc_from_poses(a, b);
    let rho = ctx.poly.bounding_radius();
    let travel = arc.travel(rho);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    for h in 2..=cfg.h_max {
        for r in 0..cfg.sampling_rounds {
            let sigma = cfg.sigma0 * travel * 0.7f64.powi(r as i32);
            let mut poses = vec![*a];
            for i in 1..h {
                let base = arc.pose_at_fraction(i as f64 / h as f64);
                let [dx, dy, dpsi]: [f64; 3] = std::array::from_fn(|_| unit.sample(&mut rng) * sigma);
                poses.push(Pose::new(base.x + dx, base.y + dy, base.psi + dpsi / rho));
            }
            poses.push(*b);
            let mut frag: Vec<Keyframe> = Vec::with_capacity(h + 1);
            let mut ok = true;
            for (k, w) in poses.windows(2).enumerate() {
                let sub = arc_from_poses(&w[0], &w[1]);
                let mode = if arc_clear(ctx, &sub, cfg.clearance) {
                    mode_for_arc(ctx, &sub, modes, cfg, seed.wrapping_add((h * 131 + r * 17 + k) as u64))
                } else {
                    None
                };
                match mode {
                    Some(m) => frag.push(Keyframe { pose: w[0], mode: Some(m) }),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                frag.push(Keyframe::bare(*b));
                return Some(frag);
            }
        }
    }
    None
}

/// Recomputes a plan's stage losses; every moving stage must be force
/// feasible and every arc clear.
pub fn check_plan(ctx: &PushContext, plan: &HybridPlan, cfg: &SearchConfig) -> bool {
    let rho = ctx.poly.bounding_radius();
    plan.stages.windows(2).all(|w| {
        let arc = arc_from_poses(&w[0].pose, &w[1].pose);
        if arc.travel(rho) <= NEGLIGIBLE_TRAVEL {
            return true;
        }
        let Some(m) = &w[0].mode else { return false };
        ctx.is_force_feasible(m, &arc.unit_twist()) && arc_clear(ctx, &arc, cfg.clearance)
    })
}

#[cfg(test)]
mod tests;
