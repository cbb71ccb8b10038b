//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::time::Instant;

use copush_core::contact::{
    force_feasibility_loss, friction_wrench, jacobian, limit_surface_params, ContactPoint, ObjectIntrinsics, PushingMode,
    RobotSpec, GRAVITY,
};
use copush_core::decompose::{replay_ordered, segment_and_order};
use copush_core::geometry::{arc_from_poses, integrate_twist, ArcMotion, Polygon, Pose, Twist, Vec2};
use copush_core::hybrid::{check_plan, search_traced, seq_arc_approx, trace_deviation, Libraries, NoProposer, SearchConfig};
use copush_core::mapf::{plan_all, MapfObject, MapfProblem, TimedPath};
use copush_core::modes::{mode_sufficient, PushContext};
use copush_core::pipeline::{decompose_paths, plan_paths, run_pipeline, PipelineOutput};
use copush_core::plot::{gantt_svg, trajectory_svg};
use copush_core::scenario::{Fault, Scenario};
use copush_core::sim::{GOAL_ANGLE, GOAL_DIST};
use copush_core::trace::Trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn load(name: &str, overrides: &[&str]) -> Scenario {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    Scenario::load(&scenario_path(name), &o).expect("shipped scenario loads")
}

/// Star-shaped polygon with `n` vertices at random radii.
fn random_polygon(rng: &mut ChaCha8Rng) -> Polygon {
    let n = rng.random_range(3..9);
    let mut angles: Vec<f64> = (0..n).map(|i| 2.0 * PI * (i as f64 + rng.random_range(0.1..0.9)) / n as f64).collect();
    angles.sort_by(f64::total_cmp);
    let pts: Vec<(f64, f64)> = angles
        .iter()
        .map(|a| {
            let r = rng.random_range(0.2..0.6);
            (r * a.cos(), r * a.sin())
        })
        .collect();
    Polygon::from_points(&pts).expect("star polygon is simple").centered()
}

fn limit_surface() -> Verdict {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut dissipative = true;
    for _ in 0..20 {
        let poly = random_polygon(&mut rng);
        let intr = ObjectIntrinsics::uniform(&poly, rng.random_range(1.0..20.0), 0.3, rng.random_range(0.2..0.9));
        let lsp = limit_surface_params(&poly, &intr, GRAVITY).unwrap();
        for _ in 0..1000 {
            let p = Twist::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0));
            let q = friction_wrench(&p, &lsp).unwrap();
            worst = worst.max((lsp.surface_norm(&q) - 1.0).abs());
            dissipative &= q.dot(&p) < 0.0;
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && dissipative && secs < 5.0,
        format!("max |‖D1·q‖−1| = {worst:.1e}, q·p < 0 for all: {dissipative}, {secs:.2} s"),
    )
}

/// Smallest L1 residual over a 1 N grid of contact forces.
fn grid_loss(cols: &[[f64; 3]], caps: &[f64], mu: f64, w: &[f64; 3]) -> f64 {
    let per_contact: Vec<Vec<(f64, f64)>> = caps
        .iter()
        .map(|&cap| {
            let mut v = Vec::new();
            for fnorm in 0..=cap as i64 {
                let fnorm = fnorm as f64;
                let lim = mu * fnorm;
                let mut ft = -lim.floor();
                v.push((fnorm, -lim));
                while ft <= lim {
                    v.push((fnorm, ft));
                    ft += 1.0;
                }
                v.push((fnorm, lim));
            }
            v
        })
        .collect();
    let residual = |forces: &[(f64, f64)]| -> f64 {
        (0..3)
            .map(|k| {
                let s: f64 = forces.iter().enumerate().map(|(i, &(a, b))| cols[2 * i][k] * a + cols[2 * i + 1][k] * b).sum();
                (s - w[k]).abs()
            })
            .sum()
    };
    match per_contact.len() {
        1 => per_contact[0].iter().map(|&f| residual(&[f])).fold(f64::INFINITY, f64::min),
        _ => {
            let mut best = f64::INFINITY;
            for &a in &per_contact[0] {
                for &b in &per_contact[1] {
                    best = best.min(residual(&[a, b]));
                }
            }
            best
        }
    }
}

fn lp_oracle() -> Verdict {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut agree = 0;
    let mut cones = true;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..20 {
        let poly = Polygon::rectangle(rng.random_range(0.4..1.0), rng.random_range(0.4..1.0)).unwrap();
        let intr = ObjectIntrinsics::uniform(&poly, rng.random_range(2.0..6.0), rng.random_range(0.2..0.6), 0.5);
        let lsp = limit_surface_params(&poly, &intr, GRAVITY).unwrap();
        let k = rng.random_range(1..=2);
        let per = poly.perimeter();
        let contacts: Vec<ContactPoint> = (0..k).map(|_| ContactPoint::on(&poly, rng.random_range(0.0..per))).collect();
        let robots: Vec<RobotSpec> = (0..k)
            .map(|_| RobotSpec {
                f_max: rng.random_range(8..30) as f64,
                ..RobotSpec::default()
            })
            .collect();
        let p = Twist::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0));
        let mode = PushingMode::new(contacts.clone(), (0..k).collect()).unwrap();
        let (loss, forces) = force_feasibility_loss(&mode, &p, &lsp, intr.mu_contact, &robots).unwrap();
        for (f, r) in forces.iter().zip(&robots) {
            cones &= f.normal >= -1e-7 && f.normal <= r.f_max + 1e-7 && f.tangential.abs() <= intr.mu_contact * f.normal + 1e-7;
        }
        let q = friction_wrench(&p, &lsp).unwrap();
        let w = [-q.fx, -q.fy, -q.chi];
        let cols = jacobian(&contacts, &Vec2::zeros());
        let caps: Vec<f64> = robots.iter().map(|r| r.f_max).collect();
        let grid = grid_loss(&cols, &caps, intr.mu_contact, &w);
        // Rounding the optimum to the grid moves each normal force by at most
        // 0.5 N and each tangential force by at most 0.5 + 0.5μ N.
        let l1 = |c: &[f64; 3]| c.iter().map(|x| x.abs()).sum::<f64>();
        let tol: f64 = (0..k)
            .map(|i| 0.5 * l1(&cols[2 * i]) + (0.5 + 0.5 * intr.mu_contact) * l1(&cols[2 * i + 1]))
            .sum();
        worst_gap = worst_gap.max(grid - loss);
        if loss <= grid + 1e-7 && grid - loss <= tol {
            agree += 1;
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    verdict(
        agree == 20 && cones && secs < 30.0,
        format!("{agree}/20 within grid tolerance (largest grid − LP {worst_gap:.3}), cones hold: {cones}, {secs:.1} s"),
    )
}

fn quadrature(start: &Pose, tw: &Twist, t: f64, steps: usize) -> Pose {
    // Composite Simpson on the world-frame velocity.
    let h = t / steps as f64;
    let vel = |s: f64| {
        let psi = start.psi + tw.omega * s;
        let (c, n) = (psi.cos(), psi.sin());
        (c * tw.vx - n * tw.vy, n * tw.vx + c * tw.vy)
    };
    let (mut x, mut y) = (0.0, 0.0);
    for i in 0..=steps {
        let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let (vx, vy) = vel(i as f64 * h);
        x += w * vx;
        y += w * vy;
    }
    Pose::new(start.x + x * h / 3.0, start.y + y * h / 3.0, start.psi + tw.omega * t)
}

fn arc_kinematics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut dp, mut da): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let a = Pose::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-PI..PI));
        let b = Pose::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-PI..PI));
        let arc = arc_from_poses(&a, &b);
        let end = integrate_twist(&arc.start, &arc.twist, arc.duration);
        dp = dp.max(end.distance(&b));
        da = da.max(end.angle_to(&b).abs());
    }
    let tw = Twist::new(FRAC_PI_2, 0.0, FRAC_PI_2);
    let quarter = integrate_twist(&Pose::origin(), &tw, 1.0);
    let numeric = quadrature(&Pose::origin(), &tw, 1.0, 2000);
    let dq = quarter.distance(&numeric).max(quarter.angle_to(&numeric).abs());
    verdict(
        dp <= 1e-6 && da <= 1e-6 && dq <= 1e-6,
        format!("round trip max {dp:.1e} m / {da:.1e} rad, quarter circle vs quadrature {dq:.1e}"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> Option<(Vec<TimedPath>, Vec<Polygon>)> {
    let polys: Vec<Polygon> = (0..3)
        .map(|_| Polygon::rectangle(rng.random_range(0.3..0.7), rng.random_range(0.3..0.7)).unwrap())
        .collect();
    let pick = |rng: &mut ChaCha8Rng| Pose::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0);
    let objects = polys
        .iter()
        .map(|p| MapfObject {
            poly: p.clone(),
            start: pick(rng),
            goal: pick(rng),
        })
        .collect();
    let mut problem = MapfProblem::new(objects, vec![], 0.3);
    problem.lattice.resolution = 0.5;
    problem.bounds = Some((Vec2::new(-3.0, -3.0), Vec2::new(3.0, 3.0)));
    problem.max_expansions = 200_000;
    Some((plan_all(&problem).ok()?, polys))
}

type Instance = (Vec<TimedPath>, Vec<Polygon>);

fn instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut out = Vec::new();
    while out.len() < 50 {
        if let Some(i) = random_instance(&mut rng) {
            out.push(i);
        }
    }
    out
}

fn decomposition(instances: &[Instance]) -> Verdict {
    let mut ok = 0;
    for (paths, polys) in instances {
        let Ok(d) = segment_and_order(paths, polys, 0.1) else { continue };
        let partitions = paths.iter().enumerate().all(|(m, path)| {
            let mut joined = vec![path.poses[0]];
            d.of_object(m).all(|s| {
                let linked = s.poses[0] == *joined.last().unwrap();
                joined.extend_from_slice(&s.poses[1..]);
                linked
            }) && joined == path.poses
        });
        if partitions && d.order.topological_order().is_some() {
            ok += 1;
        }
    }
    let sc = load("corridor_crossing.toml", &[]);
    let paths = plan_paths(&sc).unwrap();
    let d = decompose_paths(&sc, &paths).unwrap();
    let edges: BTreeSet<(String, String)> = d
        .order
        .pairs()
        .into_iter()
        .map(|(a, b)| (d.subtasks[a].label(), d.subtasks[b].label()))
        .collect();
    let want: BTreeSet<(String, String)> = [("S1_2", "S2_1"), ("S1_1", "S2_1")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    verdict(
        ok == 50 && d.subtasks.len() == 3 && edges == want,
        format!("{ok}/50 partition and sort; crossing: {} subtasks, edges {edges:?}", d.subtasks.len()),
    )
}

fn ordered_replay(instances: &[Instance]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut collisions = 0;
    let mut replayed = 0;
    for (paths, polys) in instances {
        let Ok(d) = segment_and_order(paths, polys, 0.1) else { continue };
        let durations: Vec<f64> = d.subtasks.iter().map(|s| (s.end - s.start) as f64 * rng.random_range(0.3..3.0)).collect();
        collisions += replay_ordered(&d, paths, polys, &durations).collisions;
        replayed += 1;
    }
    verdict(replayed == 50 && collisions == 0, format!("{replayed} replays, {collisions} collisions"))
}

fn square_team() -> PushContext {
    let poly = Polygon::rectangle(1.0, 1.0).unwrap();
    let intr = ObjectIntrinsics::uniform(&poly, 10.0, 0.3, 0.5);
    PushContext::new(poly, intr, vec![RobotSpec::default(); 3])
}

fn hybrid_completeness() -> Verdict {
    let clock = Instant::now();
    let ctx = square_team();
    let (sufficient, _) = mode_sufficient(&ctx, 30, 6);
    let cfg = SearchConfig::default();
    let mut libs = Libraries::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut solved, mut verified) = (0, true);
    for _ in 0..100 {
        let a = Pose::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-PI..PI));
        let heading = rng.random_range(-PI..PI);
        let len = rng.random_range(0.3..5.0);
        let b = Pose::new(a.x + len * heading.cos(), a.y + len * heading.sin(), a.psi + rng.random_range(-1.0..1.0));
        let (plan, stats) = search_traced(&ctx, &[a, b], &mut libs, &NoProposer, &cfg);
        if let Ok(plan) = plan {
            if plan.is_complete() && stats.expansions <= 500 {
                solved += 1;
                verified &= check_plan(&ctx, &plan, &cfg);
            }
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    verdict(
        sufficient && solved >= 95 && verified && secs < 600.0,
        format!("team sufficient: {sufficient}, {solved}/100 complete within 500 expansions, every stage force-feasible: {verified}, {secs:.1} s"),
    )
}

fn seq_arc_order() -> Verdict {
    const EPS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
    let ctx = square_team();
    let (_, prims) = mode_sufficient(&ctx, 30, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rho = ctx.poly.bounding_radius();
    // Worst deviation over sampled arc directions, per ε.
    let mut bound = [0.0f64; 4];
    let mut widest_single: f64 = 1.0;
    let mut spanned = 0;
    for _ in 0..20 {
        let dir = Twist::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let start = Pose::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-PI..PI));
        let devs: Option<Vec<f64>> = EPS
            .iter()
            .map(|&eps| {
                let arc = ArcMotion::new(start, dir.scaled(eps / dir.norm_with(rho)), 1.0);
                let frag = seq_arc_approx(&arc, &prims).ok()?;
                Some(trace_deviation(&arc, &frag, eps / 200.0))
            })
            .collect();
        let Some(devs) = devs else { continue };
        spanned += 1;
        let ratios: Vec<f64> = devs.iter().zip(EPS).map(|(d, e)| d / e).collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        widest_single = widest_single.max(hi / lo);
        for (b, d) in bound.iter_mut().zip(&devs) {
            *b = b.max(*d);
        }
    }
    let ratios: Vec<f64> = bound.iter().zip(EPS).map(|(d, e)| d / e).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    verdict(
        spanned == 20 && hi / lo <= 2.0,
        format!(
            "{} primitives, bound/ε over ε = 0.4..0.05: [{}], band ×{:.3} (widest single arc ×{widest_single:.3})",
            prims.len(),
            shown.join(", "),
            hi / lo
        ),
    )
}

/// Ordering safety on a trace: no subtask pushes before every predecessor
/// is done.
fn ordering_safe(run: &PipelineOutput, trace: &Trace) -> bool {
    let d = &run.decomposition;
    d.subtasks.iter().all(|s| {
        let Some(first) = trace.first_event("push", &s.label()) else {
            return true;
        };
        d.order.pre(s.id).iter().all(|&p| trace.first_event("done", &d.subtasks[p].label()).is_some_and(|t| t <= first))
    })
}

fn end_to_end() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["corridor_swap.toml", "four_objects.toml"] {
        let clock = Instant::now();
        let sc = load(name, &[]);
        let run = run_pipeline(&sc, &mut Libraries::default()).unwrap();
        let secs = clock.elapsed().as_secs_f64();
        let m = &run.metrics;
        let trace = Trace::parse(&run.episode.trace);
        let c = trace.counts();
        let consistent = c.modes == m.modes && c.switches == m.switches && c.collisions == m.collisions;
        let ok = m.success
            && m.collisions == 0
            && m.max_terminal_distance <= GOAL_DIST
            && m.max_terminal_angle <= GOAL_ANGLE
            && secs <= 120.0
            && m.modes >= 1
            && consistent
            && ordering_safe(&run, &trace);
        pass &= ok;
        parts.push(format!(
            "{}: success {} collisions {} err {:.3} m / {:.3} rad, modes {}, {:.1} s sim, {secs:.1} s wall",
            m.scenario, m.success, m.collisions, m.max_terminal_distance, m.max_terminal_angle, m.modes, m.completion_time
        ));
    }
    verdict(pass, parts.join("; "))
}

fn fault_injection() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, replans) in [("replan", 2usize), ("reassign", 0)] {
        let mut sc = load("corridor_swap.toml", &[]);
        sc.file.config.episode.faults = vec![Fault { time: 4.0, object: None }];
        sc.file.config.episode.max_replans = replans;
        let run = run_pipeline(&sc, &mut Libraries::default()).unwrap();
        let r = &run.episode.report;
        let detected = !r.failures.is_empty() && r.failures.iter().all(|f| f.kind == "deviation" || f.kind == "stuck");
        let escalated = if replans > 0 { r.replans >= 1 } else { r.reassignments >= 1 };
        let ok = detected && escalated && r.success && r.collisions == 0;
        pass &= ok;
        parts.push(format!(
            "{label}: failures {:?}, replans {}, reassignments {}, success {}",
            r.failures.iter().map(|f| f.kind.as_str()).collect::<Vec<_>>(),
            r.replans,
            r.reassignments,
            r.success
        ));
    }
    verdict(pass, parts.join("; "))
}

fn determinism() -> Verdict {
    let sc = load("corridor_swap.toml", &["seed=21"]);
    let a = run_pipeline(&sc, &mut Libraries::default()).unwrap();
    let b = run_pipeline(&sc, &mut Libraries::default()).unwrap();
    let echoed = Scenario::parse(&sc.to_toml(), &[]).unwrap();
    let c = run_pipeline(&echoed, &mut Libraries::default()).unwrap();
    let same_trace = a.episode.trace == b.episode.trace && a.episode.trace == c.episode.trace;
    let same_metrics = a.metrics.to_text() == b.metrics.to_text() && a.metrics.to_text() == c.metrics.to_text();
    let (ta, tb) = (Trace::parse(&a.episode.trace), Trace::parse(&b.episode.trace));
    let same_plots = trajectory_svg(&sc, &ta) == trajectory_svg(&sc, &tb) && gantt_svg(&ta) == gantt_svg(&tb);
    verdict(
        same_trace && same_metrics && same_plots,
        format!(
            "trace identical: {same_trace} ({} bytes), metrics identical: {same_metrics}, plots identical: {same_plots}",
            a.episode.trace.len()
        ),
    )
}

type Check<'a> = Box<dyn Fn() -> Verdict + Sync + 'a>;

fn main() {
    let clock = Instant::now();
    let shared = instances();
    let criteria: Vec<(usize, &str, Check<'_>)> = vec![
        (1, "limit surface identities", Box::new(limit_surface)),
        (2, "LP matches brute-force grid", Box::new(lp_oracle)),
        (3, "arc kinematics", Box::new(arc_kinematics)),
        (4, "decomposition", Box::new(|| decomposition(&shared))),
        (5, "ordered execution safety", Box::new(|| ordered_replay(&shared))),
        (6, "hybrid search completeness", Box::new(hybrid_completeness)),
        (7, "sequential arc approximation is O(ε)", Box::new(seq_arc_order)),
        (8, "end-to-end scenarios", Box::new(end_to_end)),
        (9, "fault injection and escalation", Box::new(fault_injection)),
        (10, "determinism", Box::new(determinism)),
    ];
    let results: Vec<(usize, &str, Verdict)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|(n, name, f)| (*n, *name, s.spawn(f))).collect();
        handles
            .into_iter()
            .map(|(n, name, h)| {
                let v = h.join().unwrap_or_else(|_| verdict(false, "panicked".into()));
                (n, name, v)
            })
            .collect()
    });
    let mut failed = 0;
    for (n, name, v) in &results {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag}  {name}: {}", v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        clock.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
