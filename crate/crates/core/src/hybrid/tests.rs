use super::*;
use crate::contact::ContactPoint;
use crate::geometry::{Polygon, Twist, Vec2};
use crate::modes::tests::square_ctx;

fn block(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::from_points(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]).unwrap()
}

/// Boundary station closest to `target`, by brute force.
fn station_at(poly: &Polygon, target: Vec2) -> f64 {
    let per = poly.perimeter();
    (0..4000)
        .map(|i| per * i as f64 / 4000.0)
        .min_by(|a, b| {
            let d = |s: f64| (ContactPoint::on(poly, s).pos() - target).norm();
            d(*a).total_cmp(&d(*b))
        })
        .unwrap()
}

fn single_contact(ctx: &PushContext, at: Vec2) -> PushingMode {
    PushingMode::new(vec![ContactPoint::on(&ctx.poly, station_at(&ctx.poly, at))], vec![0]).unwrap()
}

fn slow() -> SearchConfig {
    SearchConfig {
        push_speed: 0.5,
        ..SearchConfig::default()
    }
}

#[test]
fn cost_of_bare_straight_plan_is_travel_time() {
    let ctx = square_ctx(2, 100.0);
    let stages = vec![Keyframe::bare(Pose::origin()), Keyframe::bare(Pose::new(2.0, 0.0, 0.0))];
    assert!((plan_cost(&ctx, &stages, &slow()) - 4.0).abs() < 1e-12);
}

#[test]
fn cost_adds_mode_loss() {
    let ctx = square_ctx(1, 100.0);
    let mode = single_contact(&ctx, Vec2::new(-0.5, 0.0));
    let p = Twist::new(1.0, 0.0, 0.0);
    let stages = vec![
        Keyframe { pose: Pose::origin(), mode: Some(mode.clone()) },
        Keyframe::bare(Pose::new(2.0, 0.0, 0.0)),
    ];
    let loss = ctx.plan_loss(&mode, &p);
    assert!(loss.is_finite());
    assert!((plan_cost(&ctx, &stages, &slow()) - (4.0 + loss)).abs() < 1e-9);
}

#[test]
fn cost_adds_switch_time() {
    let ctx = square_ctx(1, 100.0);
    let left = single_contact(&ctx, Vec2::new(-0.5, 0.0));
    let right = single_contact(&ctx, Vec2::new(0.5, 0.0));
    let stages = vec![
        Keyframe { pose: Pose::origin(), mode: Some(left.clone()) },
        Keyframe { pose: Pose::new(1.0, 0.0, 0.0), mode: Some(right.clone()) },
        Keyframe::bare(Pose::origin()),
    ];
    // Half the perimeter of the unit square at 1 m/s.
    assert!((switch_time(&ctx, &left, &right) - 2.0).abs() < 1e-2);
    let losses = ctx.plan_loss(&left, &Twist::new(1.0, 0.0, 0.0)) + ctx.plan_loss(&right, &Twist::new(-1.0, 0.0, 0.0));
    let want = 4.0 + switch_time(&ctx, &left, &right) + losses;
    assert!((plan_cost(&ctx, &stages, &slow()) - want).abs() < 1e-9);
    assert!((want - losses - 6.0).abs() < 1e-2);
}

#[test]
fn free_space_push_needs_one_mode() {
    let ctx = square_ctx(2, 100.0);
    let guide = [Pose::origin(), Pose::new(1.0, 0.0, 0.0)];
    let mut libs = Libraries::default();
    let plan = search(&ctx, &guide, &mut libs, &NoProposer, &SearchConfig::default()).unwrap();
    assert!(plan.is_complete());
    assert_eq!(plan.mode_count(), 1);
    assert!(check_plan(&ctx, &plan, &SearchConfig::default()));
    assert_eq!(plan.start(), guide[0]);
    assert_eq!(plan.goal(), guide[1]);
}

#[test]
fn detour_inserts_guide_keyframes() {
    let ctx = square_ctx(2, 100.0).with_obstacles(vec![block(1.3, -0.2, 1.7, 1.3)]);
    let guide = [
        Pose::origin(),
        Pose::new(0.5, -0.6, 0.0),
        Pose::new(1.0, -1.1, 0.0),
        Pose::new(1.5, -1.2, 0.0),
        Pose::new(2.0, -1.1, 0.0),
        Pose::new(2.5, -0.6, 0.0),
        Pose::new(3.0, 0.0, 0.0),
    ];
    let cfg = SearchConfig::default();
    let straight = arc_from_poses(&guide[0], &guide[6]);
    assert!(!arc_clear(&ctx, &straight, 0.0));
    let plan = search(&ctx, &guide, &mut Libraries::default(), &NoProposer, &cfg).unwrap();
    assert!(plan.stages.len() > 2);
    assert!(plan.arcs().iter().all(|a| arc_clear(&ctx, a, 0.0)));
    assert!(check_plan(&ctx, &plan, &cfg));
}

#[test]
fn zero_node_cap_fails() {
    let ctx = square_ctx(2, 100.0);
    let guide = [Pose::origin(), Pose::new(1.0, 0.0, 0.0)];
    let cfg = SearchConfig {
        node_cap: 0,
        ..SearchConfig::default()
    };
    let got = search(&ctx, &guide, &mut Libraries::default(), &NoProposer, &cfg);
    assert_eq!(got, Err(SearchError::NodeCap(0)));
    assert_eq!(search(&ctx, &[], &mut Libraries::default(), &NoProposer, &cfg), Err(SearchError::EmptyGuide));
}

#[test]
fn search_is_deterministic() {
    let ctx = square_ctx(2, 100.0);
    let guide = [Pose::origin(), Pose::new(0.8, 0.4, 0.5)];
    let cfg = SearchConfig { seed: 11, ..SearchConfig::default() };
    let a = search(&ctx, &guide, &mut Libraries::default(), &NoProposer, &cfg);
    let b = search(&ctx, &guide, &mut Libraries::default(), &NoProposer, &cfg);
    assert_eq!(a, b);
}

#[test]
fn repeated_query_hits_plan_library() {
    let ctx = square_ctx(2, 100.0);
    let guide = [Pose::origin(), Pose::new(1.0, 0.0, 0.0)];
    let cfg = SearchConfig::default();
    let mut libs = Libraries::default();
    let first = search(&ctx, &guide, &mut libs, &NoProposer, &cfg).unwrap();
    assert_eq!(libs.plans.len(), 1);
    let moved = [Pose::new(2.0, 2.0, 0.0), Pose::new(3.0, 2.0, 0.0)];
    let (second, stats) = search_traced(&ctx, &moved, &mut libs, &NoProposer, &cfg);
    let second = second.unwrap();
    assert_eq!(stats.expansions, 1);
    assert_eq!(second.stages.len(), first.stages.len());
}

#[test]
fn iter_samp_splits_in_two_first() {
    let ctx = square_ctx(2, 100.0);
    let cfg = SearchConfig::default();
    let (a, b) = (Pose::origin(), Pose::new(1.0, 0.0, 0.0));
    let frag = iter_samp(&ctx, &a, &b, &mut ModeLibrary::new(), &cfg, 3).unwrap();
    assert_eq!(frag.len(), 3);
    assert_eq!(frag[0].pose, a);
    assert_eq!(frag[2].pose, b);
    assert!(frag[..2].iter().all(|k| k.mode.is_some()));
    let none = SearchConfig { h_max: 1, ..cfg };
    assert!(iter_samp(&ctx, &a, &b, &mut ModeLibrary::new(), &none, 3).is_none());
}

#[test]
fn plan_helpers_count_modes() {
    let ctx = square_ctx(1, 100.0);
    let left = single_contact(&ctx, Vec2::new(-0.5, 0.0));
    let right = single_contact(&ctx, Vec2::new(0.5, 0.0));
    let plan = HybridPlan {
        stages: vec![
            Keyframe { pose: Pose::origin(), mode: Some(left.clone()) },
            Keyframe { pose: Pose::new(0.5, 0.0, 0.0), mode: Some(left) },
            Keyframe { pose: Pose::new(1.0, 0.0, 0.0), mode: Some(right) },
            Keyframe::bare(Pose::new(0.2, 0.0, 0.0)),
        ],
        cost: 0.0,
    };
    assert!(plan.is_complete());
    assert_eq!(plan.mode_count(), 2);
    assert_eq!(plan.switch_count(), 1);
    assert_eq!(plan.arcs().len(), 3);
}


