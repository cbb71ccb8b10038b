use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn unit_square() -> ObjectModel {
    let poly = Polygon::rectangle(1.0, 1.0).unwrap();
    let intr = ObjectIntrinsics::uniform(&poly, 10.0, 0.2, 0.8);
    ObjectModel { poly, intr }
}

fn straight(id: usize, object: usize, k: usize, from: (f64, f64), to: (f64, f64), steps: usize) -> Subtask {
    let poses = (0..=steps)
        .map(|i| {
            let u = i as f64 / steps as f64;
            Pose::new(from.0 + u * (to.0 - from.0), from.1 + u * (to.1 - from.1), 0.0)
        })
        .collect();
    Subtask {
        id,
        object,
        k,
        start: 0,
        end: steps,
        poses,
    }
}

/// Sufficiency fixed per subgroup size, identical robots.
fn estimator(objects: usize, robots: usize, min_size: &[usize], cfg: AssignConfig) -> Estimator {
    let est = Estimator::new(vec![unit_square(); objects], vec![RobotSpec::default(); robots], cfg);
    for (m, &need) in min_size.iter().enumerate() {
        for k in 1..=robots {
            est.preset(m, &(0..k).collect::<Vec<_>>(), k >= need);
        }
    }
    est
}

#[test]
fn forced_pair_is_assigned() {
    let subtasks = vec![straight(0, 0, 0, (0.0, 0.0), (2.0, 0.0), 8)];
    let order = PartialOrder::new(1);
    let est = estimator(1, 2, &[2], AssignConfig::default());
    let state = AssignState::initial(1, vec![Vec2::new(-1.0, 0.5), Vec2::new(-1.0, -0.5)]);
    let plan = assign(&subtasks, &order, &est, &state).unwrap();
    assert_eq!(plan.entries.len(), 1);
    assert_eq!(plan.entries[0].robots, vec![0, 1]);
    validate(&plan, &subtasks, &order, &est, &state).unwrap();
}

#[test]
fn independent_subtasks_run_in_parallel() {
    let subtasks = vec![
        straight(0, 0, 0, (0.0, 0.0), (2.0, 0.0), 8),
        straight(1, 1, 0, (0.0, 3.0), (3.0, 3.0), 12),
    ];
    let order = PartialOrder::new(2);
    let est = estimator(2, 4, &[2, 2], AssignConfig::default());
    let pos = vec![
        Vec2::new(-1.0, 0.0),
        Vec2::new(-1.0, 0.2),
        Vec2::new(-1.0, 3.0),
        Vec2::new(-1.0, 3.2),
    ];
    let state = AssignState::initial(2, pos.clone());
    let plan = assign(&subtasks, &order, &est, &state).unwrap();
    let a = plan.entry(0).unwrap();
    let b = plan.entry(1).unwrap();
    assert!(a.robots.iter().all(|r| !b.robots.contains(r)));
    assert_eq!((a.start, b.start), (0.0, 0.0));
    let da = est.estimate_completion(&subtasks[0], &a.robots, &pos).duration;
    let db = est.estimate_completion(&subtasks[1], &b.robots, &pos).duration;
    assert!((plan.makespan - da.max(db)).abs() < 1e-9);
    assert!((plan.makespan - oracle_makespan(&subtasks, &order, &est, &state)).abs() < 1e-9);
}

#[test]
fn horizon_caps_each_round() {
    let subtasks: Vec<Subtask> = (0..5)
        .map(|i| straight(i, i, 0, (3.0 * i as f64, 0.0), (3.0 * i as f64, 2.0), 4))
        .collect();
    let order = PartialOrder::new(5);
    let cfg = AssignConfig {
        horizon: 1,
        ..AssignConfig::default()
    };
    let est = estimator(5, 2, &[1; 5], cfg);
    let state = AssignState::initial(5, vec![Vec2::zeros(), Vec2::new(12.0, 0.0)]);
    let plan = assign(&subtasks, &order, &est, &state).unwrap();
    assert_eq!(plan.entries.len(), 1);
}

#[test]
fn completion_estimates() {
    let s = straight(0, 0, 0, (0.0, 0.0), (2.0, 0.0), 8);
    let cfg = AssignConfig {
        push_speed: 0.5,
        ..AssignConfig::default()
    };
    let est = estimator(1, 3, &[2], cfg);
    let near = vec![Vec2::new(-0.6, 0.2), Vec2::new(-0.6, -0.2), Vec2::new(-6.0, 0.0)];
    let bad = est.estimate_completion(&s, &[0], &near);
    assert!(!bad.feasible);
    assert!(bad.duration.is_infinite());
    let at_start = est.estimate_completion(&s, &[0, 1], &near);
    assert!(at_start.feasible);
    assert!(at_start.duration >= 4.0);
    let far = est.estimate_completion(&s, &[0, 2], &near);
    assert!(far.duration > at_start.duration);
}

#[test]
fn switches_follow_direction_changes() {
    let l: Vec<Pose> = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (2.0, 2.0)]
        .iter()
        .map(|&(x, y)| Pose::new(x, y, 0.0))
        .collect();
    assert_eq!(switch_estimate(&l[..3]), 0);
    assert_eq!(switch_estimate(&l), 1);
    assert!((path_travel(&l, 1.0) - 4.0).abs() < 1e-12);
}

#[test]
fn replan_triggers() {
    let p = ReplanPolicy::default();
    let two = ReplanState {
        completed_since_plan: 2,
        ..ReplanState::default()
    };
    let late = ReplanState {
        elapsed_since_plan: 81.0,
        ..ReplanState::default()
    };
    assert!(replan_trigger(&two, &p));
    assert!(replan_trigger(&late, &p));
    assert!(!replan_trigger(&ReplanState::default(), &p));
    assert!(replan_trigger(
        &ReplanState {
            failure: true,
            ..ReplanState::default()
        },
        &p
    ));
}

#[test]
fn missing_subgroup_names_the_subtask() {
    let subtasks = vec![straight(0, 0, 0, (0.0, 0.0), (2.0, 0.0), 8)];
    let est = estimator(1, 2, &[3], AssignConfig::default());
    let state = AssignState::initial(1, vec![Vec2::zeros(), Vec2::zeros()]);
    let err = assign(&subtasks, &PartialOrder::new(1), &est, &state).unwrap_err();
    assert_eq!(err, AssignError::NoSubgroup("S1_1".into()));
}

#[test]
fn stationary_subtasks_need_no_robots() {
    let mut wait = straight(0, 0, 0, (0.0, 0.0), (0.0, 0.0), 1);
    wait.poses = vec![Pose::origin(); 3];
    let subtasks = vec![wait, straight(1, 0, 1, (0.0, 0.0), (1.0, 0.0), 4)];
    let mut order = PartialOrder::new(2);
    order.add(0, 1);
    order.close();
    let est = estimator(1, 1, &[1], AssignConfig::default());
    let state = AssignState::initial(2, vec![Vec2::new(-0.7, 0.0)]);
    let plan = assign(&subtasks, &order, &est, &state).unwrap();
    assert!(plan.entry(0).unwrap().robots.is_empty());
    assert_eq!(plan.entry(1).unwrap().robots, vec![0]);
    validate(&plan, &subtasks, &order, &est, &state).unwrap();
}

#[test]
fn validator_rejects_double_booking() {
    let subtasks = vec![
        straight(0, 0, 0, (0.0, 0.0), (2.0, 0.0), 8),
        straight(1, 1, 0, (0.0, 3.0), (2.0, 3.0), 8),
    ];
    let order = PartialOrder::new(2);
    let est = estimator(2, 1, &[1, 1], AssignConfig::default());
    let state = AssignState::initial(2, vec![Vec2::zeros()]);
    let plan = TaskPlan {
        entries: vec![
            Assignment {
                subtask: 0,
                robots: vec![0],
                start: 0.0,
                end: 10.0,
            },
            Assignment {
                subtask: 1,
                robots: vec![0],
                start: 5.0,
                end: 15.0,
            },
        ],
        makespan: 15.0,
        efficiency: 0.0,
    };
    assert!(validate(&plan, &subtasks, &order, &est, &state).is_err());
}

#[test]
fn gantt_lists_assignments() {
    let subtasks = vec![straight(0, 0, 0, (0.0, 0.0), (2.0, 0.0), 8)];
    let plan = TaskPlan {
        entries: vec![Assignment {
            subtask: 0,
            robots: vec![1, 2],
            start: 0.5,
            end: 7.25,
        }],
        makespan: 7.25,
        efficiency: 0.3,
    };
    assert_eq!(plan.gantt(&subtasks), "gantt 0 S1_1 [1,2] 0.500000 7.250000\n");
}

/// Smallest makespan over every order and every subgroup, scheduled by the
/// same start rule.
fn oracle_makespan(subtasks: &[Subtask], order: &PartialOrder, est: &Estimator, state: &AssignState) -> f64 {
    fn go(
        subtasks: &[Subtask],
        order: &PartialOrder,
        est: &Estimator,
        end: &mut Vec<Option<f64>>,
        free: &mut Vec<f64>,
        pos: &mut Vec<Vec2>,
        span: f64,
        best: &mut f64,
    ) {
        if end.iter().all(Option::is_some) {
            *best = best.min(span);
            return;
        }
        let n = free.len();
        for s in 0..subtasks.len() {
            if end[s].is_some() || order.pre(s).iter().any(|&p| end[p].is_none()) {
                continue;
            }
            let ready = order.pre(s).iter().filter_map(|&p| end[p]).fold(0.0, f64::max);
            let groups: Vec<Vec<usize>> = if subtasks[s].is_stationary() {
                vec![vec![]]
            } else {
                (1u32..1 << n)
                    .map(|mask| (0..n).filter(|&r| mask & (1 << r) != 0).collect::<Vec<_>>())
                    .filter(|g| g.len() <= est.cfg.n_cap)
                    .collect()
            };
            for g in groups {
                let e = est.estimate_completion(&subtasks[s], &g, pos);
                if !e.feasible {
                    continue;
                }
                let start = g.iter().map(|&r| free[r]).fold(ready, f64::max);
                let fin = start + e.duration;
                let saved = (free.clone(), pos.clone());
                for &r in &g {
                    free[r] = fin;
                    pos[r] = subtasks[s].last().position();
                }
                end[s] = Some(fin);
                go(subtasks, order, est, end, free, pos, span.max(fin), best);
                end[s] = None;
                (*free, *pos) = saved;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(
        subtasks,
        order,
        est,
        &mut state.finished.clone(),
        &mut state.robot_free.clone(),
        &mut state.robot_pos.clone(),
        0.0,
        &mut best,
    );
    best
}

#[test]
fn small_instances_match_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..30 {
        let n = rng.random_range(1..=3);
        let robots = rng.random_range(1..=4);
        let mut subtasks = Vec::new();
        let mut need = Vec::new();
        for i in 0..n {
            let x0 = rng.random_range(-3.0..3.0);
            let y0 = rng.random_range(-3.0..3.0);
            let x1 = x0 + rng.random_range(-2.0..2.0);
            let y1 = y0 + rng.random_range(-2.0..2.0);
            subtasks.push(straight(i, i, 0, (x0, y0), (x1, y1), 6));
            need.push(rng.random_range(1..=robots));
        }
        let mut order = PartialOrder::new(n);
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(0.4) {
                    order.add(a, b);
                }
            }
        }
        order.close();
        let cfg = AssignConfig {
            horizon: n,
            ..AssignConfig::default()
        };
        let est = estimator(n, robots, &need, cfg);
        let pos = (0..robots)
            .map(|_| Vec2::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)))
            .collect();
        let state = AssignState::initial(n, pos);
        let plan = assign(&subtasks, &order, &est, &state).unwrap();
        validate(&plan, &subtasks, &order, &est, &state).unwrap();
        let want = oracle_makespan(&subtasks, &order, &est, &state);
        assert!((plan.makespan - want).abs() < 1e-9, "{} vs {want}", plan.makespan);
    }
}

#[test]
fn excluded_group_is_skipped() {
    let subtasks = vec![straight(0, 0, 0, (0.0, 0.0), (2.0, 0.0), 8)];
    let order = PartialOrder::new(1);
    let est = estimator(1, 3, &[2], AssignConfig::default());
    let mut state = AssignState::initial(1, vec![Vec2::new(-1.0, 0.5), Vec2::new(-1.0, -0.5), Vec2::new(-3.0, 0.0)]);
    state.excluded.push((0, vec![0, 1]));
    let plan = assign(&subtasks, &order, &est, &state).unwrap();
    assert_ne!(plan.entries[0].robots, vec![0, 1]);
}
