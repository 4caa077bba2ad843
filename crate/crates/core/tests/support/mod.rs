//! Independent oracles and reusable property bodies shared by the
//! integration test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use twinsync_core::analysis::{hypervolume2d, pareto_front, SolutionPoint};
use twinsync_core::equivalence::{drift, fine_action_deviation, state_deviation};
use twinsync_core::{ActionKind, ActionRecord, DroneId, KnowledgeGraph, KnowledgeVector, ObjectId, StateVector};

/// Quadratic non-dominated filter, duplicates collapsed.
pub fn pareto_oracle(points: &[SolutionPoint]) -> Vec<SolutionPoint> {
    let mut out: Vec<SolutionPoint> = Vec::new();
    for p in points {
        let dominated = points.iter().any(|q| {
            q.dev <= p.dev && q.upd <= p.upd && (q.dev < p.dev || q.upd < p.upd)
        });
        if !dominated && !out.contains(p) {
            out.push(*p);
        }
    }
    out.sort_by(|a, b| a.dev.total_cmp(&b.dev));
    out
}

/// Column-scan approximation of the dominated area in the unit box: each of
/// `cols` columns contributes the height above the lowest point to its left.
pub fn hypervolume_grid(points: &[SolutionPoint], cols: usize) -> f64 {
    let inside: Vec<&SolutionPoint> = points
        .iter()
        .filter(|p| (0.0..=1.0).contains(&p.dev) && (0.0..=1.0).contains(&p.upd))
        .collect();
    let w = 1.0 / cols as f64;
    let mut area = 0.0;
    for c in 0..cols {
        let x = (c as f64 + 0.5) * w;
        let low = inside
            .iter()
            .filter(|p| p.dev <= x)
            .map(|p| p.upd)
            .fold(f64::INFINITY, f64::min);
        if low.is_finite() {
            area += (1.0 - low) * w;
        }
    }
    area
}

/// Fine deviation written out case by case from the published branch table.
pub fn fine_oracle(a: &ActionRecord, b: &ActionRecord, k: usize) -> f64 {
    use ActionKind::*;
    let same_obj = a.followed_object == b.followed_object;
    match (a.kind, b.kind) {
        (RandomWalk, RandomWalk) => 0.0,
        (Follow, Follow) if same_obj => 0.0,
        (Follow, Follow) => 1.0,
        (RespondAndFollow, RespondAndFollow) => {
            let same_sender = a.responded_to == b.responded_to;
            match (same_sender, same_obj) {
                (true, true) => 0.0,
                (true, false) | (false, true) => 0.2,
                (false, false) => 0.4,
            }
        }
        (NotifyAndFollow, NotifyAndFollow) => {
            let c = a.notified.iter().filter(|d| b.notified.contains(d)).count() as f64;
            let widest = a.notified.len().max(b.notified.len());
            let v = match widest.min(k - 1) {
                0 => 0.0,
                n => 0.5 - 0.5 * c / n as f64,
            };
            if same_obj {
                v
            } else {
                v + 0.5
            }
        }
        (Follow, NotifyAndFollow) | (NotifyAndFollow, Follow) if same_obj => 0.5,
        _ => 1.0,
    }
}

pub fn arb_point() -> impl Strategy<Value = SolutionPoint> {
    // Coarse coordinates make ties and duplicates common.
    (0u32..=40, 0u32..=40).prop_map(|(a, b)| SolutionPoint::new(a as f64 / 40.0, b as f64 / 40.0))
}

pub fn arb_point_fine() -> impl Strategy<Value = SolutionPoint> {
    (0.0f64..1.2, 0.0f64..1.2).prop_map(|(a, b)| SolutionPoint::new(a, b))
}

pub fn arb_kind() -> impl Strategy<Value = ActionKind> {
    prop::sample::select(ActionKind::ALL.to_vec())
}

/// A well-formed record for drone 1 with small id ranges so details collide.
pub fn arb_record(kind: ActionKind, k: usize) -> impl Strategy<Value = ActionRecord> {
    let others: Vec<u32> = (2..=6).collect();
    (1u32..=3, prop::sample::subsequence(others.clone(), k - 1), prop::sample::select(others)).prop_map(
        move |(obj, notified, sender)| {
            let me = DroneId(1);
            let obj = ObjectId(obj);
            match kind {
                ActionKind::Follow => ActionRecord::follow(me, obj),
                ActionKind::NotifyAndFollow => {
                    ActionRecord::notify_and_follow(me, obj, notified.into_iter().map(DroneId).collect::<BTreeSet<_>>())
                }
                ActionKind::RespondAndFollow => ActionRecord::respond_and_follow(me, obj, DroneId(sender)),
                ActionKind::RandomWalk => ActionRecord::random_walk(me),
            }
        },
    )
}

pub fn arb_record_pair() -> impl Strategy<Value = (ActionRecord, ActionRecord, usize)> {
    (arb_kind(), arb_kind(), 2usize..=4)
        .prop_flat_map(|(a, b, k)| (arb_record(a, k), arb_record(b, k), Just(k)))
}

fn close(a: f64, b: f64, tol: f64) -> Result<(), TestCaseError> {
    prop_assert!((a - b).abs() <= tol, "{a} vs {b}");
    Ok(())
}

pub fn check_metric_axioms(a: &[f64], b: &[f64], c: &[f64]) -> Result<(), TestCaseError> {
    let (ka, kb, kc) = (KnowledgeVector(a.to_vec()), KnowledgeVector(b.to_vec()), KnowledgeVector(c.to_vec()));
    let (sa, sb, sc) = (StateVector(a.to_vec()), StateVector(b.to_vec()), StateVector(c.to_vec()));
    let d = |x: &KnowledgeVector, y: &KnowledgeVector| drift(x, y).unwrap();
    let s = |x: &StateVector, y: &StateVector| state_deviation(x, y).unwrap();
    for (ab, ba, aa, ac, bc) in [
        (d(&ka, &kb), d(&kb, &ka), d(&ka, &ka), d(&ka, &kc), d(&kb, &kc)),
        (s(&sa, &sb), s(&sb, &sa), s(&sa, &sa), s(&sa, &sc), s(&sb, &sc)),
    ] {
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(aa, 0.0);
        prop_assert_eq!(ab, ba);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert_eq!(ab == 0.0, a == b);
    }
    Ok(())
}

pub fn check_fine_pair(a: &ActionRecord, b: &ActionRecord, k: usize) -> Result<(), TestCaseError> {
    let got = fine_action_deviation(a, b, k).unwrap();
    close(got, fine_oracle(a, b, k), 1e-12)?;
    prop_assert!((0.0..=1.0).contains(&got));
    prop_assert_eq!(fine_action_deviation(a, a, k).unwrap(), 0.0);
    prop_assert_eq!(fine_action_deviation(b, b, k).unwrap(), 0.0);
    Ok(())
}

/// Evaporate-then-strengthen with up to `n_objects` shared objects per step
/// never exceeds the geometric bound.
pub fn check_weight_bound(schedule: &[usize], n_objects: usize, gamma: f64, delta: f64) -> Result<(), TestCaseError> {
    let bound = delta * n_objects as f64 / (1.0 - gamma);
    let mut g = KnowledgeGraph::new(DroneId(1));
    for &shared in schedule {
        g.evaporate(gamma);
        for _ in 0..shared.min(n_objects) {
            g.strengthen(DroneId(2), delta);
        }
        prop_assert!(g.weight(DroneId(2)) <= bound + 1e-9);
        prop_assert!(g.weight(DroneId(2)) >= 0.0);
    }
    Ok(())
}

/// Front is non-dominated (nothing in the input beats a front point) and
/// complete (every non-front input point is beaten by some front point).
pub fn check_front(points: &[SolutionPoint]) -> Result<(), TestCaseError> {
    let front = pareto_front(points);
    prop_assert_eq!(&front, &pareto_oracle(points));
    for f in &front {
        prop_assert!(!points.iter().any(|p| twinsync_core::dominates(p, f)));
    }
    for p in points {
        if !front.contains(p) {
            prop_assert!(front.iter().any(|f| twinsync_core::dominates(f, p)));
        }
    }
    Ok(())
}

pub fn check_hypervolume(points: &[SolutionPoint]) -> Result<(), TestCaseError> {
    let hv = hypervolume2d(points, SolutionPoint::new(1.0, 1.0));
    close(hv, hypervolume_grid(points, 20_000), 1e-3)
}

/// Runs `body` on `cases` generated inputs; returns the failure message if any.
pub fn run_cases<S: Strategy>(
    cases: u32,
    strategy: S,
    body: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, body).map_err(|e| e.to_string())
}

pub fn vectors3() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (0usize..12).prop_flat_map(|n| {
        let v = || prop::collection::vec(-100.0f64..100.0, n);
        (v(), v(), v())
    })
}
