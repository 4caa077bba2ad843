//! Evaluation metrics: utility deviation, Pareto dominance, the Pareto
//! front, 2-D hypervolume, normalisation and per-checker memory cost.

use crate::error::{Result, SimError};
use crate::equivalence::Checker;
use crate::model::{ActionKind, ActionRecord};

/// Mean absolute difference between two utility series.
pub fn avg_utility_deviation(u: &[f64], u_twin: &[f64]) -> Result<f64> {
    if u.len() != u_twin.len() {
        return Err(SimError::LengthMismatch {
            left: u.len(),
            right: u_twin.len(),
        });
    }
    if u.is_empty() {
        return Err(SimError::InvalidInput("utility series is empty".into()));
    }
    let total: f64 = u.iter().zip(u_twin).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / u.len() as f64)
}

/// One configuration's outcome. Both objectives are minimised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionPoint {
    /// Average utility deviation.
    pub dev: f64,
    /// Number of updates.
    pub upd: f64,
}

impl SolutionPoint {
    pub const fn new(dev: f64, upd: f64) -> Self {
        Self { dev, upd }
    }

    pub fn within(&self, reference: SolutionPoint) -> bool {
        self.dev <= reference.dev && self.upd <= reference.upd
    }
}

/// `p` is at least as good as `q` in both objectives and better in one.
pub fn dominates(p: &SolutionPoint, q: &SolutionPoint) -> bool {
    p.dev <= q.dev && p.upd <= q.upd && (p.dev < q.dev || p.upd < q.upd)
}

/// The non-dominated subset, duplicates collapsed, sorted by ascending `dev`.
///
/// Sort-and-sweep: after ordering by `(dev, upd)`, a point is on the front
/// iff its `upd` is strictly below every `upd` seen before it.
pub fn pareto_front(points: &[SolutionPoint]) -> Vec<SolutionPoint> {
    let mut sorted: Vec<SolutionPoint> = points.to_vec();
    sorted.sort_by(|a, b| a.dev.total_cmp(&b.dev).then(a.upd.total_cmp(&b.upd)));
    let mut front: Vec<SolutionPoint> = Vec::new();
    let mut best_upd = f64::INFINITY;
    for p in sorted {
        if p.upd < best_upd {
            front.push(p);
            best_upd = p.upd;
        }
    }
    front
}

pub const HYPERVOLUME_REFERENCE: SolutionPoint = SolutionPoint::new(1.0, 1.0);

/// Points lying outside the reference box (they contribute nothing).
pub fn points_outside(points: &[SolutionPoint], reference: SolutionPoint) -> usize {
    points.iter().filter(|p| !p.within(reference)).count()
}

/// Area dominated by `points` inside the box bounded by `reference`.
pub fn hypervolume2d(points: &[SolutionPoint], reference: SolutionPoint) -> f64 {
    let inside: Vec<SolutionPoint> = points.iter().copied().filter(|p| p.within(reference)).collect();
    let dropped = points.len() - inside.len();
    if dropped > 0 {
        log::warn!("hypervolume: {dropped} point(s) outside the reference box ignored");
    }
    let front = pareto_front(&inside);
    let mut area = 0.0;
    for (i, p) in front.iter().enumerate() {
        let right = front.get(i + 1).map_or(reference.dev, |n| n.dev);
        area += (right - p.dev) * (reference.upd - p.upd);
    }
    area
}

/// Scales deviations by the no-update baseline and update counts by the
/// maximum possible count.
pub fn normalize_solutions(points: &[SolutionPoint], baseline_dev: f64, max_updates: f64) -> Result<Vec<SolutionPoint>> {
    if !(baseline_dev > 0.0 && baseline_dev.is_finite()) {
        return Err(SimError::InvalidInput(format!(
            "baseline deviation must be positive, got {baseline_dev}"
        )));
    }
    if !(max_updates > 0.0 && max_updates.is_finite()) {
        return Err(SimError::InvalidInput(format!(
            "maximum update count must be positive, got {max_updates}"
        )));
    }
    Ok(points
        .iter()
        .map(|p| SolutionPoint::new(p.dev / baseline_dev, p.upd / max_updates))
        .collect())
}

/// Scalars one checker loads into memory per step, for both worlds.
///
/// `None` for the fine-grained action checker, whose cost depends on the
/// actions taken; see [`action2_memory_cost`].
pub fn comparison_memory_cost(checker: Checker, drones: usize, objects: usize) -> Option<usize> {
    let edges = drones * drones.saturating_sub(1) / 2;
    match checker {
        Checker::Knowledge => Some(2 * edges),
        Checker::State => Some(2 * 2 * (drones + objects)),
        Checker::Action => Some(2 * drones),
        Checker::Action2 => None,
    }
}

/// Per-step cost of the fine-grained action checker: one header per record
/// plus its detail fields, over both worlds.
pub fn action2_memory_cost(physical: &[ActionRecord], twin: &[ActionRecord], k: usize) -> usize {
    let detail = |r: &ActionRecord| match r.kind {
        ActionKind::Follow => 1,
        ActionKind::NotifyAndFollow => 1 + k.saturating_sub(1),
        ActionKind::RespondAndFollow => 2,
        ActionKind::RandomWalk => 0,
    };
    physical.iter().chain(twin).map(|r| 1 + detail(r)).sum()
}

/// Sample mean and sample standard deviation.
pub fn mean_and_stdev(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
