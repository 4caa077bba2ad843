//! Equivalence checkers: what is compared between the physical world and
//! its twin, how two snapshots are scored, and the windowed threshold test
//! that decides when the twin must be re-synchronised.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::model::{ActionKind, ActionRecord, WorldState};

/// Tolerance for the two owners' copies of one edge.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Edge weights for every unordered drone pair `{i, j}`, `i < j`, in
/// lexicographic pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeVector(pub Vec<f64>);

/// Object coordinates in id order followed by drone coordinates in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<f64>);

/// Reads the knowledge vector of a world. Each edge comes from the lower-id
/// owner and is cross-checked against the higher-id owner's copy.
pub fn knowledge_vector(world: &WorldState) -> Result<KnowledgeVector> {
    let m = world.drones.len();
    let mut out = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for (i, a) in world.drones.iter().enumerate() {
        for b in &world.drones[i + 1..] {
            let left = a.graph.weight(b.id);
            let right = b.graph.weight(a.id);
            if (left - right).abs() > SYMMETRY_TOLERANCE {
                return Err(SimError::AsymmetricKnowledge {
                    a: a.id.0,
                    b: b.id.0,
                    left,
                    right,
                });
            }
            out.push(left);
        }
    }
    Ok(KnowledgeVector(out))
}

pub fn state_vector(world: &WorldState) -> StateVector {
    let mut out = Vec::with_capacity(2 * (world.objects.len() + world.drones.len()));
    for o in &world.objects {
        out.extend([o.position.x, o.position.y]);
    }
    for d in &world.drones {
        out.extend([d.position.x, d.position.y]);
    }
    StateVector(out)
}

fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SimError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Knowledge drift: Euclidean distance between two knowledge vectors.
pub fn drift(w: &KnowledgeVector, w_twin: &KnowledgeVector) -> Result<f64> {
    euclidean(&w.0, &w_twin.0)
}

pub fn state_deviation(s: &StateVector, s_twin: &StateVector) -> Result<f64> {
    euclidean(&s.0, &s_twin.0)
}

fn check_same_drones(a: &[ActionRecord], b: &[ActionRecord]) -> Result<()> {
    if a.len() != b.len() {
        return Err(SimError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.iter().zip(b).any(|(x, y)| x.drone != y.drone) {
        return Err(SimError::DroneSetMismatch);
    }
    Ok(())
}

/// Fraction of drones whose action category differs between the worlds.
///
/// Both sequences must list the same drones in the same order.
pub fn coarse_action_deviation(a: &[ActionRecord], a_twin: &[ActionRecord]) -> Result<f64> {
    check_same_drones(a, a_twin)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let mismatches = a.iter().zip(a_twin).filter(|(x, y)| x.kind != y.kind).count();
    Ok(mismatches as f64 / a.len() as f64)
}

/// Detail-aware deviation between one drone's physical and twin actions.
pub fn fine_action_deviation(rec: &ActionRecord, rec_twin: &ActionRecord, k: usize) -> Result<f64> {
    use ActionKind::*;
    if rec.drone != rec_twin.drone {
        return Err(SimError::DroneSetMismatch);
    }
    if k < 2 {
        return Err(SimError::InvalidInput(
            "fine-grained action deviation needs k >= 2".into(),
        ));
    }
    let same_object = rec.followed_object == rec_twin.followed_object;
    let d = match (rec.kind, rec_twin.kind) {
        (RandomWalk, RandomWalk) => 0.0,
        (Follow, Follow) => {
            if same_object {
                0.0
            } else {
                1.0
            }
        }
        (RespondAndFollow, RespondAndFollow) => {
            let mut d = 0.4;
            if rec.responded_to == rec_twin.responded_to {
                d -= 0.2;
            }
            if same_object {
                d -= 0.2;
            }
            d
        }
        (NotifyAndFollow, NotifyAndFollow) => {
            let common = rec.notified.intersection(&rec_twin.notified).count();
            // A roster smaller than k leaves fewer than k - 1 drones to notify.
            let slots = (k - 1).min(rec.notified.len().max(rec_twin.notified.len()));
            let base = if slots == 0 {
                0.0
            } else {
                0.5 * (1.0 - common as f64 / slots as f64)
            };
            if same_object {
                base
            } else {
                base + 0.5
            }
        }
        (Follow, NotifyAndFollow) | (NotifyAndFollow, Follow) if same_object => 0.5,
        _ => 1.0,
    };
    Ok(d)
}

/// Mean fine-grained deviation over all drones.
pub fn mean_fine_action_deviation(a: &[ActionRecord], a_twin: &[ActionRecord], k: usize) -> Result<f64> {
    check_same_drones(a, a_twin)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(a_twin) {
        total += fine_action_deviation(x, y, k)?;
    }
    Ok(total / a.len() as f64)
}

/// Which aspect of the two worlds is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Checker {
    State,
    Knowledge,
    /// Coarse action comparison (category only).
    Action,
    /// Fine-grained action comparison.
    Action2,
}

impl Checker {
    pub const ALL: [Checker; 4] = [Checker::State, Checker::Knowledge, Checker::Action, Checker::Action2];

    pub fn as_str(self) -> &'static str {
        match self {
            Checker::State => "state",
            Checker::Knowledge => "knowledge",
            Checker::Action => "action",
            Checker::Action2 => "action2",
        }
    }

    /// What this checker needs to remember about one world at one step.
    pub fn payload(self, world: &WorldState, actions: &[ActionRecord]) -> Result<Payload> {
        Ok(match self {
            Checker::State => Payload::State(state_vector(world)),
            Checker::Knowledge => Payload::Knowledge(knowledge_vector(world)?),
            Checker::Action | Checker::Action2 => Payload::Actions(actions.to_vec()),
        })
    }

    /// Scores one physical/twin payload pair.
    pub fn metric(self, physical: &Payload, twin: &Payload, k: usize) -> Result<f64> {
        match (self, physical, twin) {
            (Checker::State, Payload::State(a), Payload::State(b)) => state_deviation(a, b),
            (Checker::Knowledge, Payload::Knowledge(a), Payload::Knowledge(b)) => drift(a, b),
            (Checker::Action, Payload::Actions(a), Payload::Actions(b)) => coarse_action_deviation(a, b),
            (Checker::Action2, Payload::Actions(a), Payload::Actions(b)) => mean_fine_action_deviation(a, b, k),
            _ => Err(SimError::InvalidInput(format!(
                "payload kind does not match checker {}",
                self.as_str()
            ))),
        }
    }
}

impl fmt::Display for Checker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Checker {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "state" => Ok(Checker::State),
            "knowledge" => Ok(Checker::Knowledge),
            "action" => Ok(Checker::Action),
            "action2" => Ok(Checker::Action2),
            other => Err(SimError::InvalidInput(format!(
                "unknown checker `{other}` (expected state|knowledge|action|action2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    State(StateVector),
    Knowledge(KnowledgeVector),
    Actions(Vec<ActionRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry<P> {
    pub time: u64,
    pub physical: P,
    pub twin: P,
}

/// Time-aligned ring buffer of comparison payloads for both worlds.
#[derive(Debug, Clone)]
pub struct CheckerHistory<P> {
    entries: VecDeque<HistoryEntry<P>>,
    capacity: usize,
}

impl<P> CheckerHistory<P> {
    /// Keeps the last `window + 1` steps, enough for a window of length `window`.
    pub fn new(window: usize) -> Self {
        let capacity = window + 1;
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, time: u64, physical: P, twin: P) {
        debug_assert!(self.entries.back().is_none_or(|e| e.time < time));
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(HistoryEntry { time, physical, twin });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latest(&self) -> Option<&HistoryEntry<P>> {
        self.entries.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &HistoryEntry<P>> {
        self.entries.iter()
    }
}

/// Parameters of the periodic windowed comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSchedule {
    /// Compare every `interval` steps.
    pub interval: u64,
    /// Window length; the sum covers steps `t - window ..= t`.
    pub window: u64,
    /// Trigger when the window sum strictly exceeds this. `+inf` never triggers.
    pub threshold: f64,
}

impl CheckSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.interval < 1 {
            return Err(SimError::InvalidConfig("comparison interval q must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(SimError::InvalidConfig("comparison window l must be >= 1".into()));
        }
        if self.threshold.is_nan() {
            return Err(SimError::InvalidConfig("threshold must not be NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckOutcome {
    /// `t` is not a comparison tick.
    Skipped,
    Checked { accumulated: f64, triggered: bool },
}

impl CheckOutcome {
    pub fn triggered(&self) -> bool {
        matches!(self, CheckOutcome::Checked { triggered: true, .. })
    }
}

/// Windowed threshold test at time `t`.
///
/// Runs only when `t` is a multiple of the interval; sums `metric` over the
/// entries with time in `max(0, t - window) ..= t` (whatever of that range is
/// still held) and triggers iff the sum exceeds the threshold.
pub fn windowed_check<P, F>(history: &CheckerHistory<P>, t: u64, schedule: &CheckSchedule, mut metric: F) -> Result<CheckOutcome>
where
    F: FnMut(&P, &P) -> Result<f64>,
{
    schedule.validate()?;
    if !t.is_multiple_of(schedule.interval) {
        return Ok(CheckOutcome::Skipped);
    }
    let from = t.saturating_sub(schedule.window);
    let mut accumulated = 0.0;
    for e in history.iter().filter(|e| (from..=t).contains(&e.time)) {
        accumulated += metric(&e.physical, &e.twin)?;
    }
    Ok(CheckOutcome::Checked {
        accumulated,
        triggered: accumulated > schedule.threshold,
    })
}
