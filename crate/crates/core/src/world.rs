//! One-step world evolution: agent actions composed with the endogenous
//! motion of objects, plus coverage and utility.

use std::collections::{BTreeMap, BTreeSet};

use crate::agent::{self, Movement};
use crate::model::{ActionRecord, Bounds, DroneId, Message, ObjectId, ObjectState, Vec2, WorldState};
use crate::rng::Streams;

/// How a systematic heading bias acts on an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasMode {
    /// The bias rotates the stored heading, so it compounds step after step.
    #[default]
    Accumulate,
    /// The bias only skews each step's displacement; the heading is kept.
    Fixed,
}

impl std::str::FromStr for BiasMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accumulate" => Ok(BiasMode::Accumulate),
            "fixed" => Ok(BiasMode::Fixed),
            other => Err(format!("unknown bias mode `{other}` (expected accumulate|fixed)")),
        }
    }
}

/// Endogenous dynamics of the object model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectDynamics {
    /// Counter-clockwise heading error in degrees; 0 is the unbiased model.
    pub bias_degrees: f64,
    pub bias_mode: BiasMode,
}

impl ObjectDynamics {
    pub fn unbiased() -> Self {
        Self::default()
    }
}

pub const OBJECT_SPEED: f64 = 1.0;

/// Advances `world` by one step.
///
/// All drones perceive and decide against the state at `t`; moves, message
/// delivery and knowledge updates are applied together afterwards. Then
/// objects move and importance toggles at the period boundary.
pub fn step_world(world: &WorldState, streams: &Streams, dynamics: &ObjectDynamics) -> (WorldState, Vec<ActionRecord>) {
    let t = world.time;
    let params = &world.params;
    let bounds = params.bounds();
    let roster = world.roster();

    let perceptions: Vec<_> = world
        .drones
        .iter()
        .map(|d| agent::perceive(world, d.id).expect("drone from the world's own roster"))
        .collect();

    let decisions: Vec<_> = world
        .drones
        .iter()
        .zip(&perceptions)
        .map(|(d, p)| {
            let mut rng = streams.agent(d.id, t);
            agent::decide(p, &d.graph, &roster, &mut rng, params.k)
        })
        .collect();

    let mut next = world.clone();
    let mut deliveries: BTreeMap<DroneId, Vec<Message>> = BTreeMap::new();
    for ((drone, decision), perception) in next.drones.iter_mut().zip(&decisions).zip(&perceptions) {
        drone.position = match decision.movement {
            Movement::Toward(target) => move_point_toward(drone.position, target, decision.distance, bounds),
            Movement::Heading(deg) => {
                (drone.position + Vec2::from_heading(deg) * decision.distance).clamp_to(bounds)
            }
        };
        for m in &decision.outgoing {
            deliveries.entry(m.recipient).or_default().push(m.clone());
        }
        drone.graph = agent::evolve_knowledge(&drone.graph, perception, params.gamma, params.delta);
    }
    for drone in &mut next.drones {
        drone.inbox = deliveries.remove(&drone.id).unwrap_or_default();
    }

    for obj in &mut next.objects {
        *obj = move_object(obj, dynamics, bounds);
    }
    next.time = t + 1;
    toggle_importance(&mut next, params.importance_period);

    let actions = decisions.into_iter().map(|d| d.action).collect();
    (next, actions)
}

/// Moves `from` up to `dist` toward `to`, never overshooting, clamped to bounds.
pub fn move_point_toward(from: Vec2, to: Vec2, dist: f64, bounds: Bounds) -> Vec2 {
    let gap = to - from;
    let len = gap.norm();
    let p = if len <= dist {
        to
    } else if len == 0.0 {
        from
    } else {
        from + gap * (dist / len)
    };
    p.clamp_to(bounds)
}

/// Moves an object one unit along its (possibly biased) heading, bouncing
/// off the walls.
pub fn move_object(obj: &ObjectState, dynamics: &ObjectDynamics, bounds: Bounds) -> ObjectState {
    let travel_heading = obj.direction + dynamics.bias_degrees;
    let mut stored_heading = match dynamics.bias_mode {
        BiasMode::Accumulate => travel_heading,
        BiasMode::Fixed => obj.direction,
    };
    let step = Vec2::from_heading(travel_heading) * OBJECT_SPEED;
    let mut p = obj.position + step;

    let (mut flip_x, mut flip_y) = (false, false);
    // A unit step can cross at most one wall per axis in any sane world, but
    // loop anyway so tiny worlds stay inside.
    while !(0.0..=bounds.width).contains(&p.x) {
        p.x = if p.x < 0.0 { -p.x } else { 2.0 * bounds.width - p.x };
        flip_x = !flip_x;
    }
    while !(0.0..=bounds.height).contains(&p.y) {
        p.y = if p.y < 0.0 { -p.y } else { 2.0 * bounds.height - p.y };
        flip_y = !flip_y;
    }
    if flip_x {
        stored_heading = 180.0 - stored_heading;
    }
    if flip_y {
        stored_heading = -stored_heading;
    }

    ObjectState {
        id: obj.id,
        position: p,
        direction: normalize_degrees(stored_heading),
        important: obj.important,
    }
}

fn normalize_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs.
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Flips every object's importance when `world.time` is a positive multiple
/// of `period`.
pub fn toggle_importance(world: &mut WorldState, period: u64) {
    let t = world.time;
    if t > 0 && period > 0 && t.is_multiple_of(period) {
        for o in &mut world.objects {
            o.important = !o.important;
        }
    }
}

/// Covering drones of every object.
pub fn coverage_map(world: &WorldState) -> BTreeMap<ObjectId, BTreeSet<DroneId>> {
    let range = world.params.range;
    world
        .objects
        .iter()
        .map(|o| {
            let covering = world
                .drones
                .iter()
                .filter(|d| d.position.distance(o.position) <= range)
                .map(|d| d.id)
                .collect();
            (o.id, covering)
        })
        .collect()
}

/// Fraction of all objects covered by at least `k` drones.
pub fn utility_k(world: &WorldState, k: usize) -> f64 {
    if world.objects.is_empty() {
        return 0.0;
    }
    let covered = coverage_map(world).values().filter(|s| s.len() >= k).count();
    covered as f64 / world.objects.len() as f64
}
