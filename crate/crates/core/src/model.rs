//! Domain types shared by the simulator, the equivalence checkers and the
//! twin harness.
//!
//! Everything here is a plain value. A [`WorldState`] owns its objects and
//! drones, and every drone owns its interaction graph, so cloning a world
//! yields a fully independent instance (which is how the twin is made).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Identifier of a drone (agent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DroneId(pub u32);

/// Identifier of a tracked object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for DroneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point or displacement in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector for a heading in degrees, counter-clockwise from east.
    pub fn from_heading(degrees: f64) -> Self {
        let (sin, cos) = degrees.to_radians().sin_cos();
        Self { x: cos, y: sin }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (other - self).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn clamp_to(self, bounds: Bounds) -> Vec2 {
        Vec2 {
            x: self.x.clamp(0.0, bounds.width),
            y: self.y.clamp(0.0, bounds.height),
        }
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// The rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub width: f64,
    pub height: f64,
}

impl Bounds {
    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: ObjectId,
    pub position: Vec2,
    /// Heading in degrees, counter-clockwise from east.
    pub direction: f64,
    pub important: bool,
}

/// A help request advertising an object to another drone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: DroneId,
    pub recipient: DroneId,
    pub object: ObjectId,
    pub object_position: Vec2,
    pub sent_at: u64,
}

/// Interaction awareness of one drone: pheromone weights on the edges
/// between the owner and every other drone.
///
/// Only nonzero weights are stored; an absent edge weighs 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    owner: DroneId,
    weights: BTreeMap<DroneId, f64>,
}

impl KnowledgeGraph {
    pub fn new(owner: DroneId) -> Self {
        Self {
            owner,
            weights: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> DroneId {
        self.owner
    }

    /// Weight of the edge `{owner, other}`.
    pub fn weight(&self, other: DroneId) -> f64 {
        self.weights.get(&other).copied().unwrap_or(0.0)
    }

    /// Weight of the unordered edge `{a, b}`; zero unless the owner is one of them.
    pub fn edge(&self, a: DroneId, b: DroneId) -> f64 {
        if a == self.owner {
            self.weight(b)
        } else if b == self.owner {
            self.weight(a)
        } else {
            0.0
        }
    }

    pub fn set_weight(&mut self, other: DroneId, weight: f64) -> Result<()> {
        if other == self.owner {
            return Err(SimError::InvalidInput(format!(
                "self-loop on drone {} is not an interaction edge",
                self.owner
            )));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(SimError::InvalidInput(format!(
                "edge weight must be finite and non-negative, got {weight}"
            )));
        }
        if weight == 0.0 {
            self.weights.remove(&other);
        } else {
            self.weights.insert(other, weight);
        }
        Ok(())
    }

    /// Multiplies every edge by `gamma`.
    pub fn evaporate(&mut self, gamma: f64) {
        for w in self.weights.values_mut() {
            *w *= gamma;
        }
        self.weights.retain(|_, w| *w > 0.0);
    }

    pub fn strengthen(&mut self, other: DroneId, delta: f64) {
        debug_assert_ne!(other, self.owner);
        *self.weights.entry(other).or_insert(0.0) += delta;
    }

    pub fn clear(&mut self) {
        self.weights.clear();
    }

    /// Nonzero edges as `(other, weight)` in ascending id order.
    pub fn edges(&self) -> impl Iterator<Item = (DroneId, f64)> + '_ {
        self.weights.iter().map(|(&d, &w)| (d, w))
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.values().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub id: DroneId,
    pub position: Vec2,
    /// Messages delivered at the current step. They are considered once.
    pub inbox: Vec<Message>,
    pub graph: KnowledgeGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldParams {
    pub width: f64,
    pub height: f64,
    /// Coverage requirement.
    pub k: usize,
    /// Sensing radius of every camera.
    pub range: f64,
    /// Pheromone evaporation factor.
    pub gamma: f64,
    /// Pheromone strengthening increment.
    pub delta: f64,
    /// Steps between global importance toggles.
    pub importance_period: u64,
}

impl WorldParams {
    pub fn bounds(&self) -> Bounds {
        Bounds {
            width: self.width,
            height: self.height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidScene(violations))
        }
    }

    fn violations(&self) -> Vec<SceneViolation> {
        let mut out = Vec::new();
        let mut bad = |what: &str, detail: String| {
            out.push(SceneViolation::BadParameter {
                name: what.to_string(),
                detail,
            })
        };
        if !(self.width.is_finite() && self.width > 0.0) {
            bad("width", format!("{} is not a positive finite length", self.width));
        }
        if !(self.height.is_finite() && self.height > 0.0) {
            bad("height", format!("{} is not a positive finite length", self.height));
        }
        if self.k < 1 {
            bad("k", "coverage requirement must be at least 1".into());
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            bad("range", format!("{} is not a positive finite radius", self.range));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            bad("gamma", format!("{} is outside (0, 1)", self.gamma));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            bad("delta", format!("{} is not positive", self.delta));
        }
        if self.importance_period < 1 {
            bad("importance_period", "must be at least 1 step".into());
        }
        out
    }

    /// Upper bound on any single pheromone weight given `n_objects` objects.
    pub fn weight_bound(&self, n_objects: usize) -> f64 {
        self.delta * n_objects as f64 / (1.0 - self.gamma)
    }
}

/// Complete state of one world instance at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: u64,
    /// Sorted by id.
    pub objects: Vec<ObjectState>,
    /// Sorted by id.
    pub drones: Vec<DroneState>,
    pub params: WorldParams,
}

impl WorldState {
    /// Builds the initial world (time 0, zero knowledge, empty inboxes).
    pub fn from_scene(scene: &SceneSpec) -> Result<Self> {
        scene.validate().map_err(SimError::InvalidScene)?;
        let mut objects: Vec<ObjectState> = scene
            .objects
            .iter()
            .map(|o| ObjectState {
                id: ObjectId(o.id),
                position: Vec2::new(o.x, o.y),
                direction: o.direction,
                important: o.important,
            })
            .collect();
        objects.sort_by_key(|o| o.id);
        let mut drones: Vec<DroneState> = scene
            .drones
            .iter()
            .map(|d| DroneState {
                id: DroneId(d.id),
                position: Vec2::new(d.x, d.y),
                inbox: Vec::new(),
                graph: KnowledgeGraph::new(DroneId(d.id)),
            })
            .collect();
        drones.sort_by_key(|d| d.id);
        Ok(Self {
            time: 0,
            objects,
            drones,
            params: scene.params(),
        })
    }

    pub fn drone(&self, id: DroneId) -> Option<&DroneState> {
        self.drones
            .binary_search_by_key(&id, |d| d.id)
            .ok()
            .map(|i| &self.drones[i])
    }

    pub fn drone_index(&self, id: DroneId) -> Option<usize> {
        self.drones.binary_search_by_key(&id, |d| d.id).ok()
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectState> {
        self.objects
            .binary_search_by_key(&id, |o| o.id)
            .ok()
            .map(|i| &self.objects[i])
    }

    pub fn roster(&self) -> Vec<DroneId> {
        self.drones.iter().map(|d| d.id).collect()
    }
}

/// The four action categories a drone can take in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Follow,
    NotifyAndFollow,
    RespondAndFollow,
    RandomWalk,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::Follow,
        ActionKind::NotifyAndFollow,
        ActionKind::RespondAndFollow,
        ActionKind::RandomWalk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Follow => "follow",
            ActionKind::NotifyAndFollow => "notify-and-follow",
            ActionKind::RespondAndFollow => "respond-and-follow",
            ActionKind::RandomWalk => "random-walk",
        }
    }
}

/// What one drone did in one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub drone: DroneId,
    pub kind: ActionKind,
    pub followed_object: Option<ObjectId>,
    pub notified: BTreeSet<DroneId>,
    pub responded_to: Option<DroneId>,
}

impl ActionRecord {
    pub fn follow(drone: DroneId, object: ObjectId) -> Self {
        Self {
            drone,
            kind: ActionKind::Follow,
            followed_object: Some(object),
            notified: BTreeSet::new(),
            responded_to: None,
        }
    }

    pub fn notify_and_follow(drone: DroneId, object: ObjectId, notified: BTreeSet<DroneId>) -> Self {
        Self {
            drone,
            kind: ActionKind::NotifyAndFollow,
            followed_object: Some(object),
            notified,
            responded_to: None,
        }
    }

    pub fn respond_and_follow(drone: DroneId, object: ObjectId, sender: DroneId) -> Self {
        Self {
            drone,
            kind: ActionKind::RespondAndFollow,
            followed_object: Some(object),
            notified: BTreeSet::new(),
            responded_to: Some(sender),
        }
    }

    pub fn random_walk(drone: DroneId) -> Self {
        Self {
            drone,
            kind: ActionKind::RandomWalk,
            followed_object: None,
            notified: BTreeSet::new(),
            responded_to: None,
        }
    }

    /// Checks that the detail fields agree with the kind.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            ActionKind::Follow => {
                self.followed_object.is_some() && self.notified.is_empty() && self.responded_to.is_none()
            }
            ActionKind::NotifyAndFollow => self.followed_object.is_some() && self.responded_to.is_none(),
            ActionKind::RespondAndFollow => {
                self.followed_object.is_some() && self.notified.is_empty() && self.responded_to.is_some()
            }
            ActionKind::RandomWalk => {
                self.followed_object.is_none() && self.notified.is_empty() && self.responded_to.is_none()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSpec {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub direction: f64,
    pub important: bool,
}

/// On-disk scene description (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: f64,
    pub height: f64,
    pub k: usize,
    pub range: f64,
    pub gamma: f64,
    pub delta: f64,
    pub importance_period: u64,
    pub drones: Vec<DroneSpec>,
    pub objects: Vec<ObjectSpec>,
}

/// One problem found by [`SceneSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum SceneViolation {
    DuplicateDroneId(u32),
    DuplicateObjectId(u32),
    DroneOutOfBounds { id: u32, x: f64, y: f64 },
    ObjectOutOfBounds { id: u32, x: f64, y: f64 },
    NonFiniteDrone { id: u32 },
    NonFiniteObject { id: u32 },
    NoDrones,
    NoObjects,
    BadParameter { name: String, detail: String },
}

impl fmt::Display for SceneViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneViolation::DuplicateDroneId(id) => write!(f, "duplicate drone id {id}"),
            SceneViolation::DuplicateObjectId(id) => write!(f, "duplicate object id {id}"),
            SceneViolation::DroneOutOfBounds { id, x, y } => {
                write!(f, "drone {id} at ({x}, {y}) is out of bounds")
            }
            SceneViolation::ObjectOutOfBounds { id, x, y } => {
                write!(f, "object {id} at ({x}, {y}) is out of bounds")
            }
            SceneViolation::NonFiniteDrone { id } => write!(f, "drone {id} has a non-finite coordinate"),
            SceneViolation::NonFiniteObject { id } => {
                write!(f, "object {id} has a non-finite coordinate or direction")
            }
            SceneViolation::NoDrones => write!(f, "scene has no drones"),
            SceneViolation::NoObjects => write!(f, "scene has no objects"),
            SceneViolation::BadParameter { name, detail } => write!(f, "parameter {name}: {detail}"),
        }
    }
}

impl SceneSpec {
    pub fn params(&self) -> WorldParams {
        WorldParams {
            width: self.width,
            height: self.height,
            k: self.k,
            range: self.range,
            gamma: self.gamma,
            delta: self.delta,
            importance_period: self.importance_period,
        }
    }

    /// Collects every violation instead of stopping at the first.
    pub fn validate(&self) -> std::result::Result<(), Vec<SceneViolation>> {
        let params = self.params();
        let mut out = params.violations();
        let bounds = params.bounds();

        if self.drones.is_empty() {
            out.push(SceneViolation::NoDrones);
        }
        if self.objects.is_empty() {
            out.push(SceneViolation::NoObjects);
        }

        let mut seen = BTreeSet::new();
        for d in &self.drones {
            if !seen.insert(d.id) {
                out.push(SceneViolation::DuplicateDroneId(d.id));
            }
            let p = Vec2::new(d.x, d.y);
            if !p.is_finite() {
                out.push(SceneViolation::NonFiniteDrone { id: d.id });
            } else if !bounds.contains(p) {
                out.push(SceneViolation::DroneOutOfBounds { id: d.id, x: d.x, y: d.y });
            }
        }

        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(o.id) {
                out.push(SceneViolation::DuplicateObjectId(o.id));
            }
            let p = Vec2::new(o.x, o.y);
            if !p.is_finite() || !o.direction.is_finite() {
                out.push(SceneViolation::NonFiniteObject { id: o.id });
            } else if !bounds.contains(p) {
                out.push(SceneViolation::ObjectOutOfBounds { id: o.id, x: o.x, y: o.y });
            }
        }

        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        // Serializing plain numbers and strings cannot fail.
        serde_json::to_string_pretty(self).expect("scene serializes") + "\n"
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }
}
