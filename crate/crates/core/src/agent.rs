//! The self-aware drone agent: sensing, decision making and the pheromone
//! update of its interaction graph.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Result, SimError};
use crate::model::{ActionKind, ActionRecord, DroneId, KnowledgeGraph, Message, ObjectId, Vec2, WorldState};

/// Movement distances per action category.
pub const FOLLOW_STEP: f64 = 1.0;
pub const RESPOND_STEP: f64 = 2.0;
pub const RANDOM_WALK_STEP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SensedObject {
    pub id: ObjectId,
    pub position: Vec2,
    pub important: bool,
}

/// What one drone knows about the world at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Perception {
    pub time: u64,
    pub drone: DroneId,
    pub position: Vec2,
    /// Sorted by object id.
    pub objects_in_range: Vec<SensedObject>,
    /// `(other drone, object)` pairs where the other drone covers an object
    /// this drone also covers.
    pub co_cover: BTreeSet<(DroneId, ObjectId)>,
    pub inbox: Vec<Message>,
}

impl Perception {
    fn sensed(&self, id: ObjectId) -> Option<&SensedObject> {
        self.objects_in_range.iter().find(|o| o.id == id)
    }

    /// Number of other drones seen covering `object`.
    pub fn co_coverers(&self, object: ObjectId) -> usize {
        self.co_cover.iter().filter(|(_, o)| *o == object).count()
    }

    /// Local k-coverage test: this drone plus `k - 1` observed co-coverers.
    pub fn is_k_covered(&self, object: ObjectId, k: usize) -> bool {
        1 + self.co_coverers(object) >= k
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Movement {
    Toward(Vec2),
    /// Heading in degrees.
    Heading(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: ActionRecord,
    pub movement: Movement,
    pub distance: f64,
    pub outgoing: Vec<Message>,
}

pub fn perceive(world: &WorldState, drone: DroneId) -> Result<Perception> {
    let me = world.drone(drone).ok_or(SimError::UnknownDrone(drone.0))?;
    let range = world.params.range;

    let objects_in_range: Vec<SensedObject> = world
        .objects
        .iter()
        .filter(|o| me.position.distance(o.position) <= range)
        .map(|o| SensedObject {
            id: o.id,
            position: o.position,
            important: o.important,
        })
        .collect();

    let mut co_cover = BTreeSet::new();
    for other in world.drones.iter().filter(|d| d.id != drone) {
        for o in &objects_in_range {
            if other.position.distance(o.position) <= range {
                co_cover.insert((other.id, o.id));
            }
        }
    }

    Ok(Perception {
        time: world.time,
        drone,
        position: me.position,
        objects_in_range,
        co_cover,
        inbox: me.inbox.clone(),
    })
}

/// The `k - 1` strongest links of `self_id`, ties by ascending id.
///
/// Every drone on the roster is eligible, including those with weight 0.
pub fn select_notify_targets(graph: &KnowledgeGraph, roster: &[DroneId], k: usize) -> BTreeSet<DroneId> {
    let me = graph.owner();
    let mut candidates: Vec<(DroneId, f64)> = roster
        .iter()
        .copied()
        .filter(|&d| d != me)
        .map(|d| (d, graph.weight(d)))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.dedup_by_key(|c| c.0);
    candidates
        .into_iter()
        .take(k.saturating_sub(1))
        .map(|(d, _)| d)
        .collect()
}

/// The request to accept: strongest sender first, then the most recent, then
/// the lowest sender id.
pub fn select_response<'a>(inbox: &'a [Message], graph: &KnowledgeGraph) -> Option<&'a Message> {
    inbox.iter().min_by(|a, b| {
        graph
            .weight(b.sender)
            .total_cmp(&graph.weight(a.sender))
            .then(b.sent_at.cmp(&a.sent_at))
            .then(a.sender.cmp(&b.sender))
            .then(Ordering::Equal)
    })
}

/// Chooses this step's action. Pure in `(perception, graph, roster, rng, k)`.
pub fn decide<R: Rng + ?Sized>(
    perception: &Perception,
    graph: &KnowledgeGraph,
    roster: &[DroneId],
    rng: &mut R,
    k: usize,
) -> Decision {
    let me = perception.drone;
    // objects_in_range is id-sorted, so the draw does not depend on sensing order.
    let important: Vec<&SensedObject> = perception.objects_in_range.iter().filter(|o| o.important).collect();

    if !important.is_empty() {
        let target = important[rng.random_range(0..important.len())];
        let movement = Movement::Toward(target.position);
        if perception.is_k_covered(target.id, k) {
            return Decision {
                action: ActionRecord::follow(me, target.id),
                movement,
                distance: FOLLOW_STEP,
                outgoing: Vec::new(),
            };
        }
        let notified = select_notify_targets(graph, roster, k);
        let outgoing = notified
            .iter()
            .map(|&recipient| Message {
                sender: me,
                recipient,
                object: target.id,
                object_position: target.position,
                sent_at: perception.time,
            })
            .collect();
        return Decision {
            action: ActionRecord::notify_and_follow(me, target.id, notified),
            movement,
            distance: FOLLOW_STEP,
            outgoing,
        };
    }

    if let Some(msg) = select_response(&perception.inbox, graph) {
        return Decision {
            action: ActionRecord::respond_and_follow(me, msg.object, msg.sender),
            movement: Movement::Toward(msg.object_position),
            distance: RESPOND_STEP,
            outgoing: Vec::new(),
        };
    }

    let angle = rng.random_range(0.0..360.0);
    Decision {
        action: ActionRecord::random_walk(me),
        movement: Movement::Heading(angle),
        distance: RANDOM_WALK_STEP,
        outgoing: Vec::new(),
    }
}

/// Evaporates every edge by `gamma`, then adds `delta` per important object
/// shared with each co-covering drone.
pub fn evolve_knowledge(graph: &KnowledgeGraph, perception: &Perception, gamma: f64, delta: f64) -> KnowledgeGraph {
    let mut next = graph.clone();
    next.evaporate(gamma);
    for &(other, object) in &perception.co_cover {
        if perception.sensed(object).is_some_and(|o| o.important) {
            next.strengthen(other, delta);
        }
    }
    next
}

/// Distance a decision of this kind moves the drone.
pub fn step_length(kind: ActionKind) -> f64 {
    match kind {
        ActionKind::Follow | ActionKind::NotifyAndFollow => FOLLOW_STEP,
        ActionKind::RespondAndFollow => RESPOND_STEP,
        ActionKind::RandomWalk => RANDOM_WALK_STEP,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DroneSpec, ObjectSpec, SceneSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene(drones: &[(u32, f64, f64)], objects: &[(u32, f64, f64, bool)]) -> WorldState {
        let spec = SceneSpec {
            width: 50.0,
            height: 50.0,
            k: 2,
            range: 10.0,
            gamma: 0.9,
            delta: 1.0,
            importance_period: 30,
            drones: drones.iter().map(|&(id, x, y)| DroneSpec { id, x, y }).collect(),
            objects: objects
                .iter()
                .map(|&(id, x, y, important)| ObjectSpec {
                    id,
                    x,
                    y,
                    direction: 0.0,
                    important,
                })
                .collect(),
        };
        WorldState::from_scene(&spec).unwrap()
    }

    fn graph(owner: u32, weights: &[(u32, f64)]) -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new(DroneId(owner));
        for &(d, w) in weights {
            g.set_weight(DroneId(d), w).unwrap();
        }
        g
    }

    fn msg(sender: u32, object: u32, sent_at: u64) -> Message {
        Message {
            sender: DroneId(sender),
            recipient: DroneId(1),
            object: ObjectId(object),
            object_position: Vec2::new(object as f64, 0.0),
            sent_at,
        }
    }

    #[test]
    fn range_boundary_is_inclusive() {
        let w = scene(&[(1, 0.0, 0.0)], &[(1, 6.0, 8.0, true), (2, 7.0, 8.0, true)]);
        let p = perceive(&w, DroneId(1)).unwrap();
        let ids: Vec<_> = p.objects_in_range.iter().map(|o| o.id).collect();
        // (7, 8) is sqrt(113) away.
        assert_eq!(ids, vec![ObjectId(1)]);
    }

    #[test]
    fn co_cover_is_mutual() {
        let w = scene(&[(1, 10.0, 10.0), (2, 14.0, 10.0)], &[(4, 12.0, 10.0, true)]);
        let p1 = perceive(&w, DroneId(1)).unwrap();
        let p2 = perceive(&w, DroneId(2)).unwrap();
        assert!(p1.co_cover.contains(&(DroneId(2), ObjectId(4))));
        assert!(p2.co_cover.contains(&(DroneId(1), ObjectId(4))));
    }

    #[test]
    fn unknown_drone_rejected() {
        let w = scene(&[(1, 0.0, 0.0)], &[(1, 6.0, 8.0, true)]);
        assert!(matches!(perceive(&w, DroneId(9)), Err(SimError::UnknownDrone(9))));
    }

    #[test]
    fn notify_targets() {
        let roster = [DroneId(1), DroneId(2), DroneId(3)];
        let g = graph(1, &[(2, 3.0), (3, 1.0)]);
        assert_eq!(select_notify_targets(&g, &roster, 2), BTreeSet::from([DroneId(2)]));
        let tied = graph(1, &[(2, 2.0), (3, 2.0)]);
        assert_eq!(select_notify_targets(&tied, &roster, 2), BTreeSet::from([DroneId(2)]));
        let pair = [DroneId(1), DroneId(2)];
        assert_eq!(select_notify_targets(&g, &pair, 3), BTreeSet::from([DroneId(2)]));
        // Zero-weight drones are still eligible.
        assert_eq!(select_notify_targets(&KnowledgeGraph::new(DroneId(1)), &roster, 2), BTreeSet::from([DroneId(2)]));
        assert!(select_notify_targets(&g, &roster, 1).is_empty());
    }

    #[test]
    fn response_ranking() {
        let g = graph(1, &[(2, 5.0), (3, 2.0)]);
        assert!(select_response(&[], &g).is_none());
        let inbox = [msg(3, 30, 7), msg(2, 20, 7)];
        assert_eq!(select_response(&inbox, &g).unwrap().sender, DroneId(2));
        let inbox = [msg(2, 20, 7), msg(2, 21, 9)];
        assert_eq!(select_response(&inbox, &g).unwrap().object, ObjectId(21));
        let zero = KnowledgeGraph::new(DroneId(1));
        let inbox = [msg(5, 50, 7), msg(4, 40, 7)];
        assert_eq!(select_response(&inbox, &zero).unwrap().sender, DroneId(4));
    }

    #[test]
    fn already_k_covered_object_is_followed_silently() {
        let w = scene(&[(1, 10.0, 10.0), (2, 14.0, 10.0)], &[(4, 12.0, 10.0, true)]);
        let p = perceive(&w, DroneId(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = decide(&p, &w.drones[0].graph, &w.roster(), &mut rng, 2);
        assert_eq!(d.action.kind, ActionKind::Follow);
        assert_eq!(d.action.followed_object, Some(ObjectId(4)));
        assert!(d.outgoing.is_empty());
        assert_eq!(d.distance, 1.0);
    }

    #[test]
    fn uncovered_object_triggers_notification() {
        let w = scene(&[(1, 10.0, 10.0), (2, 40.0, 40.0), (3, 45.0, 45.0)], &[(4, 12.0, 10.0, true)]);
        let p = perceive(&w, DroneId(1)).unwrap();
        let mut g = KnowledgeGraph::new(DroneId(1));
        g.set_weight(DroneId(3), 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = decide(&p, &g, &w.roster(), &mut rng, 2);
        assert_eq!(d.action.kind, ActionKind::NotifyAndFollow);
        assert_eq!(d.action.notified, BTreeSet::from([DroneId(3)]));
        assert_eq!(d.outgoing.len(), 1);
        assert_eq!(d.outgoing[0].recipient, DroneId(3));
        assert_eq!(d.outgoing[0].object_position, Vec2::new(12.0, 10.0));
        assert_eq!(d.distance, 1.0);
    }

    #[test]
    fn inbox_without_objects_responds() {
        let mut w = scene(&[(1, 10.0, 10.0), (2, 40.0, 40.0)], &[(4, 45.0, 45.0, true)]);
        w.drones[0].inbox.push(msg(2, 4, 0));
        let p = perceive(&w, DroneId(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = decide(&p, &w.drones[0].graph, &w.roster(), &mut rng, 2);
        assert_eq!(d.action.kind, ActionKind::RespondAndFollow);
        assert_eq!(d.action.responded_to, Some(DroneId(2)));
        assert_eq!(d.distance, 2.0);
    }

    #[test]
    fn nothing_to_do_walks_randomly() {
        let w = scene(&[(1, 10.0, 10.0)], &[(4, 45.0, 45.0, true)]);
        let p = perceive(&w, DroneId(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = decide(&p, &w.drones[0].graph, &w.roster(), &mut rng, 2);
        assert_eq!(d.action.kind, ActionKind::RandomWalk);
        assert_eq!(d.distance, 5.0);
        assert!(matches!(d.movement, Movement::Heading(a) if (0.0..360.0).contains(&a)));
    }

    #[test]
    fn unimportant_objects_are_ignored_by_decisions() {
        let w = scene(&[(1, 10.0, 10.0)], &[(4, 12.0, 10.0, false)]);
        let p = perceive(&w, DroneId(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = decide(&p, &w.drones[0].graph, &w.roster(), &mut rng, 2);
        assert_eq!(d.action.kind, ActionKind::RandomWalk);
    }

    #[test]
    fn evaporation_and_strengthening() {
        // No co-cover: pure decay.
        let w = scene(&[(1, 0.0, 0.0), (2, 40.0, 40.0)], &[(4, 45.0, 45.0, true)]);
        let p = perceive(&w, DroneId(1)).unwrap();
        let g = evolve_knowledge(&graph(1, &[(2, 10.0)]), &p, 0.9, 1.0);
        assert_eq!(g.weight(DroneId(2)), 9.0);

        // One shared important object.
        let w = scene(&[(1, 10.0, 10.0), (2, 14.0, 10.0)], &[(4, 12.0, 10.0, true)]);
        let p = perceive(&w, DroneId(1)).unwrap();
        let g = evolve_knowledge(&KnowledgeGraph::new(DroneId(1)), &p, 0.9, 1.0);
        assert_eq!(g.weight(DroneId(2)), 1.0);

        // Unimportant shared object does not count.
        let w = scene(&[(1, 10.0, 10.0), (2, 14.0, 10.0)], &[(4, 12.0, 10.0, false)]);
        let p = perceive(&w, DroneId(1)).unwrap();
        let g = evolve_knowledge(&KnowledgeGraph::new(DroneId(1)), &p, 0.9, 1.0);
        assert_eq!(g.weight(DroneId(2)), 0.0);
    }

    #[test]
    fn two_shared_objects_add_twice() {
        let w = scene(
            &[(1, 10.0, 10.0), (2, 14.0, 10.0)],
            &[(4, 12.0, 10.0, true), (5, 12.0, 12.0, true)],
        );
        let p = perceive(&w, DroneId(1)).unwrap();
        let g = evolve_knowledge(&KnowledgeGraph::new(DroneId(1)), &p, 0.9, 1.0);
        // Step-by-step: 0 * 0.9 = 0, + 1 for object 4, + 1 for object 5.
        let mut oracle = 0.0 * 0.9;
        for o in [4u32, 5] {
            if p.co_cover.contains(&(DroneId(2), ObjectId(o))) {
                oracle += 1.0;
            }
        }
        assert_eq!(oracle, 2.0);
        assert_eq!(g.weight(DroneId(2)), oracle);
    }
}
