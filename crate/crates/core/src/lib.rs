//! Deterministic lockstep simulator of a k-coverage drone swarm and its
//! digital twin.
//!
//! The physical world and the twin are stepped side by side. A checker
//! compares them (interaction knowledge, world state or agent actions) over a
//! sliding window and re-synchronises the twin when the accumulated deviation
//! crosses a threshold. Sweeps over thresholds feed a Pareto/hypervolume
//! analysis of update count against utility deviation.

pub mod agent;
pub mod analysis;
pub mod equivalence;
pub mod error;
pub mod harness;
pub mod model;
pub mod rng;
pub mod scenes;
pub mod sweep;
pub mod world;

pub use analysis::{avg_utility_deviation, dominates, hypervolume2d, pareto_front, SolutionPoint, HYPERVOLUME_REFERENCE};
pub use equivalence::{windowed_check, CheckOutcome, CheckSchedule, Checker, CheckerHistory, KnowledgeVector, StateVector};
pub use error::{Result, SimError};
pub use harness::{
    apply_update, run_paired, run_paired_with, run_strategy_study, sense_snapshot, Condition, Snapshot, StrategyStudy,
    StrategyStudyConfig, ThreatConfig, Trace, TraceRow, TwinRunConfig, UpdateStrategy,
};
pub use model::{
    ActionKind, ActionRecord, Bounds, DroneId, DroneSpec, DroneState, KnowledgeGraph, Message, ObjectId, ObjectSpec,
    ObjectState, SceneSpec, SceneViolation, Vec2, WorldParams, WorldState,
};
pub use rng::Streams;
pub use scenes::{builtin_scene, gen_scene, SceneGen};
pub use sweep::{run_sweep, ParetoReport, SummaryRow, SweepConfig};
pub use world::{step_world, utility_k, BiasMode, ObjectDynamics};
