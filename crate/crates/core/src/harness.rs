//! The equivalence manager: runs a physical world and its digital twin in
//! lockstep, injects the configured threats, compares the two worlds with a
//! checker and re-synchronises the twin when the checker fires.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;

use crate::analysis::{action2_memory_cost, avg_utility_deviation, comparison_memory_cost, mean_and_stdev};
use crate::equivalence::{windowed_check, CheckSchedule, Checker, CheckerHistory};
use crate::error::{Result, SimError};
use crate::model::{ActionKind, DroneState, ObjectState, SceneSpec, WorldState};
use crate::rng::{divergent_seed, repeat_seed, Streams};
use crate::world::{coverage_map, step_world, utility_k, BiasMode, ObjectDynamics};

/// Heading error of physical objects under the biased-model threat, degrees.
pub const CONDITION_BIAS_DEGREES: f64 = 3.0;
/// Maximum estimation error for uncovered objects under the sensing threat.
pub const CONDITION_ESTIMATION_ERROR: f64 = 5.0;

/// Threats injected between the physical world and the twin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreatConfig {
    /// Systematic heading bias of physical objects; 0 disables it.
    pub bias_degrees: f64,
    pub bias_mode: BiasMode,
    /// The twin's agents use a different random seed.
    pub divergent_seeds: bool,
    /// Uncovered objects are only known up to an estimation error.
    pub sensor_limited: bool,
    pub estimation_error_max: f64,
    /// Draw the estimation error from `[-max, max]` instead of `[0, max]`.
    pub signed_noise: bool,
}

impl ThreatConfig {
    pub fn none() -> Self {
        Self {
            bias_degrees: 0.0,
            bias_mode: BiasMode::Accumulate,
            divergent_seeds: false,
            sensor_limited: false,
            estimation_error_max: 0.0,
            signed_noise: false,
        }
    }

    pub fn physical_dynamics(&self) -> ObjectDynamics {
        ObjectDynamics {
            bias_degrees: self.bias_degrees,
            bias_mode: self.bias_mode,
        }
    }
}

/// Named threat bundles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    None,
    /// Biased object model plus divergent agent randomness.
    I,
    /// Biased object model plus limited sensing of uncovered objects.
    II,
}

impl Condition {
    pub fn threat(self) -> ThreatConfig {
        match self {
            Condition::None => ThreatConfig::none(),
            Condition::I => ThreatConfig {
                bias_degrees: CONDITION_BIAS_DEGREES,
                divergent_seeds: true,
                ..ThreatConfig::none()
            },
            Condition::II => ThreatConfig {
                bias_degrees: CONDITION_BIAS_DEGREES,
                sensor_limited: true,
                estimation_error_max: CONDITION_ESTIMATION_ERROR,
                ..ThreatConfig::none()
            },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::None => "none",
            Condition::I => "I",
            Condition::II => "II",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Condition::None),
            "I" | "i" | "1" => Ok(Condition::I),
            "II" | "ii" | "2" => Ok(Condition::II),
            other => Err(SimError::InvalidInput(format!("unknown condition `{other}` (expected none|I|II)"))),
        }
    }
}

/// What a re-synchronisation replaces in the twin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UpdateStrategy {
    /// Replace everything including the interaction graphs.
    Update,
    /// Replace everything except the graphs, which stay as they are.
    Keep,
    /// Replace everything except the graphs, which are zeroed.
    Clear,
}

impl UpdateStrategy {
    pub const ALL: [UpdateStrategy; 3] = [UpdateStrategy::Update, UpdateStrategy::Keep, UpdateStrategy::Clear];

    pub fn as_str(self) -> &'static str {
        match self {
            UpdateStrategy::Update => "update",
            UpdateStrategy::Keep => "keep",
            UpdateStrategy::Clear => "clear",
        }
    }
}

impl fmt::Display for UpdateStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UpdateStrategy {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "update" => Ok(UpdateStrategy::Update),
            "keep" => Ok(UpdateStrategy::Keep),
            "clear" => Ok(UpdateStrategy::Clear),
            other => Err(SimError::InvalidInput(format!(
                "unknown update strategy `{other}` (expected update|keep|clear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotObject {
    pub state: ObjectState,
    /// Position is an estimate because no drone covered the object.
    pub estimated: bool,
}

/// Everything the equivalence manager can sense from the physical world.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: u64,
    pub drones: Vec<DroneState>,
    pub objects: Vec<SnapshotObject>,
}

/// Senses the physical world. Under limited sensing, each uncovered object's
/// coordinates get an independent uniform error, clamped into the world.
pub fn sense_snapshot<R: Rng + ?Sized>(physical: &WorldState, threat: &ThreatConfig, rng: &mut R) -> Snapshot {
    let coverage = threat.sensor_limited.then(|| coverage_map(physical));
    let bounds = physical.params.bounds();
    let max = threat.estimation_error_max;
    let objects = physical
        .objects
        .iter()
        .map(|o| {
            let uncovered = coverage.as_ref().is_some_and(|c| c.get(&o.id).is_none_or(|s| s.is_empty()));
            if !uncovered {
                return SnapshotObject {
                    state: o.clone(),
                    estimated: false,
                };
            }
            let lo = if threat.signed_noise { -max } else { 0.0 };
            let mut draw = || if max > 0.0 { rng.random_range(lo..=max) } else { 0.0 };
            let (ex, ey) = (draw(), draw());
            let mut state = o.clone();
            state.position.x += ex;
            state.position.y += ey;
            state.position = state.position.clamp_to(bounds);
            SnapshotObject { state, estimated: true }
        })
        .collect();
    Snapshot {
        time: physical.time,
        drones: physical.drones.clone(),
        objects,
    }
}

/// Re-initialises the twin from a snapshot according to `strategy`.
pub fn apply_update(twin: &WorldState, snap: &Snapshot, strategy: UpdateStrategy) -> Result<WorldState> {
    if snap.time != twin.time {
        return Err(SimError::TimeMismatch {
            snapshot: snap.time,
            twin: twin.time,
        });
    }
    if snap.drones.len() != twin.drones.len() || snap.objects.len() != twin.objects.len() {
        return Err(SimError::InvalidInput("snapshot and twin have different populations".into()));
    }
    let mut next = twin.clone();
    next.objects = snap.objects.iter().map(|o| o.state.clone()).collect();
    for (mine, sensed) in next.drones.iter_mut().zip(&snap.drones) {
        if mine.id != sensed.id {
            return Err(SimError::InvalidInput(format!(
                "snapshot drone {} does not match twin drone {}",
                sensed.id, mine.id
            )));
        }
        mine.position = sensed.position;
        mine.inbox = sensed.inbox.clone();
        match strategy {
            UpdateStrategy::Update => mine.graph = sensed.graph.clone(),
            UpdateStrategy::Keep => {}
            UpdateStrategy::Clear => mine.graph.clear(),
        }
    }
    Ok(next)
}

/// Configuration of one paired physical/twin run.
#[derive(Debug, Clone)]
pub struct TwinRunConfig {
    pub scene: SceneSpec,
    pub threat: ThreatConfig,
    pub checker: Checker,
    pub schedule: CheckSchedule,
    /// Seed of the physical world's agent streams.
    pub seed: u64,
    /// Seed of the twin's agent streams when seeds diverge; derived from
    /// `seed` when absent.
    pub twin_seed: Option<u64>,
    pub strategy: UpdateStrategy,
    pub steps: u64,
}

impl TwinRunConfig {
    /// Paper-default schedule (`q = 1`, `l = 1`), update strategy, 1000 steps.
    pub fn new(scene: SceneSpec, condition: Condition, checker: Checker, threshold: f64, seed: u64) -> Self {
        Self {
            scene,
            threat: condition.threat(),
            checker,
            schedule: CheckSchedule {
                interval: 1,
                window: 1,
                threshold,
            },
            seed,
            twin_seed: None,
            strategy: UpdateStrategy::Update,
            steps: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate().map_err(SimError::InvalidScene)?;
        self.schedule.validate()?;
        if self.checker == Checker::Action2 && self.scene.k < 2 {
            return Err(SimError::InvalidConfig(
                "the action2 checker is undefined for k < 2".into(),
            ));
        }
        if !self.threat.bias_degrees.is_finite() || self.threat.bias_degrees.abs() >= 90.0 {
            return Err(SimError::InvalidConfig("bias must be finite and below 90 degrees".into()));
        }
        if !(self.threat.estimation_error_max >= 0.0 && self.threat.estimation_error_max.is_finite()) {
            return Err(SimError::InvalidConfig("estimation error must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn physical_streams(&self) -> Streams {
        Streams::new(self.seed)
    }

    pub fn twin_streams(&self) -> Streams {
        if self.threat.divergent_seeds {
            Streams::new(self.twin_seed.unwrap_or_else(|| divergent_seed(self.seed)))
        } else {
            Streams::new(self.seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub u_physical: f64,
    /// The twin's utility before any update at this step.
    pub u_twin: f64,
    /// Checker metric for this step alone (not the window sum).
    pub metric_value: f64,
    pub updated: bool,
}

/// Record of one paired run. Row `i` describes time `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub update_steps: Vec<u64>,
    pub physical_kinds: Vec<Vec<ActionKind>>,
    pub twin_kinds: Vec<Vec<ActionKind>>,
    /// Scalars loaded for comparison, summed over all steps.
    pub memory_total: u64,
}

impl Trace {
    pub fn updates(&self) -> usize {
        self.update_steps.len()
    }

    pub fn avg_utility_deviation(&self) -> f64 {
        let (u, v): (Vec<f64>, Vec<f64>) = self.rows.iter().map(|r| (r.u_physical, r.u_twin)).unzip();
        avg_utility_deviation(&u, &v).unwrap_or(0.0)
    }

    /// Mean comparison memory per step.
    pub fn memory_cost(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.memory_total as f64 / self.rows.len() as f64
        }
    }

    /// Writes `t,u_physical,u_twin,metric_value,updated`, one row per step.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["t", "u_physical", "u_twin", "metric_value", "updated"])?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.u_physical.to_string(),
                r.u_twin.to_string(),
                r.metric_value.to_string(),
                u8::from(r.updated).to_string(),
            ])?;
        }
        w.flush().map_err(|e| SimError::Io {
            path: "trace".into(),
            source: e,
        })?;
        Ok(())
    }
}

pub fn run_paired(config: &TwinRunConfig) -> Result<Trace> {
    run_paired_with(config, |_| {})
}

/// Runs the pair, calling `on_step` after every step.
pub fn run_paired_with<F: FnMut(&TraceRow)>(config: &TwinRunConfig, mut on_step: F) -> Result<Trace> {
    config.validate()?;
    let mut physical = WorldState::from_scene(&config.scene)?;
    let mut twin = physical.clone();
    let k = physical.params.k;
    let phys_streams = config.physical_streams();
    let twin_streams = config.twin_streams();
    let phys_dynamics = config.threat.physical_dynamics();
    let twin_dynamics = ObjectDynamics {
        bias_mode: config.threat.bias_mode,
        ..ObjectDynamics::unbiased()
    };
    let fixed_cost = comparison_memory_cost(config.checker, physical.drones.len(), physical.objects.len());

    let mut history = CheckerHistory::new(config.schedule.window as usize);
    let mut trace = Trace {
        rows: Vec::with_capacity(config.steps as usize),
        update_steps: Vec::new(),
        physical_kinds: Vec::with_capacity(config.steps as usize),
        twin_kinds: Vec::with_capacity(config.steps as usize),
        memory_total: 0,
    };

    for _ in 0..config.steps {
        let (next_phys, phys_actions) = step_world(&physical, &phys_streams, &phys_dynamics);
        let (next_twin, twin_actions) = step_world(&twin, &twin_streams, &twin_dynamics);
        physical = next_phys;
        twin = next_twin;
        let t = physical.time;

        let u_physical = utility_k(&physical, k);
        let u_twin = utility_k(&twin, k);

        let p_payload = config.checker.payload(&physical, &phys_actions)?;
        let t_payload = config.checker.payload(&twin, &twin_actions)?;
        let metric_value = config.checker.metric(&p_payload, &t_payload, k)?;
        trace.memory_total += match fixed_cost {
            Some(c) => c as u64,
            None => action2_memory_cost(&phys_actions, &twin_actions, k) as u64,
        };
        history.push(t, p_payload, t_payload);

        let outcome = windowed_check(&history, t, &config.schedule, |a, b| config.checker.metric(a, b, k))?;
        let updated = outcome.triggered();
        if updated {
            let mut rng = phys_streams.snapshot(t);
            let snap = sense_snapshot(&physical, &config.threat, &mut rng);
            twin = apply_update(&twin, &snap, config.strategy)?;
            trace.update_steps.push(t);
        }

        let row = TraceRow {
            t,
            u_physical,
            u_twin,
            metric_value,
            updated,
        };
        on_step(&row);
        trace.rows.push(row);
        trace.physical_kinds.push(phys_actions.iter().map(|a| a.kind).collect());
        trace.twin_kinds.push(twin_actions.iter().map(|a| a.kind).collect());
    }
    Ok(trace)
}

/// Length of each phase (knowledge accumulation, then evaluation).
pub const STUDY_PHASE_STEPS: u64 = 50;

#[derive(Debug, Clone)]
pub struct StrategyStudyConfig {
    pub scene: SceneSpec,
    pub threat: ThreatConfig,
    /// Number of sampled start times.
    pub samples: usize,
    /// Repeats per start time, each with its own seed.
    pub repeats: u32,
    pub seed: u64,
    /// Start times are drawn from `1..=horizon - 2 * phase`.
    pub horizon: u64,
    pub phase_steps: u64,
}

impl StrategyStudyConfig {
    pub fn new(scene: SceneSpec, condition: Condition, samples: usize, repeats: u32, seed: u64) -> Self {
        Self {
            scene,
            threat: condition.threat(),
            samples,
            repeats,
            seed,
            horizon: 1000,
            phase_steps: STUDY_PHASE_STEPS,
        }
    }

    fn latest_start(&self) -> u64 {
        self.horizon.saturating_sub(2 * self.phase_steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub strategy: UpdateStrategy,
    /// One evaluation-phase deviation per (start time, repeat).
    pub deviations: Vec<f64>,
    pub mean: f64,
    pub stdev: f64,
}

impl StrategyOutcome {
    pub fn standard_error(&self) -> f64 {
        self.stdev / (self.deviations.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyStudy {
    pub start_times: Vec<u64>,
    pub outcomes: Vec<StrategyOutcome>,
}

impl StrategyStudy {
    pub fn outcome(&self, strategy: UpdateStrategy) -> &StrategyOutcome {
        self.outcomes
            .iter()
            .find(|o| o.strategy == strategy)
            .expect("every strategy is evaluated")
    }
}

/// Draws `samples` distinct start times from `1..=latest`.
pub fn sample_start_times(seed: u64, samples: usize, latest: u64) -> Result<Vec<u64>> {
    if samples == 0 {
        return Err(SimError::InvalidConfig("strategy study needs at least one sample".into()));
    }
    if latest < 1 || samples as u64 > latest {
        return Err(SimError::InvalidConfig(format!(
            "cannot draw {samples} distinct start times from 1..={latest}"
        )));
    }
    let mut rng = Streams::new(seed).study();
    let mut times: Vec<u64> = sample(&mut rng, latest as usize, samples)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect();
    times.sort_unstable();
    Ok(times)
}

/// Evaluation-phase utility deviation of each strategy for one start time.
pub fn strategy_experiment(config: &StrategyStudyConfig, start: u64, seed: u64) -> Result<[f64; 3]> {
    if start + 2 * config.phase_steps > config.horizon {
        return Err(SimError::InvalidConfig(format!(
            "start time {start} plus two phases exceeds the horizon {}",
            config.horizon
        )));
    }
    let run = TwinRunConfig {
        scene: config.scene.clone(),
        threat: config.threat,
        checker: Checker::State,
        schedule: CheckSchedule {
            interval: 1,
            window: 1,
            threshold: f64::INFINITY,
        },
        seed,
        twin_seed: None,
        strategy: UpdateStrategy::Update,
        steps: 0,
    };
    run.validate()?;
    let phys_streams = run.physical_streams();
    let twin_streams = run.twin_streams();
    let phys_dyn = config.threat.physical_dynamics();
    let twin_dyn = ObjectDynamics {
        bias_mode: config.threat.bias_mode,
        ..ObjectDynamics::unbiased()
    };
    let k = config.scene.k;

    let mut physical = WorldState::from_scene(&config.scene)?;
    while physical.time < start {
        physical = step_world(&physical, &phys_streams, &phys_dyn).0;
    }
    // Start time: full replication.
    let mut twin = physical.clone();
    for _ in 0..config.phase_steps {
        physical = step_world(&physical, &phys_streams, &phys_dyn).0;
        twin = step_world(&twin, &twin_streams, &twin_dyn).0;
    }

    let mut rng = phys_streams.snapshot(physical.time);
    let snap = sense_snapshot(&physical, &config.threat, &mut rng);

    let mut u_physical = Vec::with_capacity(config.phase_steps as usize);
    let mut p = physical.clone();
    for _ in 0..config.phase_steps {
        p = step_world(&p, &phys_streams, &phys_dyn).0;
        u_physical.push(utility_k(&p, k));
    }

    let mut out = [0.0; 3];
    for (slot, strategy) in out.iter_mut().zip(UpdateStrategy::ALL) {
        let mut tw = apply_update(&twin, &snap, strategy)?;
        let mut u_twin = Vec::with_capacity(config.phase_steps as usize);
        for _ in 0..config.phase_steps {
            tw = step_world(&tw, &twin_streams, &twin_dyn).0;
            u_twin.push(utility_k(&tw, k));
        }
        *slot = avg_utility_deviation(&u_physical, &u_twin)?;
    }
    Ok(out)
}

/// Compares the three update strategies over sampled start times.
pub fn run_strategy_study(config: &StrategyStudyConfig) -> Result<StrategyStudy> {
    use rayon::prelude::*;

    if config.repeats == 0 {
        return Err(SimError::InvalidConfig("strategy study needs at least one repeat".into()));
    }
    let start_times = sample_start_times(config.seed, config.samples, config.latest_start())?;
    let jobs: Vec<(u64, u32)> = start_times
        .iter()
        .flat_map(|&s| (0..config.repeats).map(move |r| (s, r)))
        .collect();
    let results: Vec<[f64; 3]> = jobs
        .par_iter()
        .map(|&(start, r)| strategy_experiment(config, start, repeat_seed(config.seed, r)))
        .collect::<Result<_>>()?;

    let outcomes = UpdateStrategy::ALL
        .iter()
        .enumerate()
        .map(|(i, &strategy)| {
            let deviations: Vec<f64> = results.iter().map(|r| r[i]).collect();
            let (mean, stdev) = mean_and_stdev(&deviations);
            StrategyOutcome {
                strategy,
                deviations,
                mean,
                stdev,
            }
        })
        .collect();
    Ok(StrategyStudy { start_times, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::{knowledge_vector, state_deviation, state_vector};
    use crate::model::{DroneId, DroneSpec, ObjectSpec, Vec2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene() -> SceneSpec {
        SceneSpec {
            width: 50.0,
            height: 50.0,
            k: 2,
            range: 10.0,
            gamma: 0.9,
            delta: 1.0,
            importance_period: 30,
            drones: vec![
                DroneSpec { id: 1, x: 10.0, y: 10.0 },
                DroneSpec { id: 2, x: 14.0, y: 10.0 },
                DroneSpec { id: 3, x: 40.0, y: 40.0 },
            ],
            objects: vec![
                ObjectSpec {
                    id: 1,
                    x: 12.0,
                    y: 10.0,
                    direction: 90.0,
                    important: true,
                },
                ObjectSpec {
                    id: 2,
                    x: 25.0,
                    y: 45.0,
                    direction: 0.0,
                    important: false,
                },
            ],
        }
    }

    #[test]
    fn exact_snapshot_without_sensor_limits() {
        let w = WorldState::from_scene(&scene()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let snap = sense_snapshot(&w, &Condition::I.threat(), &mut rng);
        assert!(snap.objects.iter().all(|o| !o.estimated));
        let objects: Vec<_> = snap.objects.iter().map(|o| o.state.clone()).collect();
        assert_eq!(objects, w.objects);
        assert_eq!(snap.drones, w.drones);
    }

    #[test]
    fn limited_sensing_perturbs_uncovered_objects_only() {
        let w = WorldState::from_scene(&scene()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let snap = sense_snapshot(&w, &Condition::II.threat(), &mut rng);
        // Object 1 is covered by drones 1 and 2.
        assert!(!snap.objects[0].estimated);
        assert_eq!(snap.objects[0].state, w.objects[0]);
        // Object 2 is far from every drone.
        assert!(snap.objects[1].estimated);
        let d = snap.objects[1].state.position - w.objects[1].position;
        assert!((0.0..=5.0).contains(&d.x) && (0.0..=5.0).contains(&d.y));
        assert_eq!(snap.objects[1].state.direction, w.objects[1].direction);
        assert_eq!(snap.objects[1].state.important, w.objects[1].important);
    }

    #[test]
    fn strategies_treat_graphs_differently() {
        let mut physical = WorldState::from_scene(&scene()).unwrap();
        physical.drones[0].graph.set_weight(DroneId(2), 7.0).unwrap();
        physical.drones[1].graph.set_weight(DroneId(1), 7.0).unwrap();
        physical.drones[2].position = Vec2::new(30.0, 30.0);
        let mut twin = WorldState::from_scene(&scene()).unwrap();
        twin.drones[0].graph.set_weight(DroneId(3), 1.0).unwrap();
        twin.drones[2].graph.set_weight(DroneId(1), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let snap = sense_snapshot(&physical, &ThreatConfig::none(), &mut rng);

        let up = apply_update(&twin, &snap, UpdateStrategy::Update).unwrap();
        assert_eq!(up, physical);

        let kept = apply_update(&twin, &snap, UpdateStrategy::Keep).unwrap();
        assert_eq!(knowledge_vector(&kept).unwrap(), knowledge_vector(&twin).unwrap());
        assert_eq!(state_vector(&kept), state_vector(&physical));

        let cleared = apply_update(&twin, &snap, UpdateStrategy::Clear).unwrap();
        assert!(knowledge_vector(&cleared).unwrap().0.iter().all(|&w| w == 0.0));
        assert_eq!(state_deviation(&state_vector(&cleared), &state_vector(&physical)).unwrap(), 0.0);

        let mut late = twin.clone();
        late.time = 3;
        assert!(matches!(
            apply_update(&late, &snap, UpdateStrategy::Update),
            Err(SimError::TimeMismatch { .. })
        ));
    }

    #[test]
    fn forced_updates_every_step() {
        let mut cfg = TwinRunConfig::new(scene(), Condition::I, Checker::Knowledge, -1.0, 7);
        cfg.steps = 40;
        let trace = run_paired(&cfg).unwrap();
        assert_eq!(trace.updates(), 40);
        assert_eq!(trace.rows.len(), 40);
        assert!(trace.rows.iter().all(|r| r.updated));
    }

    #[test]
    fn never_updating_matches_standalone_twin() {
        let mut cfg = TwinRunConfig::new(scene(), Condition::I, Checker::State, f64::INFINITY, 7);
        cfg.steps = 60;
        let trace = run_paired(&cfg).unwrap();
        assert_eq!(trace.updates(), 0);

        let mut twin = WorldState::from_scene(&scene()).unwrap();
        let streams = cfg.twin_streams();
        for row in &trace.rows {
            twin = step_world(&twin, &streams, &ObjectDynamics::unbiased()).0;
            assert_eq!(utility_k(&twin, 2), row.u_twin);
        }
    }

    #[test]
    fn identical_worlds_never_deviate() {
        let mut cfg = TwinRunConfig::new(scene(), Condition::None, Checker::State, 0.0, 3);
        cfg.steps = 100;
        let trace = run_paired(&cfg).unwrap();
        assert_eq!(trace.avg_utility_deviation(), 0.0);
        assert_eq!(trace.updates(), 0);
        assert!(trace.rows.iter().all(|r| r.metric_value == 0.0));
    }

    #[test]
    fn action2_rejects_k1() {
        let mut s = scene();
        s.k = 1;
        let cfg = TwinRunConfig::new(s, Condition::I, Checker::Action2, 1.0, 3);
        assert!(matches!(run_paired(&cfg), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn trace_csv_layout() {
        let mut cfg = TwinRunConfig::new(scene(), Condition::I, Checker::Action, 0.5, 3);
        cfg.steps = 5;
        let trace = run_paired(&cfg).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,u_physical,u_twin,metric_value,updated");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("1,"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn start_times_are_distinct_and_in_range() {
        let ts = sample_start_times(11, 30, 900).unwrap();
        assert_eq!(ts.len(), 30);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!(ts.iter().all(|&t| (1..=900).contains(&t)));
        assert!(sample_start_times(11, 0, 900).is_err());
    }

    #[test]
    fn study_rejects_late_start() {
        let cfg = StrategyStudyConfig::new(scene(), Condition::I, 1, 1, 0);
        assert!(strategy_experiment(&cfg, 950, 0).is_err());
    }

    #[test]
    fn update_strategy_without_threats_is_exact() {
        let cfg = StrategyStudyConfig::new(scene(), Condition::None, 1, 1, 0);
        let [update, _, _] = strategy_experiment(&cfg, 10, 5).unwrap();
        assert_eq!(update, 0.0);
    }
}
