//! Scene generation and the six built-in evaluation scenes.
//!
//! The built-in scenes are stored as JSON next to the crate. Each was produced
//! by [`gen_scene`] with the seed and population listed in [`BUILTIN`], and a
//! test keeps the files and the generator in agreement.

use rand::Rng;

use crate::error::{Result, SimError};
use crate::model::{DroneSpec, ObjectSpec, SceneSpec};
use crate::rng::Streams;

/// Parameters for a randomly generated scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneGen {
    pub objects: usize,
    pub drones: usize,
    pub seed: u64,
    pub width: f64,
    pub height: f64,
    pub k: usize,
    pub range: f64,
    pub gamma: f64,
    pub delta: f64,
    pub importance_period: u64,
}

impl SceneGen {
    /// A 50x50 world with `k = 2`, range 10, `gamma = 0.9`, `delta = 1` and a
    /// 30-step importance period.
    pub fn new(objects: usize, drones: usize, seed: u64) -> Self {
        Self {
            objects,
            drones,
            seed,
            width: 50.0,
            height: 50.0,
            k: 2,
            range: 10.0,
            gamma: 0.9,
            delta: 1.0,
            importance_period: 30,
        }
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Uniform positions (two decimals), axis-aligned headings and fair-coin
/// importance, all drawn from the seed's scene stream.
pub fn gen_scene(cfg: &SceneGen) -> Result<SceneSpec> {
    if cfg.drones == 0 || cfg.objects == 0 {
        return Err(SimError::InvalidConfig("a generated scene needs at least one drone and one object".into()));
    }
    let mut rng = Streams::new(cfg.seed).scene();
    let (w, h) = (cfg.width, cfg.height);
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(SimError::InvalidConfig("scene dimensions must be positive".into()));
    }
    let drones = (1..=cfg.drones as u32)
        .map(|id| DroneSpec {
            id,
            x: round2(rng.random_range(0.0..=w)),
            y: round2(rng.random_range(0.0..=h)),
        })
        .collect();
    let objects = (1..=cfg.objects as u32)
        .map(|id| ObjectSpec {
            id,
            x: round2(rng.random_range(0.0..=w)),
            y: round2(rng.random_range(0.0..=h)),
            direction: 90.0 * rng.random_range(0..4u32) as f64,
            important: rng.random(),
        })
        .collect();
    let scene = SceneSpec {
        width: w,
        height: h,
        k: cfg.k,
        range: cfg.range,
        gamma: cfg.gamma,
        delta: cfg.delta,
        importance_period: cfg.importance_period,
        drones,
        objects,
    };
    scene.validate().map_err(SimError::InvalidScene)?;
    Ok(scene)
}

/// `(objects, drones, seed)` for built-in scenes 1 to 6.
pub const BUILTIN: [(usize, usize, u64); 6] = [
    (10, 5, 1),
    (12, 8, 2),
    (12, 8, 3),
    (20, 10, 4),
    (10, 15, 5),
    (10, 10, 6),
];

const BUILTIN_JSON: [&str; 6] = [
    include_str!("../scenes/scene1.json"),
    include_str!("../scenes/scene2.json"),
    include_str!("../scenes/scene3.json"),
    include_str!("../scenes/scene4.json"),
    include_str!("../scenes/scene5.json"),
    include_str!("../scenes/scene6.json"),
];

/// Built-in scene `n` (1-based).
pub fn builtin_scene(n: usize) -> Result<SceneSpec> {
    match n {
        1..=6 => SceneSpec::from_json(BUILTIN_JSON[n - 1]),
        _ => Err(SimError::InvalidInput(format!("no built-in scene {n} (expected 1-6)"))),
    }
}

/// The generator settings behind built-in scene `n`.
pub fn builtin_gen(n: usize) -> Option<SceneGen> {
    BUILTIN.get(n.checked_sub(1)?).map(|&(o, d, s)| SceneGen::new(o, d, s))
}
