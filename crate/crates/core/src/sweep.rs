//! Threshold sweeps, summary CSV rows and Pareto reports built from them.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::analysis::{hypervolume2d, normalize_solutions, pareto_front, SolutionPoint, HYPERVOLUME_REFERENCE};
use crate::equivalence::{CheckSchedule, Checker};
use crate::error::{Result, SimError};
use crate::harness::{run_paired, Condition, ThreatConfig, TwinRunConfig, UpdateStrategy};
use crate::model::SceneSpec;
use crate::rng::repeat_seed;

/// Default threshold grid for each checker, ending with `+inf` (no updates).
pub fn default_thetas(checker: Checker) -> Vec<f64> {
    let inf = f64::INFINITY;
    match checker {
        Checker::Knowledge => vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, inf],
        Checker::State => vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, inf],
        Checker::Action | Checker::Action2 => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0, 1.4, 1.8, inf],
    }
}

/// Renders a threshold; infinity prints as `inf`.
pub fn format_theta(theta: f64) -> String {
    if theta == f64::INFINITY {
        "inf".to_string()
    } else {
        theta.to_string()
    }
}

pub fn parse_theta(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| SimError::InvalidInput(format!("invalid threshold `{s}`")))?;
    if v.is_nan() {
        return Err(SimError::InvalidInput("threshold must not be NaN".into()));
    }
    Ok(v)
}

/// Parses a comma-separated threshold list.
pub fn parse_theta_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_theta).collect()
}

/// One paired run in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scene: String,
    pub condition: String,
    pub checker: Checker,
    pub theta: f64,
    pub q: u64,
    pub l: u64,
    pub seed: u64,
    pub repeat: u32,
    pub updates: usize,
    pub avg_utility_deviation: f64,
    /// Mean comparison memory per step.
    pub memory_cost: f64,
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "scene",
    "condition",
    "checker",
    "theta",
    "q",
    "l",
    "seed",
    "repeat",
    "updates",
    "avg_utility_deviation",
    "memory_cost",
];

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn flush<W: Write>(w: &mut csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| SimError::Io {
        path: "csv output".into(),
        source: e,
    })
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.scene.clone(),
            r.condition.clone(),
            r.checker.to_string(),
            format_theta(r.theta),
            r.q.to_string(),
            r.l.to_string(),
            r.seed.to_string(),
            r.repeat.to_string(),
            r.updates.to_string(),
            r.avg_utility_deviation.to_string(),
            r.memory_cost.to_string(),
        ])?;
    }
    flush(&mut w)
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SimError::InvalidInput(format!("summary is missing column `{name}`")))
    };
    let idx: Vec<usize> = SUMMARY_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let bad = |name: &str| SimError::InvalidInput(format!("row {}: invalid {name}", line + 2));
        rows.push(SummaryRow {
            scene: field(0).to_string(),
            condition: field(1).to_string(),
            checker: field(2).parse()?,
            theta: parse_theta(field(3))?,
            q: field(4).parse().map_err(|_| bad("q"))?,
            l: field(5).parse().map_err(|_| bad("l"))?,
            seed: field(6).parse().map_err(|_| bad("seed"))?,
            repeat: field(7).parse().map_err(|_| bad("repeat"))?,
            updates: field(8).parse().map_err(|_| bad("updates"))?,
            avg_utility_deviation: field(9).parse().map_err(|_| bad("avg_utility_deviation"))?,
            memory_cost: field(10).parse().map_err(|_| bad("memory_cost"))?,
        });
    }
    Ok(rows)
}

/// A grid of paired runs over checkers, thresholds and repeats.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub scene_name: String,
    pub scene: SceneSpec,
    pub condition_name: String,
    pub threat: ThreatConfig,
    pub grid: Vec<(Checker, Vec<f64>)>,
    pub q: u64,
    pub l: u64,
    pub steps: u64,
    pub repeats: u32,
    pub seed: u64,
    pub strategy: UpdateStrategy,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
}

impl SweepConfig {
    /// All four checkers on their default grids, `q = l = 1`, 1000 steps.
    pub fn new(scene_name: &str, scene: SceneSpec, condition: Condition, repeats: u32, seed: u64) -> Self {
        Self {
            scene_name: scene_name.to_string(),
            scene,
            condition_name: condition.to_string(),
            threat: condition.threat(),
            grid: Checker::ALL.iter().map(|&c| (c, default_thetas(c))).collect(),
            q: 1,
            l: 1,
            steps: 1000,
            repeats,
            seed,
            strategy: UpdateStrategy::Update,
            jobs: 0,
        }
    }

    fn run_config(&self, checker: Checker, theta: f64, repeat: u32) -> TwinRunConfig {
        TwinRunConfig {
            scene: self.scene.clone(),
            threat: self.threat,
            checker,
            schedule: CheckSchedule {
                interval: self.q,
                window: self.l,
                threshold: theta,
            },
            seed: repeat_seed(self.seed, repeat),
            twin_seed: None,
            strategy: self.strategy,
            steps: self.steps,
        }
    }
}

/// Runs every grid cell. Rows come back in grid order regardless of the
/// number of worker threads.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SummaryRow>> {
    if cfg.repeats == 0 {
        return Err(SimError::InvalidConfig("sweep needs at least one repeat".into()));
    }
    let cells: Vec<(Checker, f64, u32)> = cfg
        .grid
        .iter()
        .flat_map(|(c, thetas)| thetas.iter().flat_map(move |&t| (0..cfg.repeats).map(move |r| (*c, t, r))))
        .collect();
    for (c, t, r) in &cells {
        cfg.run_config(*c, *t, *r).validate()?;
    }
    let work = || -> Result<Vec<SummaryRow>> {
        cells
            .par_iter()
            .map(|&(checker, theta, repeat)| {
                let rc = cfg.run_config(checker, theta, repeat);
                let trace = run_paired(&rc)?;
                Ok(SummaryRow {
                    scene: cfg.scene_name.clone(),
                    condition: cfg.condition_name.clone(),
                    checker,
                    theta,
                    q: cfg.q,
                    l: cfg.l,
                    seed: rc.seed,
                    repeat,
                    updates: trace.updates(),
                    avg_utility_deviation: trace.avg_utility_deviation(),
                    memory_cost: trace.memory_cost(),
                })
            })
            .collect()
    };
    if cfg.jobs == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?
            .install(work)
    }
}

/// Mean deviation of the never-updating rows (`theta = +inf`).
pub fn baseline_deviation(rows: &[SummaryRow]) -> Option<f64> {
    let base: Vec<f64> = rows
        .iter()
        .filter(|r| r.theta == f64::INFINITY)
        .map(|r| r.avg_utility_deviation)
        .collect();
    if base.is_empty() {
        None
    } else {
        Some(base.iter().sum::<f64>() / base.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoEntry {
    pub checker: Checker,
    pub theta: f64,
    pub point: SolutionPoint,
    pub on_front: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoReport {
    pub baseline: f64,
    pub max_updates: f64,
    pub entries: Vec<ParetoEntry>,
    /// Hypervolume per checker, in order of first appearance.
    pub hypervolumes: Vec<(Checker, f64)>,
}

impl ParetoReport {
    /// Normalises every row and computes each checker's front and
    /// hypervolume. The baseline defaults to the `theta = +inf` rows.
    pub fn from_rows(rows: &[SummaryRow], baseline: Option<f64>, max_updates: f64) -> Result<Self> {
        let baseline = match baseline.or_else(|| baseline_deviation(rows)) {
            Some(b) => b,
            None => {
                return Err(SimError::InvalidInput(
                    "no baseline given and no theta=inf rows to derive one from".into(),
                ))
            }
        };
        let mut order: Vec<Checker> = Vec::new();
        let mut by_checker: BTreeMap<Checker, Vec<(f64, SolutionPoint)>> = BTreeMap::new();
        for r in rows {
            if !order.contains(&r.checker) {
                order.push(r.checker);
            }
            by_checker
                .entry(r.checker)
                .or_default()
                .push((r.theta, SolutionPoint::new(r.avg_utility_deviation, r.updates as f64)));
        }
        let mut entries = Vec::new();
        let mut hypervolumes = Vec::new();
        for checker in order {
            let raw = &by_checker[&checker];
            let pts: Vec<SolutionPoint> = raw.iter().map(|(_, p)| *p).collect();
            let norm = normalize_solutions(&pts, baseline, max_updates)?;
            let front = pareto_front(&norm);
            hypervolumes.push((checker, hypervolume2d(&norm, HYPERVOLUME_REFERENCE)));
            for ((theta, _), point) in raw.iter().zip(norm) {
                entries.push(ParetoEntry {
                    checker,
                    theta: *theta,
                    point,
                    on_front: front.contains(&point),
                });
            }
        }
        Ok(Self {
            baseline,
            max_updates,
            entries,
            hypervolumes,
        })
    }

    pub fn hypervolume(&self, checker: Checker) -> Option<f64> {
        self.hypervolumes.iter().find(|(c, _)| *c == checker).map(|(_, v)| *v)
    }

    pub fn points(&self, checker: Checker) -> Vec<SolutionPoint> {
        self.entries.iter().filter(|e| e.checker == checker).map(|e| e.point).collect()
    }

    /// Point rows `checker,theta,dev_norm,upd_norm,on_front`, then one
    /// `hypervolume,<checker>,<value>` row per checker.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["checker", "theta", "dev_norm", "upd_norm", "on_front"])?;
        for e in &self.entries {
            w.write_record([
                e.checker.to_string(),
                format_theta(e.theta),
                e.point.dev.to_string(),
                e.point.upd.to_string(),
                e.on_front.to_string(),
            ])?;
        }
        for (c, hv) in &self.hypervolumes {
            w.write_record(["hypervolume".to_string(), c.to_string(), hv.to_string()])?;
        }
        flush(&mut w)
    }
}
