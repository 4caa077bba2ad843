use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use twinsync_core::harness::STUDY_PHASE_STEPS;
use twinsync_core::sweep::{parse_theta, parse_theta_list, read_summary, write_summary};
use twinsync_core::{
    builtin_scene, gen_scene, run_paired_with, run_strategy_study, run_sweep, BiasMode, CheckSchedule, Checker,
    Condition, ParetoReport, SceneGen, SceneSpec, StrategyStudyConfig, SummaryRow, SweepConfig, TwinRunConfig,
    UpdateStrategy,
};

#[derive(Parser, Debug)]
#[command(name = "twinsync", version, about = "Lockstep drone-swarm digital twin with equivalence checking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random scene file.
    GenScene(GenSceneArgs),
    /// Run one physical/twin pair and write its trace and summary.
    Run(RunArgs),
    /// Run a threshold sweep and write one summary row per run.
    Sweep(SweepArgs),
    /// Compare the update, keep and clear strategies.
    StrategyStudy(StudyArgs),
    /// Normalise a sweep summary and compute fronts and hypervolumes.
    Pareto(ParetoArgs),
}

#[derive(Args, Debug)]
struct GenSceneArgs {
    #[arg(long)]
    drones: usize,
    #[arg(long)]
    objects: usize,
    #[arg(long, default_value_t = 50.0)]
    width: f64,
    #[arg(long, default_value_t = 50.0)]
    height: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct WorldArgs {
    /// Scene JSON file, or 1-6 for a built-in scene.
    #[arg(long)]
    scene: String,
    /// Threat condition: none, I or II.
    #[arg(long, default_value = "I")]
    condition: String,
    /// Override the scene's coverage requirement k.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// Comparison interval q.
    #[arg(long, default_value_t = 1)]
    q: u64,
    /// Comparison window l.
    #[arg(long, default_value_t = 1)]
    l: u64,
    /// Physical-world seed (base seed for repeats).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// update, keep or clear.
    #[arg(long, default_value = "update")]
    strategy: String,
    /// accumulate or fixed.
    #[arg(long, default_value = "accumulate")]
    bias_mode: String,
    /// Estimation error uniform on [-max, max] instead of [0, max].
    #[arg(long)]
    signed_noise: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    world: WorldArgs,
    /// state, knowledge, action or action2.
    #[arg(long, default_value = "knowledge")]
    checker: String,
    /// Threshold; `inf` never updates, a negative value always does.
    #[arg(long, default_value = "inf", allow_hyphen_values = true)]
    theta: String,
    /// Seed of the twin's agents under divergent randomness.
    #[arg(long)]
    twin_seed: Option<u64>,
    /// Pace steps at this many milliseconds each.
    #[arg(long, value_name = "MS", num_args = 0..=1, default_missing_value = "100")]
    realtime: Option<u64>,
    #[arg(long, default_value = "trace.csv")]
    trace: PathBuf,
    #[arg(long, default_value = "summary.csv")]
    summary: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    world: WorldArgs,
    /// Comma-separated checkers.
    #[arg(long, default_value = "state,knowledge,action,action2")]
    checkers: String,
    /// Comma-separated thresholds for every checker; per-checker defaults when absent.
    #[arg(long, allow_hyphen_values = true)]
    thetas: Option<String>,
    #[arg(long, default_value_t = 5)]
    repeats: u32,
    /// Worker threads (default: available cores). TWINSYNC_JOBS overrides.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, short, default_value = "summary.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[arg(long)]
    scene: String,
    #[arg(long, default_value = "I")]
    condition: String,
    #[arg(long, default_value_t = 30)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    repeats: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    horizon: u64,
    #[arg(long, default_value = "accumulate")]
    bias_mode: String,
    #[arg(long)]
    signed_noise: bool,
    #[arg(long, short, default_value = "strategy.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ParetoArgs {
    /// Summary CSV written by `sweep`.
    #[arg(long)]
    input: PathBuf,
    /// Deviation used for normalisation; mean of the theta=inf rows when absent.
    #[arg(long)]
    baseline: Option<f64>,
    #[arg(long, default_value_t = 1000.0)]
    max_updates: f64,
    #[arg(long, short, default_value = "pareto.csv")]
    out: PathBuf,
}

/// Bad flags or inputs, reported with exit code 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(Usage(msg.into()).into())
}

fn parse_flag<T: std::str::FromStr>(value: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().or_else(|e: T::Err| usage(e.to_string()))
}

fn load_scene(arg: &str) -> anyhow::Result<SceneSpec> {
    if let Ok(n) = arg.parse::<usize>() {
        return builtin_scene(n).or_else(|e| usage(e.to_string()));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return usage(format!("scene file {} does not exist", path.display()));
    }
    SceneSpec::load(path).or_else(|e| usage(e.to_string()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

struct World {
    scene: SceneSpec,
    condition: Condition,
    strategy: UpdateStrategy,
    bias_mode: BiasMode,
}

impl WorldArgs {
    fn resolve(&self) -> anyhow::Result<World> {
        let mut scene = load_scene(&self.scene)?;
        if let Some(k) = self.k {
            scene.k = k;
        }
        if let Err(v) = scene.validate() {
            return usage(twinsync_core::SimError::InvalidScene(v).to_string());
        }
        Ok(World {
            scene,
            condition: parse_flag(&self.condition)?,
            strategy: parse_flag(&self.strategy)?,
            bias_mode: parse_flag(&self.bias_mode)?,
        })
    }

    fn run_config(&self, w: &World, checker: Checker, theta: f64) -> TwinRunConfig {
        let mut threat = w.condition.threat();
        threat.bias_mode = w.bias_mode;
        threat.signed_noise = self.signed_noise;
        TwinRunConfig {
            scene: w.scene.clone(),
            threat,
            checker,
            schedule: CheckSchedule {
                interval: self.q,
                window: self.l,
                threshold: theta,
            },
            seed: self.seed,
            twin_seed: None,
            strategy: w.strategy,
            steps: self.steps,
        }
    }
}

fn cmd_gen_scene(a: GenSceneArgs) -> anyhow::Result<()> {
    let mut cfg = SceneGen::new(a.objects, a.drones, a.seed);
    cfg.width = a.width;
    cfg.height = a.height;
    let scene = gen_scene(&cfg).or_else(|e| usage(e.to_string()))?;
    let text = scene.to_json();
    match a.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> anyhow::Result<()> {
    let w = a.world.resolve()?;
    let checker: Checker = parse_flag(&a.checker)?;
    let theta = parse_theta(&a.theta).or_else(|e| usage(e.to_string()))?;
    let mut cfg = a.world.run_config(&w, checker, theta);
    cfg.twin_seed = a.twin_seed;
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    let pace = a.realtime.map(Duration::from_millis);
    let trace = run_paired_with(&cfg, |row| {
        if let Some(d) = pace {
            println!(
                "t={} u={:.3} u_twin={:.3} metric={:.4}{}",
                row.t,
                row.u_physical,
                row.u_twin,
                row.metric_value,
                if row.updated { " update" } else { "" }
            );
            std::thread::sleep(d);
        }
    })?;
    let mut out = create(&a.trace)?;
    trace.write_csv(&mut out)?;
    out.flush()?;

    let row = SummaryRow {
        scene: a.world.scene.clone(),
        condition: w.condition.to_string(),
        checker,
        theta,
        q: a.world.q,
        l: a.world.l,
        seed: a.world.seed,
        repeat: 0,
        updates: trace.updates(),
        avg_utility_deviation: trace.avg_utility_deviation(),
        memory_cost: trace.memory_cost(),
    };
    let mut out = create(&a.summary)?;
    write_summary(&[row], &mut out)?;
    out.flush()?;
    log::info!(
        "{} updates, average utility deviation {}",
        trace.updates(),
        trace.avg_utility_deviation()
    );
    Ok(())
}

fn jobs(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Ok(v) = std::env::var("TWINSYNC_JOBS") {
        return match v.trim().parse() {
            Ok(n) => Ok(n),
            Err(_) => usage(format!("TWINSYNC_JOBS must be a non-negative integer, got `{v}`")),
        };
    }
    Ok(flag.unwrap_or(0))
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let w = a.world.resolve()?;
    let checkers: Vec<Checker> = a
        .checkers
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_flag(s.trim()))
        .collect::<anyhow::Result<_>>()?;
    if checkers.is_empty() {
        return usage("no checkers given");
    }
    let thetas = match &a.thetas {
        Some(s) => Some(parse_theta_list(s).or_else(|e| usage(e.to_string()))?),
        None => None,
    };
    if thetas.as_ref().is_some_and(|t| t.is_empty()) {
        return usage("threshold list is empty");
    }
    let mut threat = w.condition.threat();
    threat.bias_mode = w.bias_mode;
    threat.signed_noise = a.world.signed_noise;
    let cfg = SweepConfig {
        scene_name: a.world.scene.clone(),
        scene: w.scene.clone(),
        condition_name: w.condition.to_string(),
        threat,
        grid: checkers
            .iter()
            .map(|&c| (c, thetas.clone().unwrap_or_else(|| twinsync_core::sweep::default_thetas(c))))
            .collect(),
        q: a.world.q,
        l: a.world.l,
        steps: a.world.steps,
        repeats: a.repeats,
        seed: a.world.seed,
        strategy: w.strategy,
        jobs: jobs(a.jobs)?,
    };
    for &c in &checkers {
        if let Err(e) = a.world.run_config(&w, c, 0.0).validate() {
            return usage(e.to_string());
        }
    }
    if a.repeats == 0 {
        return usage("--repeats must be at least 1");
    }
    let rows = run_sweep(&cfg)?;
    let mut out = create(&a.out)?;
    write_summary(&rows, &mut out)?;
    out.flush()?;
    log::info!("{} runs written to {}", rows.len(), a.out.display());
    Ok(())
}

fn cmd_study(a: StudyArgs) -> anyhow::Result<()> {
    let scene = load_scene(&a.scene)?;
    let condition: Condition = parse_flag(&a.condition)?;
    let mut cfg = StrategyStudyConfig::new(scene, condition, a.samples, a.repeats, a.seed);
    cfg.threat.bias_mode = parse_flag(&a.bias_mode)?;
    cfg.threat.signed_noise = a.signed_noise;
    cfg.horizon = a.horizon;
    if a.samples == 0 || a.repeats == 0 {
        return usage("--samples and --repeats must be at least 1");
    }
    if (a.samples as u64) + 2 * STUDY_PHASE_STEPS > a.horizon {
        return usage("horizon too short for the requested number of start times");
    }
    let study = run_strategy_study(&cfg)?;
    let mut out = create(&a.out)?;
    writeln!(out, "strategy,mean,stdev,n")?;
    for o in &study.outcomes {
        writeln!(out, "{},{},{},{}", o.strategy, o.mean, o.stdev, o.deviations.len())?;
        println!("{:<7} mean {:.5} sd {:.5}", o.strategy.as_str(), o.mean, o.stdev);
    }
    out.flush()?;
    Ok(())
}

fn cmd_pareto(a: ParetoArgs) -> anyhow::Result<()> {
    let file = File::open(&a.input).or_else(|e| usage(format!("cannot open {}: {e}", a.input.display())))?;
    let rows = read_summary(file).or_else(|e| usage(e.to_string()))?;
    let report = ParetoReport::from_rows(&rows, a.baseline, a.max_updates).or_else(|e| usage(e.to_string()))?;
    let mut out = create(&a.out)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    for (c, hv) in &report.hypervolumes {
        println!("{:<9} hypervolume {:.4}", c.as_str(), hv);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenScene(a) => cmd_gen_scene(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::StrategyStudy(a) => cmd_study(a),
        Command::Pareto(a) => cmd_pareto(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
