//! `copush`: plan and simulate collaborative pushing scenarios.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use copush_core::error::Error;
use copush_core::hybrid::Libraries;
use copush_core::pipeline::{decompose_paths, initial_assignment, plan_paths, plan_subtask, run_pipeline, MetricsTable};
use copush_core::plot::{gantt_svg, trajectory_svg};
use copush_core::scenario::Scenario;
use copush_core::trace::Trace;
use serde::Serialize;

const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "copush", version, about = "Plan and simulate multi-robot pushing scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replaces the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Setting override, e.g. `search.epsilon=0.2`; repeatable.
    #[arg(long = "config-override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Mapf,
    Decompose,
    Assign,
    Hybrid,
    Simulate,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Timed object paths.
    Mapf(Common),
    /// Subtasks and their precedence DAG.
    Decompose(Common),
    /// First assignment round and its Gantt chart.
    Assign(Common),
    /// Hybrid plan for one subtask.
    Hybrid {
        #[command(flatten)]
        common: Common,
        /// Subtask label such as `S1_2`; defaults to the first subtask that moves.
        #[arg(long)]
        subtask: Option<String>,
    },
    /// Closed-loop episode: trace and metrics.
    Simulate(Common),
    /// Every stage, every artifact, and plots.
    All(Common),
    /// Runs one stage by name.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        stage: Stage,
    },
    /// SVG trajectory overlay and Gantt chart from a trace.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Trace file; defaults to `<out>/trace.txt`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

/// Failure of a stage, mapped to an exit code.
enum Fail {
    Invalid(anyhow::Error),
    Infeasible(String),
    Episode(String),
}

impl From<anyhow::Error> for Fail {
    fn from(e: anyhow::Error) -> Self {
        Fail::Invalid(e)
    }
}

fn core(e: Error) -> Fail {
    match e {
        Error::Infeasible(msg) => Fail::Infeasible(msg),
        other => Fail::Invalid(other.into()),
    }
}

struct Ctx {
    sc: Scenario,
    out: PathBuf,
}

impl Ctx {
    fn load(c: &Common) -> Result<Self, Fail> {
        let mut overrides = Vec::new();
        if let Some(seed) = c.seed {
            overrides.push(format!("seed={seed}"));
        }
        overrides.extend(c.overrides.iter().cloned());
        let sc = Scenario::load(&c.scenario, &overrides).map_err(|e| Fail::Invalid(anyhow::anyhow!("{}: {e}", c.scenario.display())))?;
        fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
        let ctx = Self { sc, out: c.out.clone() };
        ctx.write("scenario.toml", &ctx.sc.to_toml())?;
        Ok(ctx)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, body: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write(name, &body)
    }
}

fn mapf(ctx: &Ctx) -> Result<(), Fail> {
    let paths = plan_paths(&ctx.sc).map_err(core)?;
    ctx.json("paths.json", &paths)?;
    println!("{} paths, {} steps", paths.len(), paths.first().map_or(0, |p| p.len()));
    Ok(())
}

fn decompose(ctx: &Ctx) -> Result<(), Fail> {
    let paths = plan_paths(&ctx.sc).map_err(core)?;
    let d = decompose_paths(&ctx.sc, &paths).map_err(core)?;
    ctx.json("paths.json", &paths)?;
    ctx.json("decomposition.json", &d)?;
    ctx.write("order.dot", &d.to_dot())?;
    for (a, b) in d.order.cover_edges() {
        println!("{} < {}", d.subtasks[a].label(), d.subtasks[b].label());
    }
    println!("{} subtasks, longest chain {}", d.subtasks.len(), d.order.longest_chain());
    Ok(())
}

fn assign(ctx: &Ctx) -> Result<(), Fail> {
    let paths = plan_paths(&ctx.sc).map_err(core)?;
    let d = decompose_paths(&ctx.sc, &paths).map_err(core)?;
    let plan = initial_assignment(&ctx.sc, &d).map_err(core)?;
    ctx.json("task_plan.json", &plan)?;
    let gantt = plan.gantt(&d.subtasks);
    ctx.write("assignment_gantt.txt", &gantt)?;
    print!("{gantt}");
    Ok(())
}

fn hybrid(ctx: &Ctx, subtask: Option<&str>) -> Result<(), Fail> {
    let paths = plan_paths(&ctx.sc).map_err(core)?;
    let d = decompose_paths(&ctx.sc, &paths).map_err(core)?;
    let s = match subtask {
        Some(label) => d
            .subtasks
            .iter()
            .position(|s| s.label() == label)
            .ok_or_else(|| Fail::Invalid(anyhow::anyhow!("no subtask {label}")))?,
        None => d
            .order
            .topological_order()
            .and_then(|o| o.into_iter().find(|&s| !d.subtasks[s].is_stationary()))
            .ok_or_else(|| Fail::Infeasible("no moving subtask".into()))?,
    };
    let plan = initial_assignment(&ctx.sc, &d).map_err(core)?;
    let hp = plan_subtask(&ctx.sc, &d, &plan, s, &mut Libraries::default()).map_err(core)?;
    ctx.json("hybrid_plan.json", &hp)?;
    println!("{}: {} stages, cost {:.4}", d.subtasks[s].label(), hp.stages.len(), hp.cost);
    Ok(())
}

fn simulate(ctx: &Ctx, everything: bool) -> Result<(), Fail> {
    let clock = Instant::now();
    let run = run_pipeline(&ctx.sc, &mut Libraries::default()).map_err(core)?;
    ctx.write("trace.txt", &run.episode.trace)?;
    ctx.write("metrics.txt", &run.metrics.to_text())?;
    ctx.json("metrics.json", &run.metrics)?;
    ctx.json("report.json", &run.episode.report)?;
    ctx.write("gantt.txt", &run.episode.report.gantt(&run.decomposition))?;
    let mut times = run.times;
    if everything {
        ctx.json("paths.json", &run.paths)?;
        ctx.json("decomposition.json", &run.decomposition)?;
        ctx.write("order.dot", &run.decomposition.to_dot())?;
        plot_trace(ctx, &Trace::parse(&run.episode.trace))?;
        times.total = clock.elapsed().as_secs_f64();
    }
    ctx.json("timings.json", &times)?;
    print!("{}", run.metrics.to_text());
    finish(&run.metrics)
}

fn finish(m: &MetricsTable) -> Result<(), Fail> {
    if m.success {
        Ok(())
    } else {
        Err(Fail::Episode(m.reason.clone().unwrap_or_else(|| "episode failed".into())))
    }
}

fn plot_trace(ctx: &Ctx, trace: &Trace) -> anyhow::Result<()> {
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
    ctx.write("trajectory.svg", &trajectory_svg(&ctx.sc, trace))?;
    ctx.write("gantt.svg", &gantt_svg(trace))?;
    Ok(())
}

fn plot(ctx: &Ctx, trace: Option<&Path>) -> Result<(), Fail> {
    let path = trace.map_or_else(|| ctx.path("trace.txt"), Path::to_path_buf);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    plot_trace(ctx, &Trace::parse(&text))?;
    Ok(())
}

fn stage(ctx: &Ctx, stage: Stage) -> Result<(), Fail> {
    match stage {
        Stage::Mapf => mapf(ctx),
        Stage::Decompose => decompose(ctx),
        Stage::Assign => assign(ctx),
        Stage::Hybrid => hybrid(ctx, None),
        Stage::Simulate => simulate(ctx, false),
        Stage::All => simulate(ctx, true),
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Mapf(c) | Command::Decompose(c) | Command::Assign(c) | Command::Simulate(c) | Command::All(c) => c,
            Command::Hybrid { common, .. } | Command::Run { common, .. } | Command::Plot { common, .. } => common,
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Fail> {
    match cmd {
        Command::Mapf(c) => stage(&Ctx::load(&c)?, Stage::Mapf),
        Command::Decompose(c) => stage(&Ctx::load(&c)?, Stage::Decompose),
        Command::Assign(c) => stage(&Ctx::load(&c)?, Stage::Assign),
        Command::Hybrid { common, subtask } => hybrid(&Ctx::load(&common)?, subtask.as_deref()),
        Command::Simulate(c) => stage(&Ctx::load(&c)?, Stage::Simulate),
        Command::All(c) => stage(&Ctx::load(&c)?, Stage::All),
        Command::Run { common, stage: s } => stage(&Ctx::load(&common)?, s),
        Command::Plot { common, trace } => plot(&Ctx::load(&common)?, trace.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.command.common().out.clone();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Fail::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            if out.is_dir() {
                let _ = fs::write(out.join("infeasible.txt"), format!("{msg}\n"));
            }
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Fail::Episode(msg)) => {
            eprintln!("episode failed: {msg}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}
