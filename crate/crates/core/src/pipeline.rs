//! Object paths, decomposition and the closed-loop episode, chained.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assign::{assign, AssignState, Estimator, TaskPlan};
use crate::decompose::{area_margin, segment_and_order, Decomposition};
use crate::episode::{run_episode, Episode, ExecutionReport};
use crate::error::{Error, Result};
use crate::hybrid::{search, HybridPlan, Libraries, LibraryProposer};
use crate::mapf::{plan_all, TimedPath};
use crate::scenario::Scenario;

pub fn plan_paths(sc: &Scenario) -> Result<Vec<TimedPath>> {
    plan_all(&sc.mapf_problem()).map_err(|e| Error::Infeasible(e.to_string()))
}

pub fn decompose_paths(sc: &Scenario, paths: &[TimedPath]) -> Result<Decomposition> {
    let polys: Vec<_> = sc.objects.iter().map(|o| o.model.poly.clone()).collect();
    segment_and_order(paths, &polys, area_margin(&sc.mapf_problem())).map_err(|e| Error::Infeasible(e.to_string()))
}

/// First assignment round from the scenario's start state.
pub fn initial_assignment(sc: &Scenario, decomp: &Decomposition) -> Result<TaskPlan> {
    let est = Estimator::new(sc.object_models(), sc.robots.clone(), sc.config().assign.clone());
    let state = AssignState::initial(decomp.subtasks.len(), sc.robot_starts.iter().map(|p| p.position()).collect());
    assign(&decomp.subtasks, &decomp.order, &est, &state).map_err(|e| Error::Infeasible(e.to_string()))
}

/// Hybrid plan for subtask `s` along its own waypoints, pushed by the
/// subgroup `plan` gives it.
pub fn plan_subtask(sc: &Scenario, decomp: &Decomposition, plan: &TaskPlan, s: usize, libs: &mut Libraries) -> Result<HybridPlan> {
    let entry = plan
        .entries
        .iter()
        .find(|e| e.subtask == s)
        .ok_or_else(|| Error::Infeasible(format!("subtask {} has no subgroup", decomp.subtasks[s].label())))?;
    let st = &decomp.subtasks[s];
    let ctx = sc.push_context(st.object, &entry.robots);
    search(&ctx, &st.waypoints(), libs, &LibraryProposer::default(), &sc.config().search)
        .map_err(|e| Error::Infeasible(format!("{}: {e}", st.label())))
}

/// Wall-clock seconds per planning stage. Kept apart from the metrics, which
/// must not change between reruns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub mapf: f64,
    pub decomposition: f64,
    pub assignment: f64,
    pub hybrid: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    pub reason: Option<String>,
    pub subtasks: usize,
    pub longest_chain: usize,
    pub modes: usize,
    pub switches: usize,
    pub collisions: usize,
    pub completion_time: f64,
    pub replans: usize,
    pub reassignments: usize,
    pub rounds: usize,
    pub max_terminal_distance: f64,
    pub max_terminal_angle: f64,
}

impl MetricsTable {
    pub fn new(sc: &Scenario, decomp: &Decomposition, report: &ExecutionReport) -> Self {
        let worst = |k: usize| report.terminal_errors.iter().map(|e| e[k]).fold(0.0, f64::max);
        Self {
            scenario: sc.file.name.clone(),
            seed: sc.seed(),
            success: report.success,
            reason: report.reason.clone(),
            subtasks: decomp.subtasks.len(),
            longest_chain: decomp.order.longest_chain(),
            modes: report.modes,
            switches: report.switches,
            collisions: report.collisions,
            completion_time: report.makespan,
            replans: report.replans,
            reassignments: report.reassignments,
            rounds: report.rounds,
            max_terminal_distance: worst(0),
            max_terminal_angle: worst(1),
        }
    }

    /// Two-column text table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k:<22} {v}");
        };
        row("scenario", self.scenario.clone());
        row("seed", self.seed.to_string());
        row("success", self.success.to_string());
        row("reason", self.reason.clone().unwrap_or_else(|| "-".into()));
        row("subtasks", self.subtasks.to_string());
        row("longest_chain", self.longest_chain.to_string());
        row("modes", self.modes.to_string());
        row("switches", self.switches.to_string());
        row("collisions", self.collisions.to_string());
        row("completion_time", format!("{:.6}", self.completion_time));
        row("replans", self.replans.to_string());
        row("reassignments", self.reassignments.to_string());
        row("rounds", self.rounds.to_string());
        row("max_terminal_distance", format!("{:.6}", self.max_terminal_distance));
        row("max_terminal_angle", format!("{:.6}", self.max_terminal_angle));
        out
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub paths: Vec<TimedPath>,
    pub decomposition: Decomposition,
    pub episode: Episode,
    pub metrics: MetricsTable,
    pub times: StageTimes,
}

pub fn run_pipeline(sc: &Scenario, libs: &mut Libraries) -> Result<PipelineOutput> {
    let clock = Instant::now();
    let paths = plan_paths(sc)?;
    let mapf = clock.elapsed().as_secs_f64();
    let t = Instant::now();
    let decomposition = decompose_paths(sc, &paths)?;
    let decomp_time = t.elapsed().as_secs_f64();
    let episode = run_episode(sc, &decomposition, libs);
    let metrics = MetricsTable::new(sc, &decomposition, &episode.report);
    let times = StageTimes {
        mapf,
        decomposition: decomp_time,
        assignment: episode.timings.assign,
        hybrid: episode.timings.hybrid,
        total: clock.elapsed().as_secs_f64(),
    };
    Ok(PipelineOutput {
        paths,
        decomposition,
        episode,
        metrics,
        times,
    })
}
