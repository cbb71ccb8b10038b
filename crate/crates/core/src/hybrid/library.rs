//! Verified-plan cache and the proposer interface.
//!
//! Plans are stored in the frame of their terminal pose, so a stored plan
//! serves any query with the same relative displacement regardless of where
//! in the workspace, or at which absolute heading, it happens.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact::PushingMode;
use crate::error::{Error, Result};
use crate::geometry::Pose;

use super::Keyframe;

const FORMAT: &str = "copush.plans/1";
/// Quantum of the displacement key, metres and radians.
pub const KEY_QUANTUM: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlanKey {
    /// Object shape and team hash.
    pub team_key: u64,
    pub team_size: usize,
    pub dx: i64,
    pub dy: i64,
    pub dpsi: i64,
}

impl PlanKey {
    pub fn new(team_key: u64, team_size: usize, start: &Pose, goal: &Pose) -> Self {
        let d = canonical(goal, start);
        let q = |v: f64| (v / KEY_QUANTUM).round() as i64;
        Self {
            team_key,
            team_size,
            dx: q(d.x),
            dy: q(d.y),
            dpsi: q(d.psi),
        }
    }
}

/// `pose` expressed in the frame of `terminal`.
pub fn canonical(terminal: &Pose, pose: &Pose) -> Pose {
    terminal.relative(pose)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub key: PlanKey,
    /// Keyframes relative to the terminal pose; the last one is the origin.
    pub keyframes: Vec<(Pose, Option<PushingMode>)>,
}

impl PlanEntry {
    /// Start pose relative to the terminal pose.
    pub fn displacement(&self) -> Pose {
        self.keyframes[0].0
    }

    /// Keyframes placed for the query `start → goal`. Intermediate poses
    /// follow the goal; the endpoints are the query's own.
    pub fn instantiate(&self, start: &Pose, goal: &Pose) -> Vec<Keyframe> {
        let n = self.keyframes.len();
        self.keyframes
            .iter()
            .enumerate()
            .map(|(i, (rel, mode))| Keyframe {
                pose: match i {
                    0 => *start,
                    i if i + 1 == n => *goal,
                    _ => goal.compose(rel),
                },
                mode: mode.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanLibrary {
    entries: BTreeMap<PlanKey, PlanEntry>,
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    format: String,
    entries: Vec<PlanEntry>,
}

impl PlanLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &PlanEntry> {
        self.entries.values()
    }

    /// Stores a complete plan; an existing entry under the same key is kept.
    pub fn insert(&mut self, team_key: u64, team_size: usize, stages: &[Keyframe]) {
        let (Some(first), Some(last)) = (stages.first(), stages.last()) else {
            return;
        };
        let key = PlanKey::new(team_key, team_size, &first.pose, &last.pose);
        self.entries.entry(key).or_insert_with(|| PlanEntry {
            key,
            keyframes: stages.iter().map(|k| (canonical(&last.pose, &k.pose), k.mode.clone())).collect(),
        });
    }

    pub fn lookup(&self, team_key: u64, team_size: usize, start: &Pose, goal: &Pose) -> Option<Vec<Keyframe>> {
        self.entries
            .get(&PlanKey::new(team_key, team_size, start, goal))
            .map(|e| e.instantiate(start, goal))
    }

    /// Up to `k` entries for the same team, nearest in canonical
    /// displacement first.
    pub fn nearest(&self, team_key: u64, team_size: usize, start: &Pose, goal: &Pose, k: usize) -> Vec<&PlanEntry> {
        let d = canonical(goal, start);
        let mut found: Vec<(f64, &PlanEntry)> = self
            .entries
            .values()
            .filter(|e| e.key.team_key == team_key && e.key.team_size == team_size)
            .map(|e| (e.displacement().distance(&d) + e.displacement().angle_to(&d).abs(), e))
            .collect();
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.key.cmp(&b.1.key)));
        found.into_iter().take(k).map(|(_, e)| e).collect()
    }

    pub fn to_json(&self) -> String {
        let file = PlanFile {
            format: FORMAT.into(),
            entries: self.entries.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("plain data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PlanFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if file.format != FORMAT {
            return Err(Error::Format(format!("expected {FORMAT}, found {}", file.format)));
        }
        Ok(Self {
            entries: file.entries.into_iter().map(|e| (e.key, e)).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Source of candidate plan fragments for `start → goal`. Suggestions are
/// always re-verified by the search.
pub trait Proposer {
    fn propose(&self, lib: &PlanLibrary, team_key: u64, team_size: usize, start: &Pose, goal: &Pose) -> Vec<Vec<Keyframe>>;
}

/// Proposes nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoProposer;

impl Proposer for NoProposer {
    fn propose(&self, _: &PlanLibrary, _: u64, _: usize, _: &Pose, _: &Pose) -> Vec<Vec<Keyframe>> {
        Vec::new()
    }
}

/// Proposes the library's nearest stored plans, re-anchored on the query.
#[derive(Debug, Clone, Copy)]
pub struct LibraryProposer {
    pub k: usize,
}

impl Default for LibraryProposer {
    fn default() -> Self {
        Self { k: 3 }
    }
}

impl Proposer for LibraryProposer {
    fn propose(&self, lib: &PlanLibrary, team_key: u64, team_size: usize, start: &Pose, goal: &Pose) -> Vec<Vec<Keyframe>> {
        lib.nearest(team_key, team_size, start, goal, self.k)
            .into_iter()
            .map(|e| e.instantiate(start, goal))
            .collect()
    }
}
