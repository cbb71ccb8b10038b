use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact::PushingMode;
use crate::error::{Error, Result};
use crate::geometry::Twist;

const FORMAT: &str = "copush.modes/1";
pub const AZIMUTH_BINS: u8 = 16;
pub const RATIO_BINS: u8 = 5;

/// Object signature plus the quantized direction of a twist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeKey {
    pub signature: u64,
    pub azimuth: u8,
    pub ratio: u8,
}

impl ModeKey {
    /// Azimuth bins are centred on multiples of 22.5°; the ratio
    /// `ω / (‖v‖ + |ω|)` is split into five bins centred on −1, −½, 0, ½, 1.
    pub fn new(signature: u64, p: &Twist) -> Self {
        let v = p.linear().norm();
        let width = std::f64::consts::TAU / AZIMUTH_BINS as f64;
        let azimuth = if v > 1e-12 {
            ((p.vy.atan2(p.vx) / width).round() as i64).rem_euclid(AZIMUTH_BINS as i64) as u8
        } else {
            0
        };
        let r = p.omega / (v + p.omega.abs()).max(1e-12);
        let ratio = (((r + 1.0) * 0.5 * (RATIO_BINS - 1) as f64).round() as i64).clamp(0, RATIO_BINS as i64 - 1) as u8;
        Self {
            signature,
            azimuth,
            ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub key: ModeKey,
    pub twist: Twist,
    pub mode: PushingMode,
    pub tracking_error: f64,
}

#[derive(Serialize, Deserialize)]
struct ModeFile {
    format: String,
    entries: Vec<ModeEntry>,
}

/// Verified modes indexed by object and twist direction. Insertion needs
/// `&mut`, queries share `&`; wrap in a lock to share across threads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeLibrary {
    entries: BTreeMap<ModeKey, ModeEntry>,
}

impl ModeLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores a mode that passed practical feasibility for `p`. The first
    /// entry of a cell is kept unless the new one tracked more accurately.
    pub fn insert(&mut self, signature: u64, p: &Twist, mode: PushingMode, tracking_error: f64) {
        let key = ModeKey::new(signature, p);
        let entry = ModeEntry {
            key,
            twist: *p,
            mode,
            tracking_error,
        };
        match self.entries.get(&key) {
            Some(old) if old.tracking_error <= tracking_error => {}
            _ => {
                self.entries.insert(key, entry);
            }
        }
    }

    pub fn query(&self, signature: u64, p: &Twist) -> Option<&PushingMode> {
        self.entries.get(&ModeKey::new(signature, p)).map(|e| &e.mode)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ModeEntry> {
        self.entries.values()
    }

    pub fn to_json(&self) -> String {
        let file = ModeFile {
            format: FORMAT.into(),
            entries: self.entries.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("library serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModeFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if file.format != FORMAT {
            return Err(Error::Format(format!("unsupported mode library format {:?}", file.format)));
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
