//! Reading episode traces back.

use std::collections::BTreeMap;

use crate::geometry::Pose;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceHeader {
    pub scenario_hash: Option<u64>,
    pub seed: Option<u64>,
    pub config: Option<String>,
    /// `[min_x, min_y, max_x, max_y]`.
    pub workspace: Option<[f64; 4]>,
    pub subtasks: Vec<PlannedSubtask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedSubtask {
    pub label: String,
    pub object: usize,
    pub poses: Vec<Pose>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Running {
    pub label: String,
    pub stage: usize,
    pub pushing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub t: f64,
    pub objects: Vec<Pose>,
    pub robots: Vec<Pose>,
    pub active: Vec<Running>,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub ticks: Vec<Tick>,
    /// Problems met while reading; parsing stops at the first bad tick line.
    pub warnings: Vec<String>,
}

/// Mode, switch and collision counts recovered from a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceCounts {
    pub modes: usize,
    pub switches: usize,
    pub collisions: usize,
}

fn parse_pose(s: &str) -> Option<Pose> {
    let mut it = s.split(',').map(|v| v.parse::<f64>().ok());
    let (x, y, psi) = (it.next()??, it.next()??, it.next()??);
    it.next().is_none().then(|| Pose::new(x, y, psi))
}

fn parse_poses(s: &str) -> Option<Vec<Pose>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(';').map(parse_pose).collect()
}

fn parse_header(h: &mut TraceHeader, line: &str) -> Option<()> {
    let body = line.trim_start_matches('#').trim();
    let (key, rest) = body.split_once(' ').unwrap_or((body, ""));
    match key {
        "scenario" => h.scenario_hash = Some(u64::from_str_radix(rest, 16).ok()?),
        "seed" => h.seed = Some(rest.parse().ok()?),
        "config" => h.config = Some(rest.to_string()),
        "workspace" => {
            let v: Vec<f64> = rest.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
            h.workspace = Some(v.try_into().ok()?);
        }
        "subtask" => {
            let mut parts = rest.splitn(3, ' ');
            let label = parts.next()?.to_string();
            let object = parts.next()?.parse().ok()?;
            let poses = parse_poses(parts.next().unwrap_or(""))?;
            h.subtasks.push(PlannedSubtask { label, object, poses });
        }
        _ => {}
    }
    Some(())
}

fn parse_tick(line: &str) -> Option<Tick> {
    let fields: BTreeMap<&str, &str> = line.split(' ').map(|f| f.split_once('=')).collect::<Option<_>>()?;
    let active = fields
        .get("act")?
        .split(';')
        .filter(|a| !a.is_empty())
        .map(|a| {
            let mut p = a.split(':');
            Some(Running {
                label: p.next()?.to_string(),
                stage: p.next()?.parse().ok()?,
                pushing: p.next()? == "push",
            })
        })
        .collect::<Option<_>>()?;
    Some(Tick {
        t: fields.get("t")?.parse().ok()?,
        objects: parse_poses(fields.get("obj")?)?,
        robots: parse_poses(fields.get("rob")?)?,
        active,
        events: fields
            .get("ev")?
            .split(';')
            .filter(|e| !e.is_empty())
            .map(str::to_string)
            .collect(),
    })
}

impl Trace {
    pub fn parse(text: &str) -> Self {
        let mut trace = Trace::default();
        // Every record ends with a newline; a last line without one was cut.
        let complete = match text.rfind('\n') {
            _ if text.ends_with('\n') => text,
            Some(i) => {
                trace.warnings.push(format!("line {}: truncated record, ignored", text.lines().count()));
                &text[..=i]
            }
            None if text.is_empty() => text,
            None => {
                trace.warnings.push("line 1: truncated record, ignored".into());
                ""
            }
        };
        for (n, line) in complete.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            if line.starts_with('#') {
                if parse_header(&mut trace.header, line).is_none() {
                    trace.warnings.push(format!("line {}: unreadable header", n + 1));
                }
                continue;
            }
            match parse_tick(line) {
                Some(t) => trace.ticks.push(t),
                None => {
                    trace.warnings.push(format!("line {}: truncated record, later lines ignored", n + 1));
                    break;
                }
            }
        }
        trace
    }

    pub fn events(&self) -> impl Iterator<Item = (f64, &str)> {
        self.ticks.iter().flat_map(|t| t.events.iter().map(move |e| (t.t, e.as_str())))
    }

    pub fn counts(&self) -> TraceCounts {
        let mut c = TraceCounts::default();
        for (_, ev) in self.events() {
            match ev.split(':').next() {
                Some("mode") => c.modes += 1,
                Some("switch") => c.switches += 1,
                Some("collision") => c.collisions += 1,
                _ => {}
            }
        }
        c
    }

    /// Per subtask label, the (first, last) tick times it was running.
    pub fn activity(&self) -> BTreeMap<String, (f64, f64)> {
        let mut out: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for t in &self.ticks {
            for a in &t.active {
                out.entry(a.label.clone()).and_modify(|w| w.1 = t.t).or_insert((t.t, t.t));
            }
        }
        out
    }

    /// Robots named in each subtask's latest `start` event.
    pub fn groups(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out = BTreeMap::new();
        for (_, ev) in self.events() {
            let mut p = ev.split(':');
            if p.next() == Some("start") {
                if let (Some(label), Some(robots)) = (p.next(), p.next()) {
                    let rs = robots.split(',').filter_map(|r| r.parse().ok()).collect();
                    out.insert(label.to_string(), rs);
                }
            }
        }
        out
    }

    /// Time of the first event `kind:label`, if any.
    pub fn first_event(&self, kind: &str, label: &str) -> Option<f64> {
        self.events().find_map(|(t, ev)| {
            let mut p = ev.split(':');
            (p.next() == Some(kind) && p.next() == Some(label)).then_some(t)
        })
    }

    /// Stage targets announced by `key` events, per subtask label.
    pub fn keyframes(&self) -> Vec<(String, Pose)> {
        self.events()
            .filter_map(|(_, ev)| {
                let mut p = ev.splitn(3, ':');
                (p.next()? == "key").then_some(())?;
                let label = p.next()?.to_string();
                Some((label, parse_pose(p.next()?)?))
            })
            .collect()
    }
}
