//! Hourly tick: turns machine status plus run state into per-station jobs.
//!
//! A tick at clock `t` looks at the hour `[t - 1h, t)`. Per station:
//! a maintenance end or design revision different from the last one seen
//! invalidates the baseline and nothing else runs that hour; otherwise a
//! machine in production gets a baseline build (once the window starts at
//! least an hour after maintenance end) or, with a baseline, an analysis.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::machines::{MachineState, MachineStatus};
use crate::baseline::{atomic_write, Trigger};
use crate::cycle_model::{StationKey, StationMeta};
use crate::time::{Timestamp, Window, SECONDS_PER_HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    BuildBaseline,
    Analyze,
    InvalidateBaseline,
}

impl JobKind {
    pub fn label(self) -> &'static str {
        match self {
            JobKind::BuildBaseline => "build_baseline",
            JobKind::Analyze => "analyze",
            JobKind::InvalidateBaseline => "invalidate_baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub station: StationMeta,
    pub window: Window,
    pub kind: JobKind,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StationState {
    pub baseline: bool,
    pub last_window: Option<Window>,
    pub last_maintenance_seen: Option<Timestamp>,
    pub last_design_revision: Option<String>,
    /// Why the current (or next) baseline is built.
    pub trigger: Option<Trigger>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunState {
    /// Keyed by `machine/station`.
    pub stations: BTreeMap<String, StationState>,
    pub last_tick: Option<Timestamp>,
    /// Jobs of the tick in progress; cleared once all have results.
    #[serde(default)]
    pub pending: Vec<Job>,
}

impl RunState {
    pub fn station(&self, key: &StationKey) -> Option<&StationState> {
        self.stations.get(&key.to_string())
    }

    pub fn station_mut(&mut self, key: &StationKey) -> &mut StationState {
        self.stations.entry(key.to_string()).or_default()
    }

    /// `Ok(None)` when the file does not exist.
    pub fn load(path: &Path) -> Result<Option<Self>, String> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| format!("{}: {e}", path.display())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(format!("{}: {e}", path.display())),
        }
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        atomic_write(path, text.as_bytes())
    }
}

/// Hours to wait after maintenance before the baseline window may start.
pub const SETTLE_HOURS: f64 = 1.0;

pub fn tick(clock: Timestamp, machines: &[MachineStatus], state: &mut RunState) -> Vec<Job> {
    let window = Window::hour_ending(clock);
    let mut jobs = Vec::new();
    for m in machines {
        for meta in &m.stations {
            let st = state.station_mut(&meta.key());
            // a repeated or earlier clock (a re-run after a restart) is a no-op
            if st.last_window.is_some_and(|w| window.end.0 <= w.end.0) {
                continue;
            }
            let first_sight = st.last_maintenance_seen.is_none() && st.last_design_revision.is_none();
            let maint_changed = st.last_maintenance_seen != Some(m.last_maintenance_end);
            let rev_changed = st.last_design_revision.as_deref() != Some(m.design_revision.as_str());
            st.last_maintenance_seen = Some(m.last_maintenance_end);
            st.last_design_revision = Some(m.design_revision.clone());
            if first_sight {
                st.trigger.get_or_insert(Trigger::Maintenance);
            } else if maint_changed || rev_changed {
                let trigger = if maint_changed { Trigger::Maintenance } else { Trigger::DesignChange };
                st.trigger = Some(trigger);
                st.last_window = Some(window);
                jobs.push(Job { station: meta.clone(), window, kind: JobKind::InvalidateBaseline, trigger });
                continue;
            }
            if m.status != MachineState::Production {
                continue;
            }
            let trigger = st.trigger.unwrap_or(Trigger::Maintenance);
            if st.baseline {
                st.last_window = Some(window);
                jobs.push(Job { station: meta.clone(), window, kind: JobKind::Analyze, trigger });
            } else if window.start.0 >= m.last_maintenance_end.0 + SETTLE_HOURS * SECONDS_PER_HOUR {
                st.last_window = Some(window);
                jobs.push(Job { station: meta.clone(), window, kind: JobKind::BuildBaseline, trigger });
            }
        }
    }
    state.last_tick = Some(clock);
    jobs
}
