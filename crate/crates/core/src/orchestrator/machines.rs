//! The machines file: per-machine status, maintenance and design revision.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cycle_model::StationMeta;
use crate::simulator::Scenario;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MachineState {
    Production,
    Maintenance,
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineStatus {
    pub machine_id: String,
    pub status: MachineState,
    pub last_maintenance_end: Timestamp,
    pub design_revision: String,
    pub stations: Vec<StationMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachinesFile {
    pub machines: Vec<MachineStatus>,
}

#[derive(Debug, thiserror::Error)]
#[error("malformed machines file {path}: {reason}")]
pub struct MalformedMachinesFile {
    pub path: String,
    pub reason: String,
}

impl MachinesFile {
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        for m in &self.machines {
            if m.machine_id.is_empty() {
                return Err("empty machine_id".into());
            }
            for s in &m.stations {
                if s.machine_id != m.machine_id {
                    return Err(format!("station {} listed under machine {}", s.key(), m.machine_id));
                }
                if !seen.insert(s.key()) {
                    return Err(format!("duplicate station {}", s.key()));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, MalformedMachinesFile> {
        let bad = |reason: String| MalformedMachinesFile { path: origin.to_string(), reason };
        let file: MachinesFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        file.validate().map_err(bad)?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, MalformedMachinesFile> {
        let origin = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| MalformedMachinesFile { path: origin.clone(), reason: e.to_string() })?;
        Self::parse(&text, &origin)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        crate::baseline::atomic_write(path, text.as_bytes())
    }

    /// Every scenario machine in production since the scenario's maintenance
    /// end, in order of first appearance.
    pub fn from_scenario(scenario: &Scenario, design_revision: &str) -> Self {
        let mut machines: Vec<MachineStatus> = Vec::new();
        for st in &scenario.stations {
            let id = &st.meta.machine_id;
            let i = match machines.iter().position(|m| &m.machine_id == id) {
                Some(i) => i,
                None => {
                    machines.push(MachineStatus {
                        machine_id: id.clone(),
                        status: MachineState::Production,
                        last_maintenance_end: scenario.maintenance_end(),
                        design_revision: design_revision.to_string(),
                        stations: Vec::new(),
                    });
                    machines.len() - 1
                }
            };
            machines[i].stations.push(st.meta.clone());
        }
        MachinesFile { machines }
    }

    pub fn find_station(&self, machine: &str, station: &str) -> Option<&StationMeta> {
        self.machines
            .iter()
            .filter(|m| m.machine_id == machine)
            .flat_map(|m| &m.stations)
            .find(|s| s.station_id == station)
    }
}
