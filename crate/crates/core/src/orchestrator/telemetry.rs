//! Where jobs read station telemetry from.

use std::collections::HashMap;
use std::path::PathBuf;

use crate::cycle_model::{
    read_events_file, read_samples_file, CycleError, PressureSample, SlotValveEvent, StationKey, StationMeta,
};
use crate::simulator::telemetry_paths;

pub type Streams = (Vec<PressureSample>, Vec<SlotValveEvent>);

pub trait TelemetrySource: Sync {
    /// Samples and valve events with timestamps in `[start, end)`.
    fn window(&self, station: &StationMeta, start: f64, end: f64) -> Result<Streams, CycleError>;
}

fn slice(samples: &[PressureSample], events: &[SlotValveEvent], start: f64, end: f64) -> Streams {
    let s_lo = samples.partition_point(|s| s.timestamp < start);
    let s_hi = samples.partition_point(|s| s.timestamp < end);
    let e_lo = events.partition_point(|e| e.timestamp < start);
    let e_hi = events.partition_point(|e| e.timestamp < end);
    (samples[s_lo..s_hi].to_vec(), events[e_lo..e_hi].to_vec())
}

/// CSV files under `<root>/telemetry/<machine>/<station>.{pressure,valves}.csv`.
#[derive(Debug, Clone)]
pub struct FileTelemetry {
    pub root: PathBuf,
}

impl TelemetrySource for FileTelemetry {
    fn window(&self, station: &StationMeta, start: f64, end: f64) -> Result<Streams, CycleError> {
        let (sp, vp) = telemetry_paths(&self.root, station);
        let samples = read_samples_file(&sp)?;
        let events = read_events_file(&vp)?;
        Ok(slice(&samples, &events, start, end))
    }
}

/// Whole streams held in memory, as produced by the simulator.
#[derive(Debug, Clone, Default)]
pub struct MemoryTelemetry {
    pub streams: HashMap<StationKey, Streams>,
}

impl MemoryTelemetry {
    pub fn insert(&mut self, key: StationKey, samples: Vec<PressureSample>, events: Vec<SlotValveEvent>) {
        self.streams.insert(key, (samples, events));
    }
}

impl TelemetrySource for MemoryTelemetry {
    fn window(&self, station: &StationMeta, start: f64, end: f64) -> Result<Streams, CycleError> {
        let (s, e) = self
            .streams
            .get(&station.key())
            .ok_or_else(|| CycleError::Io(format!("no telemetry for {}", station.key())))?;
        Ok(slice(s, e, start, end))
    }
}
