//! Stations, raw telemetry, and segmentation of a pressure stream into cycles.
//!
//! A cycle is the pressure trace between a slot-valve close and the next
//! valve open, taken as the half-open interval `[close, open)`. Every
//! downstream computation (distances, features) works on `log10` pressure.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const DEFAULT_MIN_CYCLE_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationType {
    Process,
    NonProcess,
}

impl StationType {
    /// Hyphenated label used in alert tables (`non-process`).
    pub fn label(self) -> &'static str {
        match self {
            StationType::Process => "process",
            StationType::NonProcess => "non-process",
        }
    }
}

impl fmt::Display for StationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StationMeta {
    pub machine_id: String,
    pub station_id: String,
    pub station_type: StationType,
    #[serde(default)]
    pub function: String,
}

impl StationMeta {
    pub fn new(machine: &str, station: &str, station_type: StationType, function: &str) -> Self {
        StationMeta {
            machine_id: machine.to_string(),
            station_id: station.to_string(),
            station_type,
            function: function.to_string(),
        }
    }

    pub fn key(&self) -> StationKey {
        StationKey {
            machine_id: self.machine_id.clone(),
            station_id: self.station_id.clone(),
        }
    }
}

/// `(machine, station)` identity, used for locks, state and log records.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StationKey {
    pub machine_id: String,
    pub station_id: String,
}

impl fmt::Display for StationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.machine_id, self.station_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureSample {
    /// Seconds.
    pub timestamp: f64,
    /// Torr.
    pub pressure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValveKind {
    Close,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotValveEvent {
    pub timestamp: f64,
    pub kind: ValveKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureCycle {
    pub start: f64,
    pub end: f64,
    pub samples: Vec<PressureSample>,
    /// `log10(samples[i].pressure)`; empty until [`log_transform`] runs.
    pub log_values: Vec<f64>,
}

impl PressureCycle {
    /// Raw cycle without log values.
    pub fn new(start: f64, end: f64, samples: Vec<PressureSample>) -> Self {
        PressureCycle {
            start,
            end,
            samples,
            log_values: Vec::new(),
        }
    }

    /// Rebuilds a cycle from stored `(timestamp, log10 pressure)` pairs.
    pub fn from_log_pairs(start: f64, end: f64, pairs: &[[f64; 2]]) -> Self {
        let samples = pairs
            .iter()
            .map(|&[t, lv]| PressureSample {
                timestamp: t,
                pressure: 10f64.powf(lv),
            })
            .collect();
        PressureCycle {
            start,
            end,
            samples,
            log_values: pairs.iter().map(|p| p[1]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn log_pairs(&self) -> Vec<[f64; 2]> {
        self.samples
            .iter()
            .zip(&self.log_values)
            .map(|(s, &lv)| [s.timestamp, lv])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CycleError {
    #[error("{stream} timestamps not strictly increasing at index {index}")]
    NonMonotoneTimestamps { stream: &'static str, index: usize },
    #[error("non-positive pressure {value} at index {index}")]
    NonPositivePressure { index: usize, value: f64 },
    #[error("telemetry I/O: {0}")]
    Io(String),
    #[error("malformed telemetry row {row}: {reason}")]
    Malformed { row: usize, reason: String },
}

/// Populates `log_values` from the sample pressures. Idempotent.
pub fn log_transform(cycle: &PressureCycle) -> Result<PressureCycle, CycleError> {
    let mut log_values = Vec::with_capacity(cycle.samples.len());
    for (index, s) in cycle.samples.iter().enumerate() {
        if !(s.pressure > 0.0) {
            return Err(CycleError::NonPositivePressure {
                index,
                value: s.pressure,
            });
        }
        log_values.push(s.pressure.log10());
    }
    Ok(PressureCycle {
        log_values,
        ..cycle.clone()
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SegmentParams {
    pub min_cycle_samples: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            min_cycle_samples: DEFAULT_MIN_CYCLE_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Segmentation {
    pub cycles: Vec<PressureCycle>,
    /// Close/open pairs not fully covered by the sample stream.
    pub discarded_partial: usize,
    /// Covered cycles below `min_cycle_samples`.
    pub discarded_short: usize,
}

fn check_monotone<T>(
    items: &[T],
    stream: &'static str,
    ts: impl Fn(&T) -> f64,
) -> Result<(), CycleError> {
    for i in 1..items.len() {
        if !(ts(&items[i]) > ts(&items[i - 1])) {
            return Err(CycleError::NonMonotoneTimestamps { stream, index: i });
        }
    }
    Ok(())
}

/// Splits a station's sample stream into cycles using its valve events.
///
/// One cycle per `(close, next open)` pair. A pair is kept only when the
/// sample stream covers it (first sample at or before the close, last sample
/// at or after the open); a repeated `close` restarts the pair and an `open`
/// without a pending close is ignored.
pub fn segment_cycles(
    samples: &[PressureSample],
    events: &[SlotValveEvent],
    params: SegmentParams,
) -> Result<Segmentation, CycleError> {
    check_monotone(samples, "sample", |s| s.timestamp)?;
    check_monotone(events, "event", |e| e.timestamp)?;
    let mut out = Segmentation::default();
    if events.is_empty() || samples.is_empty() {
        return Ok(out);
    }
    let first = samples[0].timestamp;
    let last = samples[samples.len() - 1].timestamp;

    let mut pending_close: Option<f64> = None;
    for ev in events {
        match ev.kind {
            ValveKind::Close => {
                if pending_close.is_some() {
                    out.discarded_partial += 1;
                }
                pending_close = Some(ev.timestamp);
            }
            ValveKind::Open => {
                let Some(close) = pending_close.take() else {
                    continue;
                };
                let open = ev.timestamp;
                if first > close || last < open {
                    out.discarded_partial += 1;
                    continue;
                }
                let lo = samples.partition_point(|s| s.timestamp < close);
                let hi = samples.partition_point(|s| s.timestamp < open);
                if hi - lo < params.min_cycle_samples {
                    out.discarded_short += 1;
                    continue;
                }
                let raw = PressureCycle::new(close, open, samples[lo..hi].to_vec());
                out.cycles.push(log_transform(&raw)?);
            }
        }
    }
    if pending_close.is_some() {
        out.discarded_partial += 1;
    }
    Ok(out)
}

/// Restricts both streams to `[start, end)` and segments what remains, so
/// cycles straddling either edge are discarded as partial.
pub fn segment_window(
    samples: &[PressureSample],
    events: &[SlotValveEvent],
    start: f64,
    end: f64,
    params: SegmentParams,
) -> Result<Segmentation, CycleError> {
    let s_lo = samples.partition_point(|s| s.timestamp < start);
    let s_hi = samples.partition_point(|s| s.timestamp < end);
    let e_lo = events.partition_point(|e| e.timestamp < start);
    let e_hi = events.partition_point(|e| e.timestamp < end);
    segment_cycles(&samples[s_lo..s_hi], &events[e_lo..e_hi], params)
}

// --- CSV files ------------------------------------------------------------

#[derive(Deserialize)]
struct SampleRow {
    timestamp: f64,
    pressure: f64,
}

#[derive(Deserialize)]
struct EventRow {
    timestamp: f64,
    kind: ValveKind,
}

fn open(path: &Path) -> Result<BufReader<File>, CycleError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CycleError::Io(format!("{}: {e}", path.display())))
}

fn csv_err(row: usize, e: csv::Error) -> CycleError {
    CycleError::Malformed {
        row,
        reason: e.to_string(),
    }
}

/// Reads a `timestamp,pressure` file.
pub fn read_samples<R: Read>(reader: R) -> Result<Vec<PressureSample>, CycleError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<SampleRow>().enumerate() {
        let r = row.map_err(|e| csv_err(i + 1, e))?;
        out.push(PressureSample {
            timestamp: r.timestamp,
            pressure: r.pressure,
        });
    }
    Ok(out)
}

/// Reads a `timestamp,kind` file.
pub fn read_events<R: Read>(reader: R) -> Result<Vec<SlotValveEvent>, CycleError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<EventRow>().enumerate() {
        let r = row.map_err(|e| csv_err(i + 1, e))?;
        out.push(SlotValveEvent {
            timestamp: r.timestamp,
            kind: r.kind,
        });
    }
    Ok(out)
}

pub fn read_samples_file(path: &Path) -> Result<Vec<PressureSample>, CycleError> {
    read_samples(open(path)?)
}

pub fn read_events_file(path: &Path) -> Result<Vec<SlotValveEvent>, CycleError> {
    read_events(open(path)?)
}

pub fn write_samples<W: std::io::Write>(w: W, samples: &[PressureSample]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "timestamp,pressure")?;
    for s in samples {
        writeln!(w, "{},{:e}", s.timestamp, s.pressure)?;
    }
    w.flush()
}

pub fn write_events<W: std::io::Write>(w: W, events: &[SlotValveEvent]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "timestamp,kind")?;
    for e in events {
        let kind = match e.kind {
            ValveKind::Close => "close",
            ValveKind::Open => "open",
        };
        writeln!(w, "{},{kind}", e.timestamp)?;
    }
    w.flush()
}
