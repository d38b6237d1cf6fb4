//! Synthetic station telemetry with injected faults and hourly ground truth.
//!
//! Process cycles sit at the base pressure, step up to the process peak at
//! 30% of the cycle, hold, and pump back down over the last 30% (linear in
//! log10). Non-process cycles pump down exponentially from ten times the
//! base pressure. Noise is multiplicative log-normal. A leak raises the
//! floor in log10 with the peak held fixed; a drift shifts every log value;
//! spikes multiply one sample of a cycle.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cycle_model::{
    write_events, write_samples, PressureCycle, PressureSample, SlotValveEvent, StationMeta, StationType, ValveKind,
    DEFAULT_MIN_CYCLE_SAMPLES,
};
use crate::time::{Timestamp, SECONDS_PER_HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StationProfile {
    pub station_type: StationType,
    pub base_pressure: f64,
    pub process_peak: f64,
    pub cycle_duration: f64,
    pub sample_rate: f64,
    pub lognormal_noise_sigma: f64,
    pub gap: f64,
}

impl Default for StationProfile {
    fn default() -> Self {
        StationProfile {
            station_type: StationType::Process,
            base_pressure: 1e-7,
            process_peak: 1e-3,
            cycle_duration: 20.0,
            sample_rate: 10.0,
            lognormal_noise_sigma: 0.02,
            gap: 2.0,
        }
    }
}

impl StationProfile {
    pub fn of_type(station_type: StationType) -> Self {
        StationProfile { station_type, ..Self::default() }
    }

    pub fn samples_per_cycle(&self) -> usize {
        (self.cycle_duration * self.sample_rate).round() as usize
    }

    pub fn period(&self) -> f64 {
        self.cycle_duration + self.gap
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScenario(m.to_string()));
        if !(self.base_pressure > 0.0) {
            return bad("base_pressure must be positive");
        }
        if self.station_type == StationType::Process && !(self.base_pressure < self.process_peak) {
            return bad("base_pressure must be below process_peak");
        }
        if self.samples_per_cycle() < DEFAULT_MIN_CYCLE_SAMPLES {
            return bad("cycle_duration * sample_rate below the minimum cycle length");
        }
        if !(self.lognormal_noise_sigma >= 0.0) || !(self.gap >= 0.0) {
            return bad("noise sigma and gap must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    None,
    Leak,
    Drift,
    SpikeOutliers,
}

impl FaultKind {
    pub fn label(self) -> &'static str {
        match self {
            FaultKind::None => "none",
            FaultKind::Leak => "leak",
            FaultKind::Drift => "drift",
            FaultKind::SpikeOutliers => "spike_outliers",
        }
    }
}

/// `magnitude` is the log10 floor rise (leak), the log10 offset (drift), or
/// the per-cycle probability (spikes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    #[serde(default)]
    pub onset: Option<Timestamp>,
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
}

fn default_multiplier() -> f64 {
    100.0
}

impl FaultSpec {
    pub fn none() -> Self {
        FaultSpec { kind: FaultKind::None, onset: None, magnitude: 0.0, multiplier: default_multiplier() }
    }

    pub fn leak(onset: Timestamp, delta_log: f64) -> Self {
        FaultSpec { kind: FaultKind::Leak, onset: Some(onset), magnitude: delta_log, multiplier: default_multiplier() }
    }

    pub fn drift(onset: Timestamp, offset_log: f64) -> Self {
        FaultSpec { kind: FaultKind::Drift, onset: Some(onset), magnitude: offset_log, multiplier: default_multiplier() }
    }

    pub fn spikes(onset: Timestamp, probability: f64) -> Self {
        FaultSpec { kind: FaultKind::SpikeOutliers, onset: Some(onset), magnitude: probability, multiplier: default_multiplier() }
    }

    pub fn active_at(&self, t: f64) -> bool {
        self.kind != FaultKind::None && self.onset.is_some_and(|o| t >= o.0)
    }

    /// Fault contribution for a cycle starting at `t`.
    pub fn state_at(&self, t: f64) -> FaultState {
        let mut s = FaultState::default();
        if !self.active_at(t) {
            return s;
        }
        match self.kind {
            FaultKind::Leak => s.floor_rise = self.magnitude,
            FaultKind::Drift => s.offset = self.magnitude,
            FaultKind::SpikeOutliers => {
                s.spike_probability = self.magnitude;
                s.spike_multiplier = self.multiplier;
            }
            FaultKind::None => {}
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultState {
    pub floor_rise: f64,
    pub offset: f64,
    pub spike_probability: f64,
    pub spike_multiplier: f64,
}

impl Default for FaultState {
    fn default() -> Self {
        FaultState { floor_rise: 0.0, offset: 0.0, spike_probability: 0.0, spike_multiplier: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStation {
    pub meta: StationMeta,
    #[serde(default)]
    pub profile: StationProfile,
    #[serde(default = "FaultSpec::none")]
    pub fault: FaultSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub start: Timestamp,
    pub horizon_hours: f64,
    pub seed: u64,
    /// End of the maintenance preceding the scenario; defaults to `start`.
    #[serde(default)]
    pub maintenance_end: Option<Timestamp>,
    pub stations: Vec<ScenarioStation>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario file {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Scenario {
    pub fn new(start: Timestamp, horizon_hours: f64, seed: u64) -> Self {
        Scenario { start, horizon_hours, seed, maintenance_end: None, stations: Vec::new() }
    }

    pub fn push(&mut self, meta: StationMeta, profile: StationProfile, fault: FaultSpec) {
        self.stations.push(ScenarioStation { meta, profile, fault });
    }

    pub fn end(&self) -> Timestamp {
        self.start.plus_hours(self.horizon_hours)
    }

    pub fn maintenance_end(&self) -> Timestamp {
        self.maintenance_end.unwrap_or(self.start)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon_hours >= 2.0) {
            return Err(SimError::InvalidScenario("horizon must be at least 2 hours".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for st in &self.stations {
            st.profile.validate()?;
            if st.profile.station_type != st.meta.station_type {
                return Err(SimError::InvalidScenario(format!("{}: profile type differs from meta", st.meta.key())));
            }
            if !seen.insert(st.meta.key()) {
                return Err(SimError::InvalidScenario(format!("duplicate station {}", st.meta.key())));
            }
            if st.fault.kind != FaultKind::None {
                let Some(onset) = st.fault.onset else {
                    return Err(SimError::InvalidScenario(format!("{}: fault without onset", st.meta.key())));
                };
                if onset.0 < self.start.0 || onset.0 >= self.end().0 {
                    return Err(SimError::InvalidScenario(format!("{}: onset outside horizon", st.meta.key())));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = fs::read_to_string(path).map_err(|source| SimError::Io { path: path.to_path_buf(), source })?;
        let sc: Scenario =
            serde_json::from_str(&text).map_err(|source| SimError::Parse { path: path.to_path_buf(), source })?;
        sc.validate()?;
        Ok(sc)
    }
}

/// Noise-free log10 shape of sample `i` of `n`.
fn clean_log(profile: &StationProfile, floor_rise: f64, i: usize, n: usize) -> f64 {
    let floor = profile.base_pressure.log10() + floor_rise;
    let u = i as f64 / n as f64;
    match profile.station_type {
        StationType::Process => {
            let peak = profile.process_peak.log10();
            if u < 0.3 {
                floor
            } else if u < 0.7 {
                peak
            } else {
                peak + (floor - peak) * (u - 0.7) / 0.3
            }
        }
        StationType::NonProcess => {
            let t = u * profile.cycle_duration;
            let tau = profile.cycle_duration / 8.0;
            (10f64.powf(floor) + 9.0 * profile.base_pressure * (-t / tau).exp()).log10()
        }
    }
}

/// One cycle starting at `start`; its samples lie in `[start, start + duration)`.
pub fn generate_cycle(profile: &StationProfile, fault: &FaultState, start: f64, rng: &mut ChaCha8Rng) -> PressureCycle {
    let n = profile.samples_per_cycle();
    let noise = (profile.lognormal_noise_sigma > 0.0).then(|| Normal::new(0.0, profile.lognormal_noise_sigma).unwrap());
    let mut logs: Vec<f64> = (0..n)
        .map(|i| {
            let eps = noise.as_ref().map_or(0.0, |d| d.sample(rng));
            clean_log(profile, fault.floor_rise, i, n) + eps + fault.offset
        })
        .collect();
    if fault.spike_probability > 0.0 && rng.random::<f64>() < fault.spike_probability {
        let at = rng.random_range(0..n);
        logs[at] += fault.spike_multiplier.log10();
    }
    let samples = logs
        .iter()
        .enumerate()
        .map(|(i, &l)| PressureSample { timestamp: start + i as f64 / profile.sample_rate, pressure: 10f64.powf(l) })
        .collect();
    PressureCycle { start, end: start + profile.cycle_duration, samples, log_values: logs }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub machine: String,
    pub station: String,
    /// 1-based; hour `k` covers `[start + (k-1) h, start + k h)`.
    pub hour_index: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationStream {
    pub samples: Vec<PressureSample>,
    pub events: Vec<SlotValveEvent>,
    pub truth: Vec<TruthRow>,
}

/// Per-station generator: seeded from the scenario seed, one ChaCha stream
/// per station index.
pub fn station_rng(seed: u64, station_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(station_index as u64);
    rng
}

/// Back-to-back cycles over the whole horizon. Gap samples continue at the
/// sample rate at the (faulted) floor; valve events bracket every cycle.
pub fn generate_station_stream(scenario: &Scenario, station_index: usize) -> StationStream {
    let st = &scenario.stations[station_index];
    let p = &st.profile;
    let mut rng = station_rng(scenario.seed, station_index);
    let t0 = scenario.start.0;
    let t_end = scenario.end().0;
    let mut samples = Vec::new();
    let mut events = Vec::new();
    let gap_noise = (p.lognormal_noise_sigma > 0.0).then(|| Normal::new(0.0, p.lognormal_noise_sigma).unwrap());
    let dt = 1.0 / p.sample_rate;

    let mut k = 0usize;
    loop {
        let start = t0 + k as f64 * p.period();
        if start + p.period() > t_end {
            break;
        }
        let state = st.fault.state_at(start);
        let cycle = generate_cycle(p, &state, start, &mut rng);
        events.push(SlotValveEvent { timestamp: start, kind: ValveKind::Close });
        events.push(SlotValveEvent { timestamp: cycle.end, kind: ValveKind::Open });
        samples.extend(cycle.samples);
        let floor = p.base_pressure.log10() + state.floor_rise + state.offset;
        let gap_n = (p.gap * p.sample_rate).round() as usize;
        for g in 0..gap_n {
            let eps = gap_noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            samples.push(PressureSample { timestamp: cycle.end + g as f64 * dt, pressure: 10f64.powf(floor + eps) });
        }
        k += 1;
    }

    let hours = scenario.horizon_hours.ceil() as usize;
    let truth = (1..=hours)
        .map(|h| {
            let hour_end = t0 + h as f64 * SECONDS_PER_HOUR;
            let active = st.fault.kind != FaultKind::None && st.fault.onset.is_some_and(|o| o.0 < hour_end);
            TruthRow {
                machine: st.meta.machine_id.clone(),
                station: st.meta.station_id.clone(),
                hour_index: h,
                label: if active { st.fault.kind.label() } else { FaultKind::None.label() }.to_string(),
            }
        })
        .collect();
    StationStream { samples, events, truth }
}

pub fn telemetry_paths(root: &Path, meta: &StationMeta) -> (PathBuf, PathBuf) {
    let dir = root.join("telemetry").join(&meta.machine_id);
    (
        dir.join(format!("{}.pressure.csv", meta.station_id)),
        dir.join(format!("{}.valves.csv", meta.station_id)),
    )
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io { path: path.to_path_buf(), source }
}

/// Writes every station's telemetry plus `truth.csv` under `out`. Returns the
/// written station count.
pub fn write_scenario(scenario: &Scenario, out: &Path) -> Result<usize, SimError> {
    scenario.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let truth_path = out.join("truth.csv");
    let mut truth = csv::Writer::from_path(&truth_path)
        .map_err(|e| SimError::Io { path: truth_path.clone(), source: e.into() })?;
    for (i, st) in scenario.stations.iter().enumerate() {
        let stream = generate_station_stream(scenario, i);
        let (sp, vp) = telemetry_paths(out, &st.meta);
        fs::create_dir_all(sp.parent().unwrap()).map_err(io_err(&sp))?;
        write_samples(BufWriter::new(File::create(&sp).map_err(io_err(&sp))?), &stream.samples).map_err(io_err(&sp))?;
        write_events(BufWriter::new(File::create(&vp).map_err(io_err(&vp))?), &stream.events).map_err(io_err(&vp))?;
        for row in &stream.truth {
            truth.serialize(row).map_err(|e| SimError::Io { path: truth_path.clone(), source: e.into() })?;
        }
    }
    truth.flush().map_err(io_err(&truth_path))?;
    Ok(scenario.stations.len())
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRow>, SimError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| SimError::Io { path: path.to_path_buf(), source: e.into() })?;
    rdr.deserialize()
        .collect::<Result<Vec<TruthRow>, _>>()
        .map_err(|e| SimError::Io { path: path.to_path_buf(), source: e.into() })
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<(), SimError> {
    let mut f = BufWriter::new(File::create(path).map_err(io_err(path))?);
    serde_json::to_writer_pretty(&mut f, scenario).map_err(|source| SimError::Parse { path: path.to_path_buf(), source })?;
    f.write_all(b"\n").map_err(io_err(path))
}
