//! Executing one job and the record it leaves in the results log.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::schedule::{Job, JobKind};
use super::telemetry::TelemetrySource;
use crate::baseline::{build_baseline, BaselineStore};
use crate::cycle_model::{segment_window, PressureCycle, SegmentParams, StationKey, StationMeta};
use crate::detector::{analyze_station, render_alert, write_alert, Category, DetectorConfig, DetectorError, Verdict};
use crate::time::{Window, SECONDS_PER_HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Ok,
    Error,
}

/// One results-log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub machine: String,
    pub station: String,
    pub window: Window,
    pub job: JobKind,
    pub status: JobStatus,
    pub category: Option<Category>,
    pub probability: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub alert: bool,
    pub retained_cycles: Option<usize>,
    pub outliers: Option<usize>,
    pub error: Option<String>,
}

impl JobRecord {
    pub fn new(job: &Job, status: JobStatus) -> Self {
        JobRecord {
            machine: job.station.machine_id.clone(),
            station: job.station.station_id.clone(),
            window: job.window,
            job: job.kind,
            status,
            category: None,
            probability: None,
            p1: None,
            p2: None,
            alert: false,
            retained_cycles: None,
            outliers: None,
            error: None,
        }
    }

    pub fn failed(job: &Job, error: impl ToString) -> Self {
        JobRecord { error: Some(error.to_string()), ..JobRecord::new(job, JobStatus::Error) }
    }

    pub fn key(&self) -> StationKey {
        StationKey { machine_id: self.machine.clone(), station_id: self.station.clone() }
    }

    /// Whether this record is the outcome of `job`.
    pub fn matches(&self, job: &Job) -> bool {
        self.machine == job.station.machine_id
            && self.station == job.station.station_id
            && self.window == job.window
            && self.job == job.kind
    }
}

pub struct Executor<'a> {
    pub telemetry: &'a dyn TelemetrySource,
    pub store: BaselineStore,
    pub config: DetectorConfig,
    /// Alert files are written here when set.
    pub alerts_dir: Option<PathBuf>,
}

impl Executor<'_> {
    pub fn cycles(&self, station: &StationMeta, window: Window) -> Result<Vec<PressureCycle>, String> {
        let (samples, events) = self
            .telemetry
            .window(station, window.start.0, window.end.0)
            .map_err(|e| e.to_string())?;
        let params = SegmentParams { min_cycle_samples: self.config.baseline.min_cycle_samples };
        let seg = segment_window(&samples, &events, window.start.0, window.end.0, params).map_err(|e| e.to_string())?;
        Ok(seg.cycles)
    }

    pub fn execute(&self, job: &Job) -> JobRecord {
        match job.kind {
            JobKind::InvalidateBaseline => match self.store.delete(&job.station.key()) {
                Ok(_) => JobRecord::new(job, JobStatus::Ok),
                Err(e) => JobRecord::failed(job, e),
            },
            JobKind::BuildBaseline => self.build(job),
            JobKind::Analyze => self.analyze(job),
        }
    }

    fn build(&self, job: &Job) -> JobRecord {
        let cycles = match self.cycles(&job.station, job.window) {
            Ok(c) => c,
            Err(e) => return JobRecord::failed(job, e),
        };
        let b = match build_baseline(&cycles, &job.station, job.trigger, job.window.end, &self.config.baseline) {
            Ok(b) => b,
            Err(e) => return JobRecord::failed(job, e),
        };
        if let Err(e) = self.store.save(&b) {
            return JobRecord::failed(job, e);
        }
        JobRecord {
            retained_cycles: Some(b.retained_cycles.len()),
            outliers: Some(b.outlier_count),
            ..JobRecord::new(job, JobStatus::Ok)
        }
    }

    /// Verdict for an analysis job, without touching the log.
    pub fn verdict(&self, job: &Job) -> Result<Verdict, String> {
        let baseline = self
            .store
            .load(&job.station.key())
            .map_err(|e| e.to_string())?
            .ok_or_else(|| DetectorError::NoBaseline(job.station.key().to_string()).to_string())?;
        let cycles = self.cycles(&job.station, job.window)?;
        let mut v = analyze_station(&baseline, &cycles, job.window, &self.config).map_err(|e| e.to_string())?;
        // the meta in the machines file is authoritative for reporting
        v.station = job.station.clone();
        Ok(v)
    }

    fn analyze(&self, job: &Job) -> JobRecord {
        let v = match self.verdict(job) {
            Ok(v) => v,
            Err(e) => return JobRecord::failed(job, e),
        };
        let report = render_alert(&v, &job.station, self.config.alert_threshold);
        let mut rec = JobRecord {
            category: Some(v.category),
            probability: Some(v.probability),
            p1: v.p1,
            p2: v.p2,
            alert: report.is_some(),
            retained_cycles: Some(v.diagnostics.test_cycles),
            outliers: Some(v.diagnostics.test_outliers_removed),
            ..JobRecord::new(job, JobStatus::Ok)
        };
        if let (Some(report), Some(dir)) = (report, &self.alerts_dir) {
            let from = v.baseline_date.0 - SECONDS_PER_HOUR;
            let timeline = self
                .telemetry
                .window(&job.station, from, job.window.end.0)
                .map(|(s, _)| s)
                .unwrap_or_default();
            let companions = v.companions.clone().unwrap_or_default();
            if let Err(e) = write_alert(dir, &report, &companions, &timeline) {
                rec.error = Some(format!("alert files: {e}"));
            }
        }
        rec
    }
}
