//! Hourly scheduling, the worker pool, and the results log.
//!
//! Everything lives under one data directory:
//!
//! ```text
//! <data>/machines.json
//! <data>/state.json
//! <data>/results.jsonl
//! <data>/telemetry/<machine>/<station>.{pressure,valves}.csv
//! <data>/baselines/<machine>/<station>.baseline.json
//! <data>/alerts/<machine>_<station>_<stamp>.{alert.json,cycles.csv,timeline.csv}
//! ```

pub mod jobs;
pub mod machines;
pub mod pool;
pub mod results;
pub mod schedule;
pub mod telemetry;

use std::path::{Path, PathBuf};

use crate::baseline::BaselineStore;
use crate::detector::DetectorConfig;
use crate::time::Timestamp;

pub use jobs::{Executor, JobRecord, JobStatus};
pub use machines::{MachineState, MachineStatus, MachinesFile, MalformedMachinesFile};
pub use pool::{run_jobs, validate_pool_size, DEFAULT_POOL};
pub use results::{read_log, summarize, ResultsLog, SummaryRow};
pub use schedule::{tick, Job, JobKind, RunState};
pub use telemetry::{FileTelemetry, MemoryTelemetry, TelemetrySource};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Machines(#[from] MalformedMachinesFile),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run state: {0}")]
    State(String),
}

impl OrchestratorError {
    /// 1 for configuration problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            OrchestratorError::Config(_) | OrchestratorError::Machines(_) => 1,
            OrchestratorError::Io { .. } | OrchestratorError::State(_) => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataLayout {
    pub root: PathBuf,
}

impl DataLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataLayout { root: root.into() }
    }
    pub fn machines(&self) -> PathBuf {
        self.root.join("machines.json")
    }
    pub fn state(&self) -> PathBuf {
        self.root.join("state.json")
    }
    pub fn results(&self) -> PathBuf {
        self.root.join("results.jsonl")
    }
    pub fn alerts(&self) -> PathBuf {
        self.root.join("alerts")
    }
    pub fn store(&self) -> BaselineStore {
        BaselineStore::new(&self.root)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub pool_size: usize,
    pub allow_small_pool: bool,
    pub detector: DetectorConfig,
    pub write_alerts: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { pool_size: DEFAULT_POOL, allow_small_pool: false, detector: DetectorConfig::default(), write_alerts: true }
    }
}

/// Tick loop over one data directory. Run state is saved before and after
/// every batch so an interrupted batch resumes without repeating logged jobs.
pub struct Orchestrator<'a> {
    pub layout: DataLayout,
    telemetry: &'a dyn TelemetrySource,
    opts: RunOptions,
    log: ResultsLog,
    state: RunState,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> OrchestratorError + '_ {
    move |source| OrchestratorError::Io { path: path.to_path_buf(), source }
}

impl<'a> Orchestrator<'a> {
    pub fn open(layout: DataLayout, telemetry: &'a dyn TelemetrySource, opts: RunOptions) -> Result<Self, OrchestratorError> {
        validate_pool_size(opts.pool_size, opts.allow_small_pool).map_err(OrchestratorError::Config)?;
        let state = RunState::load(&layout.state()).map_err(OrchestratorError::State)?.unwrap_or_default();
        let log = ResultsLog::open(&layout.results()).map_err(io(&layout.results()))?;
        let mut o = Orchestrator { layout, telemetry, opts, log, state };
        o.resume()?;
        Ok(o)
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    fn executor(&self) -> Executor<'_> {
        Executor {
            telemetry: self.telemetry,
            store: self.layout.store(),
            config: self.opts.detector,
            alerts_dir: self.opts.write_alerts.then(|| self.layout.alerts()),
        }
    }

    fn save_state(&self) -> Result<(), OrchestratorError> {
        let p = self.layout.state();
        self.state.save(&p).map_err(io(&p))
    }

    fn execute(&mut self, jobs: Vec<Job>) -> Result<Vec<JobRecord>, OrchestratorError> {
        self.state.pending = jobs.clone();
        self.save_state()?;
        let exec = self.executor();
        let log = &self.log;
        let mut write_err = None;
        let records = run_jobs(jobs, self.opts.pool_size, |j| exec.execute(j), |r| {
            if let Err(e) = log.append(r) {
                write_err.get_or_insert(e);
            }
        });
        if let Some(e) = write_err {
            return Err(io(log.path())(e));
        }
        self.state.pending.clear();
        self.save_state()?;
        Ok(records)
    }

    /// Re-runs jobs left pending by an interrupted batch that have no record
    /// in the log yet.
    fn resume(&mut self) -> Result<(), OrchestratorError> {
        if self.state.pending.is_empty() {
            return Ok(());
        }
        let logged = read_log(self.log.path()).map_err(io(self.log.path()))?.records;
        let todo: Vec<Job> = self
            .state
            .pending
            .iter()
            .filter(|j| !logged.iter().any(|r| r.matches(j)))
            .cloned()
            .collect();
        log::info!("resuming {} of {} pending jobs", todo.len(), self.state.pending.len());
        self.execute(todo)?;
        Ok(())
    }

    /// One tick at `clock` against the given machine status.
    pub fn step(&mut self, clock: Timestamp, machines: &[MachineStatus]) -> Result<Vec<JobRecord>, OrchestratorError> {
        let store = self.layout.store();
        for m in machines {
            for s in &m.stations {
                let present = store.exists(&s.key());
                self.state.station_mut(&s.key()).baseline = present;
            }
        }
        let jobs = tick(clock, machines, &mut self.state);
        log::info!("tick {}: {} jobs", clock.to_iso(), jobs.len());
        self.execute(jobs)
    }

    /// Ticks at `from + 1h`, ..., `from + hours`, re-reading the machines
    /// file before each; a malformed file aborts with the state untouched.
    pub fn run(&mut self, machines_path: &Path, from: Timestamp, hours: usize) -> Result<Vec<JobRecord>, OrchestratorError> {
        let mut all = Vec::new();
        for h in 1..=hours {
            let machines = MachinesFile::load(machines_path)?;
            all.extend(self.step(from.plus_hours(h as f64), &machines.machines)?);
        }
        Ok(all)
    }
}
