use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use leakwatch::baseline::Trigger;
use leakwatch::cycle_model::StationMeta;
use leakwatch::detector::{read_alerts, DetectorConfig};
use leakwatch::orchestrator::results::{latest_window_end, render_summary};
use leakwatch::orchestrator::{
    read_log, summarize, DataLayout, Executor, FileTelemetry, Job, JobKind, JobRecord, JobStatus, MachinesFile,
    Orchestrator, OrchestratorError, ResultsLog, RunOptions, DEFAULT_POOL,
};
use leakwatch::simulator::{save_scenario, write_scenario, Scenario, SimError};
use leakwatch::time::{Timestamp, Window};

#[derive(Parser)]
#[command(name = "leakwatch", version, about = "Vacuum-leak detection for sputter stations")]
struct Cli {
    /// More logging (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate telemetry, truth labels and a machines file from a scenario.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and store one station's baseline from a window of telemetry.
    BuildBaseline {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value = "maintenance", value_parser = parse_trigger)]
        trigger: Trigger,
    },
    /// Analyze one window against the stored baseline.
    Analyze {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 0.85)]
        threshold: f64,
    },
    /// Drive the hourly tick loop over simulated time.
    Run(RunArgs),
    /// Print the alert reports in a directory.
    Report {
        #[arg(long)]
        alerts: PathBuf,
    },
    /// Leak alerts per station over the last N days of the results log.
    Summary {
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long, default_value_t = 7.0)]
        days: f64,
        /// End of the summary window; defaults to the latest window in the log.
        #[arg(long)]
        now: Option<Timestamp>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Target {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// Defaults to `<data>/machines.json`.
    #[arg(long)]
    machines: Option<PathBuf>,
    #[arg(long)]
    machine: String,
    #[arg(long)]
    station: String,
    /// `T1..T2`, as epoch seconds or ISO 8601.
    #[arg(long)]
    window: Window,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// Defaults to `<data>/machines.json`.
    #[arg(long)]
    machines: Option<PathBuf>,
    /// Telemetry root; defaults to the data directory.
    #[arg(long)]
    telemetry: Option<PathBuf>,
    #[arg(long, requires = "hours", conflicts_with_all = ["at", "replay"])]
    from: Option<Timestamp>,
    #[arg(long)]
    hours: Option<usize>,
    /// A single tick at this clock.
    #[arg(long, conflicts_with = "replay")]
    at: Option<Timestamp>,
    /// Tick hourly across a scenario's horizon.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_POOL)]
    pool: usize,
    #[arg(long)]
    allow_small_pool: bool,
    #[arg(long)]
    no_alert_files: bool,
}

fn parse_trigger(s: &str) -> Result<Trigger, String> {
    match s {
        "maintenance" => Ok(Trigger::Maintenance),
        "design_change" | "design-change" => Ok(Trigger::DesignChange),
        _ => Err(format!("unknown trigger {s:?}")),
    }
}

enum Failure {
    Config(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) => m,
        }
    }
}

impl From<OrchestratorError> for Failure {
    fn from(e: OrchestratorError) -> Self {
        if e.exit_code() == 1 {
            Failure::Config(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn scenario_failure(e: SimError) -> Failure {
    match e {
        SimError::Io { .. } => Failure::Data(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Simulate { scenario, out } => simulate(&scenario, &out),
        Cmd::BuildBaseline { target, trigger } => single_job(&target, JobKind::BuildBaseline, trigger, 0.85),
        Cmd::Analyze { target, threshold } => single_job(&target, JobKind::Analyze, Trigger::Maintenance, threshold),
        Cmd::Run(args) => run(args),
        Cmd::Report { alerts } => report(&alerts),
        Cmd::Summary { data, days, now, json } => summary(&data, days, now, json),
    }
}

fn simulate(scenario_path: &Path, out: &Path) -> Result<(), Failure> {
    let sc = Scenario::load(scenario_path).map_err(scenario_failure)?;
    let n = write_scenario(&sc, out).map_err(scenario_failure)?;
    save_scenario(&sc, &out.join("scenario.json")).map_err(scenario_failure)?;
    let layout = DataLayout::new(out);
    MachinesFile::from_scenario(&sc, "r1")
        .save(&layout.machines())
        .map_err(|e| Failure::Data(format!("{}: {e}", layout.machines().display())))?;
    println!("wrote {n} stations to {}", out.display());
    Ok(())
}

fn station_meta(target: &Target) -> Result<StationMeta, Failure> {
    let layout = DataLayout::new(&target.data);
    let path = target.machines.clone().unwrap_or_else(|| layout.machines());
    let machines = MachinesFile::load(&path).map_err(|e| Failure::Config(e.to_string()))?;
    machines
        .find_station(&target.machine, &target.station)
        .cloned()
        .ok_or_else(|| Failure::Config(format!("{}/{} not in {}", target.machine, target.station, path.display())))
}

fn single_job(target: &Target, kind: JobKind, trigger: Trigger, threshold: f64) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Failure::Config(format!("threshold {threshold} outside [0, 1]")));
    }
    let station = station_meta(target)?;
    let layout = DataLayout::new(&target.data);
    let telemetry = FileTelemetry { root: target.data.clone() };
    let exec = Executor {
        telemetry: &telemetry,
        store: layout.store(),
        config: DetectorConfig { alert_threshold: threshold, ..DetectorConfig::default() },
        alerts_dir: Some(layout.alerts()),
    };
    let job = Job { station, window: target.window, kind, trigger };
    let rec = exec.execute(&job);
    let log = ResultsLog::open(&layout.results()).map_err(|e| Failure::Data(e.to_string()))?;
    log.append(&rec).map_err(|e| Failure::Data(e.to_string()))?;
    print_record(&rec);
    match rec.status {
        JobStatus::Ok => Ok(()),
        JobStatus::Error => Err(Failure::Data(rec.error.unwrap_or_default())),
    }
}

fn print_record(rec: &JobRecord) {
    println!("{}", serde_json::to_string(rec).expect("records serialize"));
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let layout = DataLayout::new(&args.data);
    let machines_path = args.machines.clone().unwrap_or_else(|| layout.machines());
    let telemetry = FileTelemetry { root: args.telemetry.clone().unwrap_or_else(|| args.data.clone()) };
    let opts = RunOptions {
        pool_size: args.pool,
        allow_small_pool: args.allow_small_pool,
        detector: DetectorConfig::default(),
        write_alerts: !args.no_alert_files,
    };
    let (from, hours) = match (&args.replay, args.from, args.hours, args.at) {
        (Some(p), ..) => {
            let sc = Scenario::load(p).map_err(scenario_failure)?;
            (sc.start, sc.horizon_hours.floor() as usize)
        }
        (None, Some(from), Some(hours), None) => (from, hours),
        // one tick at `at` is the one-hour run that ends there
        (None, None, _, Some(at)) => (at.plus_hours(-1.0), 1),
        _ => return Err(Failure::Config("run needs --from and --hours, --at, or --replay".into())),
    };
    let mut orch = Orchestrator::open(layout, &telemetry, opts)?;
    let records = orch.run(&machines_path, from, hours)?;
    let errors = records.iter().filter(|r| r.status == JobStatus::Error).count();
    let alerts = records.iter().filter(|r| r.alert).count();
    println!("{} jobs, {} alerts, {} errors", records.len(), alerts, errors);
    Ok(())
}

fn report(dir: &Path) -> Result<(), Failure> {
    let reports = read_alerts(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            println!();
        }
        print!("{}", r.to_text());
    }
    Ok(())
}

fn summary(data: &Path, days: f64, now: Option<Timestamp>, json: bool) -> Result<(), Failure> {
    if !(days > 0.0) {
        return Err(Failure::Config(format!("--days must be positive, got {days}")));
    }
    let path = DataLayout::new(data).results();
    let log = read_log(&path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if !log.bad_lines.is_empty() {
        log::warn!("{}: skipped unparseable lines {:?}", path.display(), log.bad_lines);
    }
    let rows = match now.or_else(|| latest_window_end(&log.records)) {
        Some(now) => summarize(&log.records, now, days),
        None => Vec::new(),
    };
    if json {
        for r in &rows {
            println!("{}", serde_json::to_string(r).expect("rows serialize"));
        }
    } else {
        print!("{}", render_summary(&rows));
    }
    Ok(())
}
