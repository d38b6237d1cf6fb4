//! Hourly test-window analysis: scrub, score floor features, then shape
//! features, and classify as leak, drift or sensor issue.
//!
//! ```text
//! P1 = leak_probability(FS1)
//! P1 >= tau1                 -> P2 = leak_probability(FS2)
//!                               P2 >= tau1 ? leak(P2) : drift(P1)
//! P1 <  tau1, process        -> sensor_issue(P1)
//! P1 <  tau1, non-process    -> P2 = leak_probability(FS2)
//!                               P2 >= tau1 ? leak(P2) : sensor_issue(max(P1, P2))
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::{atomic_write, cycle_features, outlier_scan, Baseline, BaselineError, BaselineParams};
use crate::cycle_model::{PressureCycle, PressureSample, StationMeta, StationType};
use crate::distances::{medoid_ranking, pairwise_distance_matrix, DistanceMatrix};
use crate::divergence::{leak_probability, DivergenceError, DivergenceReport};
use crate::features::median;
use crate::time::{Timestamp, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub baseline: BaselineParams,
    pub tau1: f64,
    pub alert_threshold: f64,
    pub min_test_span_secs: f64,
    pub representative_cycles: usize,
    /// Baseline cycles sampled (evenly) when picking baseline medoids.
    pub medoid_pool: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            baseline: BaselineParams::default(),
            tau1: 0.5,
            alert_threshold: 0.85,
            min_test_span_secs: 45.0 * 60.0,
            representative_cycles: 5,
            medoid_pool: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Leak,
    Drift,
    SensorIssue,
}

impl Category {
    pub fn label(self) -> &'static str {
        match self {
            Category::Leak => "leak",
            Category::Drift => "drift",
            Category::SensorIssue => "sensor_issue",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub fs1: DivergenceReport,
    pub fs2: Option<DivergenceReport>,
    pub test_cycles: usize,
    pub test_outliers_removed: usize,
    /// False when more than the instability cap would have been removed.
    pub scrubbed: bool,
}

/// Representative cycles for alert plots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Companions {
    pub baseline: Vec<PressureCycle>,
    pub test: Vec<PressureCycle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub station: StationMeta,
    pub window: Window,
    pub category: Category,
    pub probability: f64,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    /// Torr: median test floor minus median baseline floor.
    pub pressure_diff: f64,
    pub baseline_date: Timestamp,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub companions: Option<Companions>,
}

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("no baseline for {0}")]
    NoBaseline(String),
    #[error("{got} test cycles, need at least {need}")]
    InsufficientCycles { got: usize, need: usize },
    #[error("test cycles span {got:.0} s, need at least {need:.0} s")]
    InsufficientSpan { got: f64, need: f64 },
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

/// Whether the flowchart needs the FS2 probability for this `P1`.
pub fn needs_p2(p1: f64, station_type: StationType, tau1: f64) -> bool {
    p1 >= tau1 || station_type == StationType::NonProcess
}

/// Category and reported probability. `p2` must be present whenever
/// [`needs_p2`] says so.
pub fn decide(p1: f64, p2: Option<f64>, station_type: StationType, tau1: f64) -> (Category, f64) {
    if !needs_p2(p1, station_type, tau1) {
        return (Category::SensorIssue, p1);
    }
    let p2 = p2.expect("flowchart requires P2 on this branch");
    match (p1 >= tau1, p2 >= tau1) {
        (_, true) => (Category::Leak, p2),
        (true, false) => (Category::Drift, p1),
        (false, false) => (Category::SensorIssue, p1.max(p2)),
    }
}

fn evenly_spaced(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    (0..k).map(|i| i * (n - 1) / (k - 1).max(1)).collect()
}

fn medoids_from(matrix: &DistanceMatrix, members: &[usize], k: usize) -> Vec<usize> {
    let mut sub = DistanceMatrix::zeros(members.len());
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate().skip(a + 1) {
            sub.set_symmetric(a, b, matrix.get(i, j));
        }
    }
    medoid_ranking(&sub, k).into_iter().map(|a| members[a]).collect()
}

pub fn analyze_station(
    baseline: &Baseline,
    test_cycles: &[PressureCycle],
    window: Window,
    config: &DetectorConfig,
) -> Result<Verdict, DetectorError> {
    let params = &config.baseline;
    let need = params.cluster.min_pts + 2;
    if test_cycles.len() < need {
        return Err(DetectorError::InsufficientCycles { got: test_cycles.len(), need });
    }
    let first = test_cycles.iter().map(|c| c.start).fold(f64::INFINITY, f64::min);
    let last = test_cycles.iter().map(|c| c.end).fold(f64::NEG_INFINITY, f64::max);
    if last - first < config.min_test_span_secs {
        return Err(DetectorError::InsufficientSpan { got: last - first, need: config.min_test_span_secs });
    }

    let (report, matrix) = outlier_scan(test_cycles, params)?;
    let scrubbed = report.removed_fraction() <= params.max_outlier_fraction;
    let kept: Vec<usize> = if scrubbed { report.kept.clone() } else { (0..test_cycles.len()).collect() };
    let cycles: Vec<PressureCycle> = kept.iter().map(|&i| test_cycles[i].clone()).collect();
    let meta = &baseline.station;
    let (fs1, fs2) = cycle_features(&cycles, meta, params.min_cycle_samples).map_err(BaselineError::from)?;

    let r1 = leak_probability(&baseline.fs1, &fs1, &params.cluster)?;
    let p1 = r1.probability;
    let r2 = if needs_p2(p1, meta.station_type, config.tau1) {
        Some(leak_probability(&baseline.fs2, &fs2, &params.cluster)?)
    } else {
        None
    };
    let p2 = r2.as_ref().map(|r| r.probability);
    let (category, probability) = decide(p1, p2, meta.station_type, config.tau1);

    let mut test_floor: Vec<f64> = fs1.iter().map(|f| f.values[0]).collect();
    let pressure_diff = 10f64.powf(median(&mut test_floor)) - 10f64.powf(baseline.median_floor_log());

    let companions = (category == Category::Leak && probability >= config.alert_threshold).then(|| {
        let k = config.representative_cycles;
        let test = medoids_from(&matrix, &kept, k).into_iter().map(|i| test_cycles[i].clone()).collect();
        let pool: Vec<PressureCycle> = evenly_spaced(baseline.retained_cycles.len(), config.medoid_pool)
            .into_iter()
            .map(|i| baseline.retained_cycles[i].clone())
            .collect();
        let base = match pairwise_distance_matrix(&pool, &params.dtw) {
            Ok(m) => medoid_ranking(&m, k).into_iter().map(|i| pool[i].clone()).collect(),
            Err(_) => pool.into_iter().take(k).collect(),
        };
        Companions { baseline: base, test }
    });

    Ok(Verdict {
        station: meta.clone(),
        window,
        category,
        probability,
        p1: Some(p1),
        p2,
        pressure_diff,
        baseline_date: baseline.built_at,
        diagnostics: Diagnostics {
            fs1: r1,
            fs2: r2,
            test_cycles: cycles.len(),
            test_outliers_removed: if scrubbed { report.removed.len() } else { 0 },
            scrubbed,
        },
        companions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertReport {
    pub subject: String,
    pub machine: String,
    pub station: String,
    pub pressure_diff: String,
    pub baseline_date: String,
    pub probability: String,
    pub function: String,
    pub station_type: String,
    pub window: Window,
}

pub const ALERT_COLUMNS: [&str; 7] =
    ["machine", "station", "pressure diff", "baseline date", "probability", "function", "station type"];

/// A report only for leak verdicts at or above `alert_threshold`.
pub fn render_alert(verdict: &Verdict, meta: &StationMeta, alert_threshold: f64) -> Option<AlertReport> {
    if verdict.category != Category::Leak || verdict.probability < alert_threshold {
        return None;
    }
    Some(AlertReport {
        subject: format!(
            "Potential slot valve leak identified at {} for {} {}",
            verdict.window.end.to_display(),
            meta.machine_id,
            meta.station_id
        ),
        machine: meta.machine_id.clone(),
        station: meta.station_id.clone(),
        pressure_diff: format!("{:.2E}", verdict.pressure_diff),
        baseline_date: verdict.baseline_date.to_display(),
        probability: format!("{:.4}", verdict.probability),
        function: meta.function.clone(),
        station_type: meta.station_type.label().to_string(),
        window: verdict.window,
    })
}

impl AlertReport {
    /// Subject line, blank line, tab-separated header and one numbered row.
    pub fn to_text(&self) -> String {
        let row = [
            &self.machine,
            &self.station,
            &self.pressure_diff,
            &self.baseline_date,
            &self.probability,
            &self.function,
            &self.station_type,
        ];
        let row: Vec<&str> = row.iter().map(|s| s.as_str()).collect();
        format!("Subject: {}\n\n\t{}\n1\t{}\n", self.subject, ALERT_COLUMNS.join("\t"), row.join("\t"))
    }
}

/// Paths written by [`write_alert`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlertFiles {
    pub report: PathBuf,
    pub cycles: PathBuf,
    pub timeline: PathBuf,
}

/// Writes `<stem>.alert.json`, `<stem>.cycles.csv` and `<stem>.timeline.csv`
/// under `alerts_dir`, stem `<machine>_<station>_<window end>`.
pub fn write_alert(
    alerts_dir: &Path,
    report: &AlertReport,
    companions: &Companions,
    timeline: &[PressureSample],
) -> std::io::Result<AlertFiles> {
    fs::create_dir_all(alerts_dir)?;
    let stem = format!("{}_{}_{}", report.machine, report.station, report.window.end.to_file_stamp());
    let files = AlertFiles {
        report: alerts_dir.join(format!("{stem}.alert.json")),
        cycles: alerts_dir.join(format!("{stem}.cycles.csv")),
        timeline: alerts_dir.join(format!("{stem}.timeline.csv")),
    };

    let mut cyc = csv::Writer::from_writer(Vec::new());
    cyc.write_record(["role", "cycle_index", "sample_index", "timestamp", "pressure"])?;
    for (role, set) in [("baseline", &companions.baseline), ("test", &companions.test)] {
        for (ci, c) in set.iter().enumerate() {
            for (si, s) in c.samples.iter().enumerate() {
                cyc.write_record([role, &ci.to_string(), &si.to_string(), &s.timestamp.to_string(), &format!("{:e}", s.pressure)])?;
            }
        }
    }
    atomic_write(&files.cycles, &cyc.into_inner().map_err(|e| e.into_error())?)?;

    let mut tl = csv::Writer::from_writer(Vec::new());
    tl.write_record(["timestamp", "pressure"])?;
    for s in timeline {
        tl.write_record([s.timestamp.to_string(), format!("{:e}", s.pressure)])?;
    }
    atomic_write(&files.timeline, &tl.into_inner().map_err(|e| e.into_error())?)?;

    let json = serde_json::to_vec_pretty(report).map_err(std::io::Error::other)?;
    // report last: its presence means the companions are complete
    atomic_write(&files.report, &json)?;
    Ok(files)
}

/// Every `*.alert.json` under `dir`, sorted by file name.
pub fn read_alerts(dir: &Path) -> std::io::Result<Vec<AlertReport>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".alert.json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| std::io::Error::other(format!("{}: {e}", p.display())))
        })
        .collect()
}
