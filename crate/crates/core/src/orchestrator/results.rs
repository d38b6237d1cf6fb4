//! Append-only JSONL results log and the leak-alert summary built from it.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::jobs::{JobRecord, JobStatus};
use crate::time::{Timestamp, SECONDS_PER_DAY};

/// Each record goes out as one `write_all` of a complete line on an
/// `O_APPEND` handle, serialized by a mutex.
#[derive(Debug)]
pub struct ResultsLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl ResultsLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ResultsLog { path: path.to_path_buf(), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &JobRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogContents {
    pub records: Vec<JobRecord>,
    /// Lines that failed to parse (a torn tail would show up here).
    pub bad_lines: Vec<usize>,
}

/// Missing file reads as empty.
pub fn read_log(path: &Path) -> std::io::Result<LogContents> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(LogContents::default()),
        Err(e) => return Err(e),
    };
    let mut out = LogContents::default();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => out.records.push(r),
            Err(_) => out.bad_lines.push(i + 1),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub machine: String,
    pub station: String,
    pub leak_alerts: usize,
}

/// Leak alerts per station whose window ended in `(now - days, now]`, most
/// alerts first, then by machine and station. A window analyzed more than
/// once counts once.
pub fn summarize(records: &[JobRecord], now: Timestamp, days: f64) -> Vec<SummaryRow> {
    let from = now.0 - days * SECONDS_PER_DAY;
    let mut seen = std::collections::HashSet::new();
    let mut counts: std::collections::BTreeMap<(String, String), usize> = Default::default();
    for r in records {
        let end = r.window.end.0;
        if r.status == JobStatus::Ok && r.alert && end > from && end <= now.0 {
            if !seen.insert((r.machine.as_str(), r.station.as_str(), end.to_bits())) {
                continue;
            }
            *counts.entry((r.machine.clone(), r.station.clone())).or_default() += 1;
        }
    }
    let mut rows: Vec<SummaryRow> = counts
        .into_iter()
        .map(|((machine, station), leak_alerts)| SummaryRow { machine, station, leak_alerts })
        .collect();
    rows.sort_by(|a, b| b.leak_alerts.cmp(&a.leak_alerts).then_with(|| (&a.machine, &a.station).cmp(&(&b.machine, &b.station))));
    rows
}

/// Latest window end in the log, the default "now" for summaries.
pub fn latest_window_end(records: &[JobRecord]) -> Option<Timestamp> {
    records.iter().map(|r| r.window.end).max_by(|a, b| a.0.total_cmp(&b.0))
}

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let headers = ["machine", "station", "leak alerts"];
    let cells: Vec<[String; 3]> = rows
        .iter()
        .map(|r| [r.machine.clone(), r.station.clone(), r.leak_alerts.to_string()])
        .collect();
    let mut widths = headers.map(str::len);
    for c in &cells {
        for (w, s) in widths.iter_mut().zip(c) {
            *w = (*w).max(s.len());
        }
    }
    let mut out = format!("{:<w0$}  {:<w1$}  {:>w2$}\n", headers[0], headers[1], headers[2], w0 = widths[0], w1 = widths[1], w2 = widths[2]);
    for c in &cells {
        out.push_str(&format!("{:<w0$}  {:<w1$}  {:>w2$}\n", c[0], c[1], c[2], w0 = widths[0], w1 = widths[1], w2 = widths[2]));
    }
    out
}
