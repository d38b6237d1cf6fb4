//! Bounded worker pool with per-station lanes.

use std::collections::{HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{mpsc, Mutex};
use std::thread;

use super::jobs::JobRecord;
use super::schedule::Job;

pub const MIN_POOL: usize = 8;
pub const MAX_POOL: usize = 32;
pub const DEFAULT_POOL: usize = 8;

pub fn validate_pool_size(pool_size: usize, allow_small: bool) -> Result<(), String> {
    if pool_size == 0 || pool_size > MAX_POOL || (pool_size < MIN_POOL && !allow_small) {
        return Err(format!(
            "pool size {pool_size} outside [{MIN_POOL}, {MAX_POOL}] (smaller pools need --allow-small-pool)"
        ));
    }
    Ok(())
}

/// Groups jobs into per-station lanes, keeping submission order inside each.
fn lanes(jobs: Vec<Job>) -> VecDeque<Vec<Job>> {
    let mut index: HashMap<_, usize> = HashMap::new();
    let mut out: Vec<Vec<Job>> = Vec::new();
    for job in jobs {
        let i = *index.entry(job.station.key()).or_insert_with(|| {
            out.push(Vec::new());
            out.len() - 1
        });
        out[i].push(job);
    }
    out.into()
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs `jobs` on at most `pool_size` threads. A station's jobs run one
/// after another on a single worker. `on_result` sees every record on the
/// calling thread in completion order; a failing or panicking job becomes an
/// error record and never stops the batch.
pub fn run_jobs<F, R>(jobs: Vec<Job>, pool_size: usize, exec: F, mut on_result: R) -> Vec<JobRecord>
where
    F: Fn(&Job) -> JobRecord + Sync,
    R: FnMut(&JobRecord),
{
    let queue = Mutex::new(lanes(jobs));
    let workers = pool_size.max(1).min(queue.lock().unwrap().len());
    let (tx, rx) = mpsc::channel::<JobRecord>();
    let mut out = Vec::new();
    thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (queue, exec) = (&queue, &exec);
            s.spawn(move || loop {
                let Some(lane) = queue.lock().unwrap_or_else(|p| p.into_inner()).pop_front() else {
                    break;
                };
                for job in &lane {
                    let rec = catch_unwind(AssertUnwindSafe(|| exec(job)))
                        .unwrap_or_else(|p| JobRecord::failed(job, format!("panic: {}", panic_message(p.as_ref()))));
                    if tx.send(rec).is_err() {
                        return;
                    }
                }
            });
        }
        drop(tx);
        for rec in rx {
            on_result(&rec);
            out.push(rec);
        }
    });
    out
}
