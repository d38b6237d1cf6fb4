//! Acceptance suite. Runs every criterion in order on one thread and prints
//! one PASS/FAIL line each; exits non-zero if any fails.
//!
//! `cargo test --test acceptance -- 3 7` runs only criteria 3 and 7.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use leakwatch::baseline::{build_baseline, outlier_scan, BaselineParams, Trigger};
use leakwatch::clustering::{dbscan, kneedle_knee, NOISE};
use leakwatch::cycle_model::{PressureCycle, StationMeta, StationType};
use leakwatch::detector::{analyze_station, Category, DetectorConfig};
use leakwatch::distances::{dtw_distance, DtwParams};
use leakwatch::divergence::leak_probability;
use leakwatch::features::{FeatureSet, FeatureVector};
use leakwatch::orchestrator::{
    read_log, tick, DataLayout, JobKind, JobRecord, JobStatus, MachinesFile, MemoryTelemetry, Orchestrator,
    RunOptions,
};
use leakwatch::reduction::pca_fit_transform;
use leakwatch::simulator::{
    generate_cycle, generate_station_stream, station_rng, write_scenario, FaultSpec, FaultState, Scenario,
    StationProfile,
};
use leakwatch::time::{Timestamp, Window};

const T0: f64 = 1_640_995_200.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn station_type(i: usize) -> StationType {
    if i % 2 == 0 {
        StationType::Process
    } else {
        StationType::NonProcess
    }
}

fn meta(machine: &str, i: usize) -> StationMeta {
    StationMeta::new(machine, &format!("Stn{i:03}"), station_type(i), "f")
}

fn memory_telemetry(sc: &Scenario) -> MemoryTelemetry {
    let mut tel = MemoryTelemetry::default();
    for (i, st) in sc.stations.iter().enumerate() {
        let s = generate_station_stream(sc, i);
        tel.insert(st.meta.key(), s.samples, s.events);
    }
    tel
}

/// Hourly ticks over the scenario horizon through the orchestrator.
fn replay(sc: &Scenario, data: &Path, pool: usize) -> Vec<JobRecord> {
    let tel = memory_telemetry(sc);
    let opts = RunOptions { pool_size: pool, allow_small_pool: true, write_alerts: false, ..RunOptions::default() };
    let mut orch = Orchestrator::open(DataLayout::new(data), &tel, opts).unwrap();
    let machines = MachinesFile::from_scenario(sc, "r1").machines;
    let mut out = Vec::new();
    for h in 1..=sc.horizon_hours as usize {
        out.extend(orch.step(Timestamp(sc.start.0).plus_hours(h as f64), &machines).unwrap());
    }
    out
}

fn leak_recall() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut sc = Scenario::new(Timestamp(T0), 6.0, seed);
        for i in 0..32 {
            let m = meta("M", i);
            let fault = if i < 16 {
                let onset = T0 + rng.random_range(2.0..5.0) * 3600.0;
                FaultSpec::leak(Timestamp(onset), rng.random_range(0.3..=1.5))
            } else {
                FaultSpec::none()
            };
            sc.push(m, StationProfile::of_type(station_type(i)), fault);
        }
        let dir = tempfile::tempdir().unwrap();
        let recs = replay(&sc, dir.path(), 8);
        let alerted = |lo: usize, hi: usize| {
            (lo..hi)
                .filter(|&i| {
                    let id = format!("Stn{i:03}");
                    recs.iter().any(|r| r.station == id && r.alert && r.category == Some(Category::Leak))
                })
                .count()
        };
        let errors = recs.iter().filter(|r| r.status == JobStatus::Error).count();
        let (hit, false_alarms) = (alerted(0, 16), alerted(16, 32));
        pass &= hit >= 15 && false_alarms <= 1 && errors == 0;
        lines.push(format!("seed {seed}: {hit}/16 leaks, {false_alarms} false, {errors} errors"));
    }
    outcome(pass, lines.join("; "))
}

fn drift_discrimination() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let mut sc = Scenario::new(Timestamp(T0), 4.0, seed);
        for i in 0..10 {
            let fault = FaultSpec::drift(Timestamp(T0 + 7200.0), rng.random_range(0.3..=0.8));
            sc.push(meta("D", i), StationProfile::of_type(station_type(i)), fault);
        }
        let dir = tempfile::tempdir().unwrap();
        let recs = replay(&sc, dir.path(), 8);
        let analyses: Vec<&JobRecord> = recs.iter().filter(|r| r.job == JobKind::Analyze).collect();
        let per_station = |pred: &dyn Fn(&JobRecord) -> bool| {
            (0..10)
                .filter(|i| {
                    let id = format!("Stn{i:03}");
                    let mine: Vec<_> = analyses.iter().filter(|r| r.station == id).collect();
                    !mine.is_empty() && pred_all(&mine, pred)
                })
                .count()
        };
        fn pred_all(rs: &[&&JobRecord], pred: &dyn Fn(&JobRecord) -> bool) -> bool {
            rs.iter().all(|r| pred(r))
        }
        let drift = per_station(&|r| r.category == Some(Category::Drift));
        let leak = analyses.iter().filter(|r| r.category == Some(Category::Leak)).count();
        pass &= drift >= 8 && leak == 0;
        lines.push(format!("seed {seed}: {drift}/10 drift, {leak} leak"));
    }
    outcome(pass, lines.join("; "))
}

fn outlier_scrub() -> Outcome {
    let params = BaselineParams::default();
    let (mut spikes, mut spikes_removed, mut clean, mut clean_removed) = (0, 0, 0, 0);
    let mut worst = 0.0f64;
    for corpus in 0..20u64 {
        let st = station_type(corpus as usize);
        let profile = StationProfile::of_type(st);
        let mut rng = station_rng(3000 + corpus, 0);
        let n = 160;
        let mut spiked = vec![false; n];
        while spiked.iter().filter(|&&s| s).count() < n / 20 {
            spiked[rng.random_range(0..n)] = true;
        }
        let cycles: Vec<PressureCycle> = (0..n)
            .map(|k| {
                let fault = if spiked[k] { FaultSpec::spikes(Timestamp(0.0), 1.0) } else { FaultSpec::none() };
                generate_cycle(&profile, &fault.state_at(1.0), k as f64 * profile.period(), &mut rng)
            })
            .collect();
        let (report, _) = outlier_scan(&cycles, &params).unwrap();
        let s_rm = report.removed.iter().filter(|&&i| spiked[i]).count();
        let c_rm = report.removed.len() - s_rm;
        spikes += n / 20;
        spikes_removed += s_rm;
        clean += n - n / 20;
        clean_removed += c_rm;
        worst = worst.max(c_rm as f64 / (n - n / 20) as f64);
    }
    let spike_rate = spikes_removed as f64 / spikes as f64;
    let clean_rate = clean_removed as f64 / clean as f64;
    outcome(
        spike_rate >= 0.90 && clean_rate <= 0.02,
        format!(
            "spikes removed {spikes_removed}/{spikes} ({:.1}%), clean removed {clean_removed}/{clean} ({:.2}%, worst corpus {:.2}%)",
            100.0 * spike_rate,
            100.0 * clean_rate,
            100.0 * worst
        ),
    )
}

/// Reference DBSCAN: core points from brute-force neighbourhoods, clusters as
/// connected components of the core graph, each border point attached to
/// the component with the lowest-indexed core point among its neighbours'
/// components (the first one an index-order scan discovers).
fn reference_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i64> {
    let n = points.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let near: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| dist(&points[i], &points[j]) <= eps).collect()).collect();
    let core: Vec<bool> = near.iter().map(|v| v.len() >= min_pts).collect();
    let mut comp = vec![usize::MAX; n];
    for s in 0..n {
        if !core[s] || comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = s;
        while let Some(i) = stack.pop() {
            for &j in &near[i] {
                if core[j] && comp[j] == usize::MAX {
                    comp[j] = s;
                    stack.push(j);
                }
            }
        }
    }
    (0..n)
        .map(|i| {
            if core[i] {
                comp[i] as i64
            } else {
                near[i].iter().filter(|&&j| core[j]).map(|&j| comp[j] as i64).min().unwrap_or(-1)
            }
        })
        .collect()
}

/// Same partition up to relabeling, with noise matching exactly.
fn same_partition(a: &[i32], b: &[i64]) -> bool {
    let mut fwd: HashMap<i32, i64> = HashMap::new();
    let mut back: HashMap<i64, i32> = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        if (x == NOISE) != (y == -1) {
            return false;
        }
        *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
    })
}

fn dbscan_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4000);
    let mut matches = 0;
    let mut clustered = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=60);
        let d = rng.random_range(1..=3);
        let centers: Vec<Vec<f64>> = (0..rng.random_range(1..=4)).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let c = &centers[rng.random_range(0..centers.len())];
                c.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect()
            })
            .collect();
        let eps = rng.random_range(0.2..1.5);
        let min_pts = rng.random_range(2..=6);
        let got = dbscan(&points, eps, min_pts).unwrap();
        let want = reference_dbscan(&points, eps, min_pts);
        if same_partition(&got.labels, &want) {
            matches += 1;
        }
        if got.n_clusters() > 0 {
            clustered += 1;
        }
    }
    outcome(matches == 200, format!("{matches}/200 partitions match ({clustered} with clusters)"))
}

fn random_seq(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<f64> {
    let n = rng.random_range(1..=max_len);
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

fn dtw_properties() -> Outcome {
    let p = DtwParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let mut failures = Vec::new();
    for k in 0..500 {
        let a = random_seq(&mut rng, 50);
        let b = random_seq(&mut rng, 50);
        let dab = dtw_distance(&a, &b, &p).unwrap();
        let dba = dtw_distance(&b, &a, &p).unwrap();
        let dup: Vec<f64> = a.iter().flat_map(|&v| std::iter::repeat_n(v, rng.random_range(1..=2))).collect();
        let c = rng.random_range(0.1..10.0);
        let ca: Vec<f64> = a.iter().map(|v| c * v).collect();
        let cb: Vec<f64> = b.iter().map(|v| c * v).collect();
        let dc = dtw_distance(&ca, &cb, &p).unwrap();
        let checks = [
            ("identity", dtw_distance(&a, &a, &p).unwrap() == 0.0),
            ("symmetry", (dab - dba).abs() <= 1e-12 * dab.max(1.0)),
            ("duplication", dtw_distance(&a, &dup, &p).unwrap() == 0.0),
            ("scaling", (dc - c * dab).abs() <= 1e-9 * (c * dab).max(1.0)),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("pair {k} {name}"));
            }
        }
    }
    outcome(failures.is_empty(), format!("500 pairs, {} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()))
}

fn pca_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut low_ratio = 0;
    let mut worst_rel = 0.0f64;
    for t in 0..100 {
        let n = rng.random_range(3..=50);
        let m = rng.random_range(1..=60);
        // every fourth matrix is low rank
        let rank = if t % 4 == 0 { rng.random_range(1..=m.min(n)) } else { m };
        let basis: Vec<Vec<f64>> = (0..rank).map(|_| (0..m).map(|_| normal.sample(&mut rng)).collect()).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..rank).map(|_| normal.sample(&mut rng) * 10f64.powf(rng.random_range(-1.0..1.0))).collect();
                (0..m).map(|j| 3.0 + (0..rank).map(|r| w[r] * basis[r][j]).sum::<f64>()).collect()
            })
            .collect();
        if pca_fit_transform(&rows, 0.99).unwrap().retained_ratio() < 0.99 {
            low_ratio += 1;
        }
        let full = pca_fit_transform(&rows, 1.0).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                let d_in: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let d_out: f64 = full.coords[i].iter().zip(&full.coords[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let scale = rows.iter().flatten().map(|v| (v - 3.0).abs()).fold(0.0, f64::max);
                worst_rel = worst_rel.max((d_in - d_out).abs() / d_in.max(1e-12 * scale));
            }
        }
    }
    outcome(
        low_ratio == 0 && worst_rel <= 1e-9,
        format!("{} of 100 below 0.99 retained; worst full-rank distance error {worst_rel:.2e}", low_ratio),
    )
}

fn cloud(rng: &mut ChaCha8Rng, set: FeatureSet, n: usize, center: [f64; 2]) -> Vec<FeatureVector> {
    let d = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| FeatureVector { set, values: [center[0] + d.sample(rng), center[1] + d.sample(rng)] })
        .collect()
}

fn divergence_boundaries() -> Outcome {
    let params = BaselineParams::default().cluster;
    let (mut same_ok, mut apart_ok) = (0, 0);
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + trial);
        let b = cloud(&mut rng, FeatureSet::Floor, 150, [0.0, 0.0]);
        let t = cloud(&mut rng, FeatureSet::Floor, 150, [0.0, 0.0]);
        if leak_probability(&b, &t, &params).unwrap().probability <= 0.1 {
            same_ok += 1;
        }
        let far = cloud(&mut rng, FeatureSet::Floor, 150, [20.0, -20.0]);
        if leak_probability(&b, &far, &params).unwrap().probability >= 0.9 {
            apart_ok += 1;
        }
    }
    outcome(same_ok >= 95 && apart_ok == 100, format!("identical <= 0.1 in {same_ok}/100, separated >= 0.9 in {apart_ok}/100"))
}

fn kneedle_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let mut within = 0;
    let mut worst = 0usize;
    for _ in 0..50 {
        let n = rng.random_range(30..=200);
        let bend = rng.random_range(n / 5..4 * n / 5);
        let (slow, fast) = (rng.random_range(0.01..0.2), rng.random_range(2.0..20.0));
        let curve: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64;
                let y = if i <= bend { slow * x } else { slow * bend as f64 + fast * (x - bend as f64) };
                y * (1.0 + rng.random_range(-1e-3..1e-3))
            })
            .collect();
        // reference: the point farthest below the normalized chord
        let (lo, hi) = (curve[0].min(curve[n - 1]), curve.iter().cloned().fold(f64::MIN, f64::max));
        let reference = (0..n)
            .max_by(|&a, &b| {
                let g = |i: usize| i as f64 / (n - 1) as f64 - (curve[i] - lo) / (hi - lo);
                g(a).total_cmp(&g(b))
            })
            .unwrap();
        if let Some(k) = kneedle_knee(&curve, 1.0).unwrap() {
            let off = k.abs_diff(reference);
            worst = worst.max(off);
            if off <= 2 {
                within += 1;
            }
        }
    }
    let mut lines_none = 0;
    for _ in 0..50 {
        let n = rng.random_range(3..=200);
        let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-3.0..3.0));
        let curve: Vec<f64> = (0..n).map(|i| a + b * i as f64).collect();
        if kneedle_knee(&curve, 1.0).unwrap().is_none() {
            lines_none += 1;
        }
    }
    outcome(
        within == 50 && lines_none == 50,
        format!("{within}/50 knees within 2 (worst {worst}), {lines_none}/50 lines without knee"),
    )
}

fn performance() -> Outcome {
    let profile = StationProfile::of_type(StationType::Process);
    assert_eq!(profile.samples_per_cycle(), 200);
    let m = meta("P", 0);
    let mut rng = station_rng(9000, 0);
    let clean = FaultState::default();
    let cycles: Vec<PressureCycle> =
        (0..400).map(|k| generate_cycle(&profile, &clean, T0 + k as f64 * profile.period(), &mut rng)).collect();
    let built_at = Timestamp(T0 + 400.0 * profile.period());
    let t = Instant::now();
    let baseline = build_baseline(&cycles, &m, Trigger::Maintenance, built_at, &BaselineParams::default()).unwrap();
    let build = t.elapsed();
    let start = built_at.0;
    let test: Vec<PressureCycle> =
        (0..160).map(|k| generate_cycle(&profile, &clean, start + k as f64 * profile.period(), &mut rng)).collect();
    let window = Window::new(built_at, built_at.plus_hours(1.0));
    let t = Instant::now();
    analyze_station(&baseline, &test, window, &DetectorConfig::default()).unwrap();
    let analyze = t.elapsed();
    outcome(
        build < Duration::from_secs(30) && analyze < Duration::from_secs(10),
        format!(
            "build_baseline 400x200 {:.2}s (kept {}/400), analyze_station 160 {:.2}s",
            build.as_secs_f64(),
            baseline.retained_cycles.len(),
            analyze.as_secs_f64()
        ),
    )
}

fn sorted_lines(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap_or_default();
    let mut v: Vec<String> = text.lines().map(str::to_string).collect();
    v.sort();
    v
}

fn orchestrator_checks() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // 100-station replay at 5 Hz
    let mut sc = Scenario::new(Timestamp(T0), 3.0, 42);
    for i in 0..100 {
        let profile = StationProfile { sample_rate: 5.0, ..StationProfile::of_type(station_type(i)) };
        let fault = if i % 4 == 0 { FaultSpec::leak(Timestamp(T0 + 7200.0), 0.8) } else { FaultSpec::none() };
        sc.push(meta(&format!("M{}", i / 10), i), profile, fault);
    }
    let par_dir = tempfile::tempdir().unwrap();
    let seq_dir = tempfile::tempdir().unwrap();
    let par = replay(&sc, par_dir.path(), 8);
    let seq = replay(&sc, seq_dir.path(), 1);
    let errors = par.iter().filter(|r| r.status == JobStatus::Error).count();
    let par_log = sorted_lines(&DataLayout::new(par_dir.path()).results());
    let seq_log = sorted_lines(&DataLayout::new(seq_dir.path()).results());
    let equivalent = par_log == seq_log && par.len() == 200 && seq.len() == 200;
    pass &= equivalent && errors == 0;
    notes.push(format!("replay {} jobs, {errors} errors, parallel==sequential {equivalent}", par.len()));

    let machines = MachinesFile::from_scenario(&sc, "r1").machines;
    let mut state = leakwatch::orchestrator::RunState::default();
    let clock = Timestamp(T0).plus_hours(2.0);
    let first = tick(clock, &machines, &mut state).len();
    let again = tick(clock, &machines, &mut state).len();
    let tel = memory_telemetry(&sc);
    let opts = RunOptions { write_alerts: false, ..RunOptions::default() };
    let mut orch = Orchestrator::open(DataLayout::new(par_dir.path()), &tel, opts).unwrap();
    let replayed = orch.step(Timestamp(T0).plus_hours(3.0), &machines).unwrap().len();
    let idempotent = first == 100 && again == 0 && replayed == 0;
    pass &= idempotent;
    notes.push(format!("re-tick jobs {again} and {replayed} (first tick {first})"));

    let (torn, mismatched) = kill_trials();
    pass &= torn == 0 && mismatched == 0;
    notes.push(format!("10 kill trials: {torn} torn logs, {mismatched} logs differing after resume"));
    outcome(pass, notes.join("; "))
}

/// Kills `leakwatch run` at random points, resumes it, and checks the log.
fn kill_trials() -> (usize, usize) {
    let mut sc = Scenario::new(Timestamp(T0), 4.0, 77);
    for i in 0..12 {
        let profile = StationProfile { sample_rate: 5.0, ..StationProfile::of_type(station_type(i)) };
        let fault = if i % 3 == 0 { FaultSpec::leak(Timestamp(T0 + 9000.0), 1.0) } else { FaultSpec::none() };
        sc.push(meta("K", i), profile, fault);
    }
    let template = tempfile::tempdir().unwrap();
    write_scenario(&sc, template.path()).unwrap();
    MachinesFile::from_scenario(&sc, "r1").save(&DataLayout::new(template.path()).machines()).unwrap();

    let run = |dir: &Path| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_leakwatch"));
        c.args(["run", "--data"]).arg(dir).arg("--telemetry").arg(template.path());
        c.args(["--from", &T0.to_string(), "--hours", "4", "--pool", "8", "--no-alert-files"]);
        c.stdout(Stdio::null()).stderr(Stdio::null());
        c
    };
    let fresh = || {
        let d = tempfile::tempdir().unwrap();
        std::fs::copy(DataLayout::new(template.path()).machines(), DataLayout::new(d.path()).machines()).unwrap();
        d
    };

    let reference = fresh();
    let t = Instant::now();
    assert!(run(reference.path()).status().unwrap().success());
    let full = t.elapsed();
    let want = sorted_lines(&DataLayout::new(reference.path()).results());

    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let (mut torn, mut mismatched) = (0, 0);
    for trial in 0..10 {
        let dir = fresh();
        let mut child = run(dir.path()).spawn().unwrap();
        std::thread::sleep(full.mul_f64(rng.random_range(0.05..0.95)));
        let _ = child.kill();
        let _ = child.wait();
        let log_path = DataLayout::new(dir.path()).results();
        let raw = std::fs::read(&log_path).unwrap_or_default();
        let contents = read_log(&log_path).unwrap();
        if !contents.bad_lines.is_empty() || raw.last().is_some_and(|&b| b != b'\n') {
            torn += 1;
        }
        assert!(run(dir.path()).status().unwrap().success(), "trial {trial}: resume failed");
        if sorted_lines(&log_path) != want {
            mismatched += 1;
        }
    }
    (torn, mismatched)
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "leak recall", leak_recall),
        (2, "drift discrimination", drift_discrimination),
        (3, "outlier scrub", outlier_scrub),
        (4, "dbscan oracle", dbscan_oracle),
        (5, "dtw properties", dtw_properties),
        (6, "pca variance and distances", pca_checks),
        (7, "divergence boundaries", divergence_boundaries),
        (8, "kneedle", kneedle_checks),
        (9, "performance", performance),
        (10, "orchestrator", orchestrator_checks),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !res.pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {name:<28} {} ({:.1}s) {}",
            if res.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            res.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
