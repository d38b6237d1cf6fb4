//! Per-station baselines: outlier scrubbing, construction and persistence.
//!
//! A baseline is the scrubbed first hour of post-maintenance cycles. Cycles
//! are compared by DTW, the distance rows reduced by PCA, and DBSCAN run on
//! the embedding; only the largest cluster survives. Baselines live one file
//! per station and are replaced atomically (temp file, fsync, rename).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{dbscan, estimate_epsilon, ClusterError, ClusterParams};
use crate::cycle_model::{PressureCycle, StationKey, StationMeta, DEFAULT_MIN_CYCLE_SAMPLES};
use crate::distances::{downsample, pairwise_distance_matrix, DistanceError, DistanceMatrix, DtwParams};
use crate::divergence::StandardizationStats;
use crate::features::{feature_set_1_with_min, feature_set_2, FeatureError, FeatureSet, FeatureVector};
use crate::reduction::{pca_fit_transform_capped, ReductionError, DEFAULT_MAX_DIMS, DEFAULT_VARIANCE_TARGET};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Maintenance,
    DesignChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub dtw: DtwParams,
    pub cluster: ClusterParams,
    pub min_cycles: usize,
    pub max_outlier_fraction: f64,
    pub min_span_secs: f64,
    pub variance_target: f64,
    pub max_dims: usize,
    pub min_cycle_samples: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            dtw: DtwParams::default(),
            cluster: ClusterParams::default(),
            min_cycles: 30,
            max_outlier_fraction: 0.30,
            min_span_secs: 45.0 * 60.0,
            variance_target: DEFAULT_VARIANCE_TARGET,
            max_dims: DEFAULT_MAX_DIMS,
            min_cycle_samples: DEFAULT_MIN_CYCLE_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub epsilon_used: f64,
    pub embedding_dims: usize,
}

impl OutlierReport {
    pub fn removed_fraction(&self) -> f64 {
        self.removed.len() as f64 / (self.kept.len() + self.removed.len()) as f64
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("{got} cycles available, need at least {need}")]
    InsufficientCycles { got: usize, need: usize },
    #[error("cycles span {got:.0} s, need at least {need:.0} s")]
    InsufficientSpan { got: f64, need: f64 },
    #[error("baseline unstable: {removed} of {total} cycles flagged as outliers")]
    BaselineUnstable { removed: usize, total: usize },
    #[error("corrupt baseline {path}: {reason}")]
    CorruptBaseline { path: PathBuf, reason: String },
    #[error("baseline I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// DTW -> PCA -> DBSCAN; keeps the largest cluster. Also returns the
/// distance matrix so callers can reuse it.
pub fn outlier_scan(
    cycles: &[PressureCycle],
    params: &BaselineParams,
) -> Result<(OutlierReport, DistanceMatrix), BaselineError> {
    let need = params.cluster.min_pts + 2;
    if cycles.len() < need {
        return Err(BaselineError::InsufficientCycles { got: cycles.len(), need });
    }
    let matrix = pairwise_distance_matrix(cycles, &params.dtw)?;
    let rows: Vec<Vec<f64>> = matrix.rows().map(<[f64]>::to_vec).collect();
    let embedding = pca_fit_transform_capped(&rows, params.variance_target, params.max_dims)?;
    let eps = estimate_epsilon(&embedding.coords, &params.cluster)?;
    let labels = dbscan(&embedding.coords, eps, params.cluster.min_pts)?;
    let (kept, removed) = match labels.largest_cluster() {
        Some(main) => (0..cycles.len()).partition(|&i| labels.labels[i] == main),
        None => (Vec::new(), (0..cycles.len()).collect()),
    };
    Ok((
        OutlierReport {
            kept,
            removed,
            epsilon_used: eps,
            embedding_dims: embedding.dims,
        },
        matrix,
    ))
}

/// [`outlier_scan`] that fails with `BaselineUnstable` when more than
/// `max_outlier_fraction` of the cycles would be dropped.
pub fn remove_outliers(cycles: &[PressureCycle], params: &BaselineParams) -> Result<OutlierReport, BaselineError> {
    let (report, _) = outlier_scan(cycles, params)?;
    if report.removed_fraction() > params.max_outlier_fraction {
        return Err(BaselineError::BaselineUnstable {
            removed: report.removed.len(),
            total: cycles.len(),
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub station: StationMeta,
    pub built_at: Timestamp,
    pub trigger: Trigger,
    /// Kept cycles, downsampled to the DTW point cap.
    pub retained_cycles: Vec<PressureCycle>,
    pub fs1: Vec<FeatureVector>,
    pub fs2: Vec<FeatureVector>,
    pub fs1_stats: StandardizationStats,
    pub fs2_stats: StandardizationStats,
    pub outlier_count: usize,
}

impl Baseline {
    pub fn median_floor_log(&self) -> f64 {
        let mut v: Vec<f64> = self.fs1.iter().map(|f| f.values[0]).collect();
        crate::features::median(&mut v)
    }
}

/// Features of each cycle, computed on the full-resolution trace.
pub fn cycle_features(
    cycles: &[PressureCycle],
    meta: &StationMeta,
    min_cycle_samples: usize,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>), FeatureError> {
    let fs1 = cycles
        .iter()
        .map(|c| feature_set_1_with_min(c, meta.station_type, min_cycle_samples))
        .collect::<Result<Vec<_>, _>>()?;
    let fs2 = cycles.iter().map(feature_set_2).collect::<Result<Vec<_>, _>>()?;
    Ok((fs1, fs2))
}

pub fn build_baseline(
    cycles: &[PressureCycle],
    meta: &StationMeta,
    trigger: Trigger,
    built_at: Timestamp,
    params: &BaselineParams,
) -> Result<Baseline, BaselineError> {
    if cycles.len() < params.min_cycles {
        return Err(BaselineError::InsufficientCycles {
            got: cycles.len(),
            need: params.min_cycles,
        });
    }
    let first = cycles.iter().map(|c| c.start).fold(f64::INFINITY, f64::min);
    let last = cycles.iter().map(|c| c.end).fold(f64::NEG_INFINITY, f64::max);
    if last - first < params.min_span_secs {
        return Err(BaselineError::InsufficientSpan {
            got: last - first,
            need: params.min_span_secs,
        });
    }
    let report = remove_outliers(cycles, params)?;
    if report.kept.len() < params.min_cycles {
        return Err(BaselineError::InsufficientCycles {
            got: report.kept.len(),
            need: params.min_cycles,
        });
    }
    let kept: Vec<PressureCycle> = report.kept.iter().map(|&i| cycles[i].clone()).collect();
    let (fs1, fs2) = cycle_features(&kept, meta, params.min_cycle_samples)?;
    Ok(Baseline {
        station: meta.clone(),
        built_at,
        trigger,
        retained_cycles: kept.iter().map(|c| downsample(c, params.dtw.max_points)).collect(),
        fs1_stats: StandardizationStats::fit(&fs1),
        fs2_stats: StandardizationStats::fit(&fs2),
        fs1,
        fs2,
        outlier_count: report.removed.len(),
    })
}

// --- persistence ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct StatsDoc {
    fs1: StandardizationStats,
    fs2: StandardizationStats,
}

#[derive(Serialize, Deserialize)]
struct FeaturesDoc {
    fs1: Vec<[f64; 2]>,
    fs2: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct BaselineDoc {
    meta: StationMeta,
    built_at: Timestamp,
    trigger: Trigger,
    stats: StatsDoc,
    /// `[start, end]` of each entry in `cycles`.
    cycle_bounds: Vec<[f64; 2]>,
    cycles: Vec<Vec<[f64; 2]>>,
    features: FeaturesDoc,
    outlier_count: usize,
}

impl From<&Baseline> for BaselineDoc {
    fn from(b: &Baseline) -> Self {
        BaselineDoc {
            meta: b.station.clone(),
            built_at: b.built_at,
            trigger: b.trigger,
            stats: StatsDoc {
                fs1: b.fs1_stats,
                fs2: b.fs2_stats,
            },
            cycle_bounds: b.retained_cycles.iter().map(|c| [c.start, c.end]).collect(),
            cycles: b.retained_cycles.iter().map(PressureCycle::log_pairs).collect(),
            features: FeaturesDoc {
                fs1: b.fs1.iter().map(|f| f.values).collect(),
                fs2: b.fs2.iter().map(|f| f.values).collect(),
            },
            outlier_count: b.outlier_count,
        }
    }
}

impl BaselineDoc {
    fn into_baseline(self) -> Result<Baseline, String> {
        if self.cycle_bounds.len() != self.cycles.len() {
            return Err("cycle_bounds and cycles differ in length".into());
        }
        if self.features.fs1.len() != self.features.fs2.len() {
            return Err("fs1 and fs2 differ in length".into());
        }
        let wrap = |set, v: Vec<[f64; 2]>| v.into_iter().map(|values| FeatureVector { set, values }).collect();
        Ok(Baseline {
            station: self.meta,
            built_at: self.built_at,
            trigger: self.trigger,
            retained_cycles: self
                .cycle_bounds
                .iter()
                .zip(&self.cycles)
                .map(|(&[s, e], pairs)| PressureCycle::from_log_pairs(s, e, pairs))
                .collect(),
            fs1: wrap(FeatureSet::Floor, self.features.fs1),
            fs2: wrap(FeatureSet::Shape, self.features.fs2),
            fs1_stats: self.stats.fs1,
            fs2_stats: self.stats.fs2,
            outlier_count: self.outlier_count,
        })
    }
}

pub fn to_json(b: &Baseline) -> String {
    serde_json::to_string(&BaselineDoc::from(b)).expect("baseline serializes")
}

pub fn from_json(text: &str) -> Result<Baseline, String> {
    let doc: BaselineDoc = serde_json::from_str(text).map_err(|e| e.to_string())?;
    doc.into_baseline()
}

/// Writes `contents` to `path` via a sibling temp file, fsync and rename.
pub fn atomic_write(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Baseline files under `<data_root>/baselines/<machine>/<station>.baseline.json`.
#[derive(Debug, Clone)]
pub struct BaselineStore {
    root: PathBuf,
}

impl BaselineStore {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        BaselineStore { root: data_root.into() }
    }

    pub fn path(&self, key: &StationKey) -> PathBuf {
        self.root
            .join("baselines")
            .join(&key.machine_id)
            .join(format!("{}.baseline.json", key.station_id))
    }

    pub fn exists(&self, key: &StationKey) -> bool {
        self.path(key).is_file()
    }

    /// Replaces any previous baseline for the station.
    pub fn save(&self, baseline: &Baseline) -> Result<PathBuf, BaselineError> {
        let path = self.path(&baseline.station.key());
        atomic_write(&path, to_json(baseline).as_bytes()).map_err(|source| BaselineError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    /// `Ok(None)` when absent. An unreadable file is renamed with a `.bad`
    /// suffix and reported as `CorruptBaseline`.
    pub fn load(&self, key: &StationKey) -> Result<Option<Baseline>, BaselineError> {
        let path = self.path(key);
        let text = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(BaselineError::Io { path, source }),
        };
        let parsed = std::str::from_utf8(&text)
            .map_err(|e| e.to_string())
            .and_then(from_json);
        match parsed {
            Ok(b) => Ok(Some(b)),
            Err(reason) => {
                let mut bad = path.as_os_str().to_owned();
                bad.push(".bad");
                if let Err(e) = fs::rename(&path, PathBuf::from(bad)) {
                    log::warn!("could not quarantine {}: {e}", path.display());
                }
                Err(BaselineError::CorruptBaseline { path, reason })
            }
        }
    }

    /// Returns whether a file was removed.
    pub fn delete(&self, key: &StationKey) -> Result<bool, BaselineError> {
        let path = self.path(key);
        match fs::remove_file(&path) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
            Err(source) => Err(BaselineError::Io { path, source }),
        }
    }
}
