//! DBSCAN with epsilon chosen automatically from the k-distance curve.
//!
//! The sorted k-nearest-neighbour distance curve is searched for its knee
//! with kneedle; the distance at the knee becomes epsilon. Degenerate inputs
//! fall back to a quantile of the curve, then to its smallest positive
//! value, then to `1e-12`.

use serde::{Deserialize, Serialize};

pub const EPSILON_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub min_pts: usize,
    pub kneedle_sensitivity: f64,
    pub eps_fallback_quantile: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            min_pts: 5,
            kneedle_sensitivity: 1.0,
            eps_fallback_quantile: 0.90,
        }
    }
}

pub const NOISE: i32 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabels {
    /// `-1` for noise, otherwise `0..C` in discovery order.
    pub labels: Vec<i32>,
    pub cluster_sizes: Vec<usize>,
    pub core: Vec<bool>,
}

impl ClusterLabels {
    pub fn n_clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Label of the biggest cluster; ties go to the lower label.
    pub fn largest_cluster(&self) -> Option<i32> {
        self.cluster_sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(label, _)| label as i32)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("need more than k={k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("knee detection needs at least 3 points, got {0}")]
    CurveTooShort(usize),
    #[error("invalid clustering parameter: {0}")]
    InvalidParams(String),
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distance from every point to its k-th nearest other point, ascending.
pub fn knn_distance_curve(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>, ClusterError> {
    let n = points.len();
    if k == 0 || n <= k {
        return Err(ClusterError::TooFewPoints { n, k });
    }
    let mut scratch = Vec::with_capacity(n - 1);
    let mut curve: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            scratch.clear();
            scratch.extend(
                points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, q)| sq_dist(p, q)),
            );
            let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect();
    curve.sort_by(f64::total_cmp);
    Ok(curve)
}

/// Kneedle on an ascending curve sampled at `x = 0..n`.
///
/// Both axes are min-max normalized. A curve lying below its chord (the
/// usual convex k-distance "elbow") is flipped into the concave orientation
/// first and the resulting index mapped back. Candidates are local maxima
/// of the difference curve `y_n - x_n`; the first candidate after which the
/// difference curve falls below `y_d(max) - S * mean(Δx_n)`, before the next
/// candidate, is the knee.
pub fn kneedle_knee(curve: &[f64], sensitivity: f64) -> Result<Option<usize>, ClusterError> {
    let n = curve.len();
    if n < 3 {
        return Err(ClusterError::CurveTooShort(n));
    }
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    // flat up to rounding: no knee
    if !(range > 1e-12 * hi.abs().max(lo.abs())) || !range.is_finite() {
        return Ok(None);
    }
    let step = 1.0 / (n - 1) as f64;
    let x_n: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    let y_n: Vec<f64> = curve.iter().map(|v| (v - lo) / range).collect();

    let chord_gap: f64 = y_n.iter().zip(&x_n).map(|(y, x)| y - x).sum();
    let convex = chord_gap < 0.0;
    let y_t: Vec<f64> = if convex {
        (0..n).map(|i| 1.0 - y_n[n - 1 - i]).collect()
    } else {
        y_n
    };
    let diff: Vec<f64> = y_t.iter().zip(&x_n).map(|(y, x)| y - x).collect();

    let maxima: Vec<usize> = (1..n - 1)
        .filter(|&i| diff[i] > diff[i - 1] && diff[i] >= diff[i + 1])
        .collect();
    for (c, &m) in maxima.iter().enumerate() {
        let threshold = diff[m] - sensitivity * step;
        let stop = maxima.get(c + 1).copied().unwrap_or(n);
        if diff[m + 1..stop].iter().any(|&d| d < threshold) {
            return Ok(Some(if convex { n - 1 - m } else { m }));
        }
    }
    Ok(None)
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// How epsilon was obtained, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSource {
    Knee,
    Quantile,
    SmallestPositive,
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonEstimate {
    pub eps: f64,
    pub source: EpsilonSource,
    pub knee_index: Option<usize>,
}

pub fn estimate_epsilon(points: &[Vec<f64>], params: &ClusterParams) -> Result<f64, ClusterError> {
    estimate_epsilon_detailed(points, params).map(|e| e.eps)
}

pub fn estimate_epsilon_detailed(
    points: &[Vec<f64>],
    params: &ClusterParams,
) -> Result<EpsilonEstimate, ClusterError> {
    let curve = knn_distance_curve(points, params.min_pts)?;
    let knee = if curve.len() >= 3 {
        kneedle_knee(&curve, params.kneedle_sensitivity)?
    } else {
        None
    };
    let (mut eps, mut source) = match knee {
        Some(i) => (curve[i], EpsilonSource::Knee),
        None => (
            quantile_sorted(&curve, params.eps_fallback_quantile),
            EpsilonSource::Quantile,
        ),
    };
    if !(eps > 0.0) {
        match curve.iter().copied().find(|&d| d > 0.0) {
            Some(d) => {
                eps = d;
                source = EpsilonSource::SmallestPositive;
            }
            None => {
                eps = EPSILON_FLOOR;
                source = EpsilonSource::Floor;
            }
        }
    }
    Ok(EpsilonEstimate {
        eps,
        source,
        knee_index: knee,
    })
}

/// Classic DBSCAN over Euclidean distance.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Points are scanned in index order; a border point reachable
/// from several clusters joins the first one discovered.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<ClusterLabels, ClusterError> {
    if !(eps > 0.0) {
        return Err(ClusterError::InvalidParams(format!("eps must be > 0, got {eps}")));
    }
    if min_pts < 2 {
        return Err(ClusterError::InvalidParams(format!("min_pts must be >= 2, got {min_pts}")));
    }
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| sq_dist(&points[i], &points[j]) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    const UNVISITED: i32 = -2;
    let mut labels = vec![UNVISITED; n];
    let mut sizes = Vec::new();
    let mut queue = Vec::new();
    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        if !core[i] {
            labels[i] = NOISE;
            continue;
        }
        let cluster = sizes.len() as i32;
        let mut size = 1;
        labels[i] = cluster;
        queue.clear();
        queue.extend(neighbors[i].iter().copied());
        while let Some(j) = queue.pop() {
            if labels[j] == NOISE {
                labels[j] = cluster;
                size += 1;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            size += 1;
            if core[j] {
                queue.extend(neighbors[j].iter().copied());
            }
        }
        sizes.push(size);
    }
    Ok(ClusterLabels {
        labels,
        cluster_sizes: sizes,
        core,
    })
}
