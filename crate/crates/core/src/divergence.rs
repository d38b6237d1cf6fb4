//! Baseline-versus-test separation scored as a leak probability.
//!
//! Both feature clouds are z-scored against the baseline, pooled, and
//! clustered with DBSCAN (epsilon from the k-distance knee). With
//! `rho = |T| / (|B| + |T|)` the expected test share of a well-mixed
//! cluster, each cluster scores `clamp((p_c - rho) / (1 - rho), 0, 1)` from
//! its test share `p_c`, and every test point left as noise scores 1. The
//! probability is the test-point-weighted mean of those scores. The binary
//! entropy of each cluster's composition is reported alongside.

use serde::{Deserialize, Serialize};

use crate::clustering::{dbscan, estimate_epsilon, ClusterError, ClusterParams, NOISE};
use crate::features::FeatureVector;

pub const STD_FLOOR: f64 = 1e-12;

/// Per-dimension mean and standard deviation of the baseline features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl StandardizationStats {
    pub fn fit(feats: &[FeatureVector]) -> Self {
        let n = feats.len() as f64;
        let mut mean = [0.0; 2];
        let mut std = [0.0; 2];
        for d in 0..2 {
            mean[d] = feats.iter().map(|f| f.values[d]).sum::<f64>() / n;
            let var = feats.iter().map(|f| (f.values[d] - mean[d]).powi(2)).sum::<f64>() / n;
            std[d] = var.sqrt().max(STD_FLOOR);
        }
        StandardizationStats { mean, std }
    }

    pub fn apply(&self, f: &FeatureVector) -> Vec<f64> {
        (0..2).map(|d| (f.values[d] - self.mean[d]) / self.std[d]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterComposition {
    pub size: usize,
    pub test_count: usize,
    pub test_fraction: f64,
    pub entropy: f64,
    pub separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub probability: f64,
    pub clusters: Vec<ClusterComposition>,
    pub noise_test_count: usize,
    pub noise_baseline_count: usize,
    pub test_total: usize,
    pub mixing_fraction: f64,
    pub epsilon_used: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DivergenceError {
    #[error("baseline has {got} feature vectors, need at least {need}")]
    InsufficientBaseline { got: usize, need: usize },
    #[error("test window has {got} feature vectors, need at least {need}")]
    InsufficientTest { got: usize, need: usize },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Z-scores both sets against the baseline's statistics (population std,
/// floored at `1e-12`).
pub fn standardize(
    baseline: &[FeatureVector],
    test: &[FeatureVector],
    min_pts: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, StandardizationStats), DivergenceError> {
    if baseline.len() < min_pts + 1 {
        return Err(DivergenceError::InsufficientBaseline {
            got: baseline.len(),
            need: min_pts + 1,
        });
    }
    let stats = StandardizationStats::fit(baseline);
    Ok((
        baseline.iter().map(|f| stats.apply(f)).collect(),
        test.iter().map(|f| stats.apply(f)).collect(),
        stats,
    ))
}

/// `H2(p)` in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

pub fn leak_probability(
    baseline: &[FeatureVector],
    test: &[FeatureVector],
    params: &ClusterParams,
) -> Result<DivergenceReport, DivergenceError> {
    let need = params.min_pts + 1;
    if baseline.len() < need {
        return Err(DivergenceError::InsufficientBaseline { got: baseline.len(), need });
    }
    if test.len() < need {
        return Err(DivergenceError::InsufficientTest { got: test.len(), need });
    }
    let (b, t, _) = standardize(baseline, test, params.min_pts)?;
    let n_b = b.len();
    let n_t = t.len();
    let mut pooled = b;
    pooled.extend(t);

    let eps = estimate_epsilon(&pooled, params)?;
    let labels = dbscan(&pooled, eps, params.min_pts)?;

    let rho = n_t as f64 / (n_b + n_t) as f64;
    let mut test_counts = vec![0usize; labels.n_clusters()];
    let mut noise_test = 0;
    let mut noise_baseline = 0;
    for (i, &l) in labels.labels.iter().enumerate() {
        let is_test = i >= n_b;
        match (l, is_test) {
            (NOISE, true) => noise_test += 1,
            (NOISE, false) => noise_baseline += 1,
            (c, true) => test_counts[c as usize] += 1,
            _ => {}
        }
    }

    let mut weighted = noise_test as f64;
    let clusters = labels
        .cluster_sizes
        .iter()
        .zip(&test_counts)
        .map(|(&size, &tc)| {
            let p = tc as f64 / size as f64;
            let separation = ((p - rho) / (1.0 - rho)).clamp(0.0, 1.0);
            weighted += tc as f64 * separation;
            ClusterComposition {
                size,
                test_count: tc,
                test_fraction: p,
                entropy: binary_entropy(p),
                separation,
            }
        })
        .collect();

    Ok(DivergenceReport {
        probability: (weighted / n_t as f64).clamp(0.0, 1.0),
        clusters,
        noise_test_count: noise_test,
        noise_baseline_count: noise_baseline,
        test_total: n_t,
        mixing_fraction: rho,
        epsilon_used: eps,
    })
}
