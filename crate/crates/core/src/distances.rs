//! Dynamic time warping between cycles and the pairwise distance matrix.
//!
//! Local cost is the absolute difference of log10 pressures, steps are
//! (down, right, diagonal), and the search is restricted to a Sakoe–Chiba
//! band `|i - j| <= w` with `w = ceil(band_fraction * max(n, m))`, widened
//! to at least `|n - m|` so the end cell is always reachable. The returned
//! value is the raw accumulated path cost.

use serde::{Deserialize, Serialize};

use crate::cycle_model::PressureCycle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtwParams {
    pub band_fraction: f64,
    pub max_points: usize,
}

impl Default for DtwParams {
    fn default() -> Self {
        DtwParams {
            band_fraction: 0.1,
            max_points: 200,
        }
    }
}

impl DtwParams {
    pub fn band_width(&self, n: usize, m: usize) -> usize {
        let longer = n.max(m) as f64;
        let w = (self.band_fraction * longer).ceil() as usize;
        w.max(n.abs_diff(m))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistanceError {
    #[error("DTW on an empty sequence")]
    EmptySequence,
    #[error("DTW on a non-finite value")]
    NonFinite,
    #[error("need at least 2 cycles for a distance matrix, got {0}")]
    InsufficientCycles(usize),
}

/// Uniform index decimation keeping the first and last samples.
pub fn downsample(cycle: &PressureCycle, max_points: usize) -> PressureCycle {
    let n = cycle.len();
    let m = max_points.max(2);
    if n <= m {
        return cycle.clone();
    }
    let step = (n - 1) as f64 / (m - 1) as f64;
    let idx: Vec<usize> = (0..m).map(|k| ((k as f64 * step).round() as usize).min(n - 1)).collect();
    PressureCycle {
        start: cycle.start,
        end: cycle.end,
        samples: idx.iter().map(|&i| cycle.samples[i]).collect(),
        log_values: if cycle.log_values.len() == n {
            idx.iter().map(|&i| cycle.log_values[i]).collect()
        } else {
            Vec::new()
        },
    }
}

/// Banded DTW with two rolling rows.
pub fn dtw_distance(a: &[f64], b: &[f64], params: &DtwParams) -> Result<f64, DistanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(DistanceError::EmptySequence);
    }
    if !a.iter().chain(b).all(|v| v.is_finite()) {
        return Err(DistanceError::NonFinite);
    }
    let w = params.band_width(a.len(), b.len());
    Ok(banded_dtw(a, b, w))
}

// plain compare-select; callers reject NaN, and this keeps the loop to one minsd
#[inline(always)]
fn fmin(x: f64, y: f64) -> f64 {
    if x < y {
        x
    } else {
        y
    }
}

fn banded_dtw(a: &[f64], b: &[f64], w: usize) -> f64 {
    let m = b.len();
    // prev/curr hold one extra leading cell so column -1 reads as unreachable
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    let mut acc = 0.0;
    for (j, &bj) in b.iter().enumerate().take(w.min(m - 1) + 1) {
        acc += (a[0] - bj).abs();
        prev[j + 1] = acc;
    }
    for (i, &ai) in a.iter().enumerate().skip(1) {
        let lo = i.saturating_sub(w);
        let hi = (i + w).min(m - 1);
        if lo > hi {
            // row lies wholly outside the band
            return f64::INFINITY;
        }
        curr[lo] = f64::INFINITY;
        let mut left = f64::INFINITY;
        let row_prev = &prev[lo..=hi + 1];
        let row_b = &b[lo..=hi];
        let out = &mut curr[lo + 1..=hi + 1];
        for k in 0..row_b.len() {
            let best = fmin(fmin(row_prev[k], row_prev[k + 1]), left);
            left = (ai - row_b[k]).abs() + best;
            out[k] = left;
        }
        if hi + 2 <= m {
            curr[hi + 2] = f64::INFINITY;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// Symmetric `n x n` matrix of DTW distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        DistanceMatrix {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
        self.values[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n.max(1))
    }

    /// Sum of distances from `i` to every other point.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }
}

/// Downsamples every cycle to `params.max_points`, then fills the upper
/// triangle and mirrors it.
pub fn pairwise_distance_matrix(
    cycles: &[PressureCycle],
    params: &DtwParams,
) -> Result<DistanceMatrix, DistanceError> {
    let seqs: Vec<Vec<f64>> = cycles
        .iter()
        .map(|c| downsample(c, params.max_points).log_values)
        .collect();
    pairwise_sequences(&seqs, params)
}

pub fn pairwise_sequences(seqs: &[Vec<f64>], params: &DtwParams) -> Result<DistanceMatrix, DistanceError> {
    let n = seqs.len();
    if n < 2 {
        return Err(DistanceError::InsufficientCycles(n));
    }
    if seqs.iter().any(Vec::is_empty) {
        return Err(DistanceError::EmptySequence);
    }
    if !seqs.iter().flatten().all(|v| v.is_finite()) {
        return Err(DistanceError::NonFinite);
    }
    let mut m = DistanceMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = params.band_width(seqs[i].len(), seqs[j].len());
            m.set_symmetric(i, j, banded_dtw(&seqs[i], &seqs[j], w));
        }
    }
    Ok(m)
}

/// Indices of the `k` members with the smallest total distance to the rest,
/// best first (ties by index).
pub fn medoid_ranking(matrix: &DistanceMatrix, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..matrix.n()).collect();
    order.sort_by(|&a, &b| matrix.row_sum(a).total_cmp(&matrix.row_sum(b)).then(a.cmp(&b)));
    order.truncate(k);
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle_model::PressureSample;
    use proptest::prelude::*;

    /// Exhaustive minimum over every monotone alignment path inside the band.
    fn brute_force_dtw(a: &[f64], b: &[f64], w: usize) -> f64 {
        fn walk(a: &[f64], b: &[f64], w: usize, i: usize, j: usize) -> f64 {
            if i.abs_diff(j) > w {
                return f64::INFINITY;
            }
            let here = (a[i] - b[j]).abs();
            if i == a.len() - 1 && j == b.len() - 1 {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(walk(a, b, w, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(walk(a, b, w, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(walk(a, b, w, i + 1, j + 1));
            }
            here + best
        }
        walk(a, b, w, 0, 0)
    }

    fn full() -> DtwParams {
        DtwParams {
            band_fraction: 1.0,
            max_points: 200,
        }
    }

    fn cycle_from_logs(logs: &[f64]) -> PressureCycle {
        PressureCycle {
            start: 0.0,
            end: logs.len() as f64,
            samples: logs
                .iter()
                .enumerate()
                .map(|(i, &l)| PressureSample { timestamp: i as f64, pressure: 10f64.powf(l) })
                .collect(),
            log_values: logs.to_vec(),
        }
    }

    #[test]
    fn frozen_examples() {
        let p = DtwParams::default();
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &p).unwrap(), 0.0);
        // oracle: every path through [0,0] x [1,1] has >= 2 cells of cost 1
        assert_eq!(brute_force_dtw(&[0.0, 0.0], &[1.0, 1.0], 2), 2.0);
        assert_eq!(dtw_distance(&[0.0, 0.0], &[1.0, 1.0], &p).unwrap(), 2.0);
        let stretched = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        assert_eq!(brute_force_dtw(&[1.0, 2.0, 3.0], &stretched, 3), 0.0);
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &stretched, &p).unwrap(), 0.0);
        assert_eq!(dtw_distance(&[], &[1.0], &p), Err(DistanceError::EmptySequence));
        assert_eq!(dtw_distance(&[f64::NAN], &[1.0], &p), Err(DistanceError::NonFinite));
    }

    #[test]
    fn band_widens_to_length_difference() {
        let p = DtwParams::default();
        assert_eq!(p.band_width(6, 3), 3);
        assert_eq!(p.band_width(200, 200), 20);
        assert_eq!(p.band_width(201, 200), 21);
    }

    #[test]
    fn banded_matches_brute_force_on_small_sequences() {
        let a = [0.1, 0.5, -0.2, 0.9, 0.3, 0.0, 0.4];
        let b = [0.2, 0.6, 0.4, -0.1, 0.8, 0.1];
        for w in 1..=7 {
            let got = banded_dtw(&a, &b, w.max(1));
            let want = brute_force_dtw(&a, &b, w.max(1));
            assert!((got - want).abs() < 1e-12, "w={w}: {got} vs {want}");
        }
    }

    #[test]
    fn downsample_examples() {
        let c200 = cycle_from_logs(&vec![0.5; 200]);
        assert_eq!(downsample(&c200, 200), c200);

        let logs: Vec<f64> = (0..400).map(f64::from).collect();
        let d = downsample(&cycle_from_logs(&logs), 200);
        assert_eq!(d.len(), 200);
        assert_eq!(d.log_values[0], 0.0);
        assert_eq!(d.log_values[199], 399.0);
        // index arithmetic: round(k * 399/199) strictly increasing
        let idx: Vec<usize> = (0..200).map(|k| ((k as f64) * 399.0 / 199.0).round() as usize).collect();
        assert!(idx.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(d.log_values, idx.iter().map(|&i| i as f64).collect::<Vec<_>>());

        let five = downsample(&cycle_from_logs(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2);
        assert_eq!(five.log_values, vec![1.0, 5.0]);
    }

    #[test]
    fn matrix_examples() {
        let c = cycle_from_logs(&[-7.0, -6.5, -3.0, -3.0, -6.0]);
        let m = pairwise_distance_matrix(&[c.clone(), c.clone(), c.clone()], &full()).unwrap();
        assert!(m.rows().flatten().all(|&v| v == 0.0));

        let flat = cycle_from_logs(&[-7.0; 12]);
        let shifted = cycle_from_logs(&[-6.0; 12]);
        let m = pairwise_distance_matrix(&[flat.clone(), flat.clone(), shifted], &DtwParams::default()).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(0, 2), 12.0);
        assert_eq!(m.get(1, 2), 12.0);

        // with shape, the banded answer equals the banded brute-force oracle
        let shaped = [-7.0, -6.8, -6.0, -5.1, -5.0, -4.6, -4.4, -6.0];
        let up: Vec<f64> = shaped.iter().map(|v| v + 1.0).collect();
        let p = DtwParams { band_fraction: 0.1, max_points: 200 };
        let m = pairwise_distance_matrix(&[cycle_from_logs(&shaped), cycle_from_logs(&up)], &p).unwrap();
        assert!((m.get(0, 1) - brute_force_dtw(&shaped, &up, 1)).abs() < 1e-12);
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert_eq!(m.n(), 2);

        assert_eq!(
            pairwise_distance_matrix(&[flat], &full()),
            Err(DistanceError::InsufficientCycles(1))
        );
    }

    #[test]
    fn medoids_rank_central_members_first() {
        // row sums: 26.05, 25.45, 117.6, 25.3, 25.25
        let seqs = vec![vec![0.0; 5], vec![0.1; 5], vec![5.0; 5], vec![0.05; 5], vec![0.06; 5]];
        let m = pairwise_sequences(&seqs, &full()).unwrap();
        assert_eq!(medoid_ranking(&m, 2), vec![4, 3]);
    }

    fn seq() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-8.0f64..0.0, 1..50)
    }

    proptest! {
        #[test]
        fn dtw_metric_like_properties(a in seq(), b in seq(), k in 1usize..4, alpha in 0.1f64..10.0) {
            let p = DtwParams::default();
            prop_assert_eq!(dtw_distance(&a, &a, &p).unwrap(), 0.0);
            let ab = dtw_distance(&a, &b, &p).unwrap();
            let ba = dtw_distance(&b, &a, &p).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab));
            let dup: Vec<f64> = a.iter().flat_map(|&v| std::iter::repeat(v).take(k)).collect();
            prop_assert_eq!(dtw_distance(&a, &dup, &p).unwrap(), 0.0);
            let sa: Vec<f64> = a.iter().map(|v| v * alpha).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * alpha).collect();
            let scaled = dtw_distance(&sa, &sb, &p).unwrap();
            prop_assert!((scaled - alpha * ab).abs() <= 1e-9 * (1.0 + alpha * ab));
        }

        #[test]
        fn matrix_is_elementwise_dtw(seqs in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 2..20), 2..6)) {
            let p = full();
            let m = pairwise_sequences(&seqs, &p).unwrap();
            for i in 0..seqs.len() {
                prop_assert_eq!(m.get(i, i), 0.0);
                for j in 0..seqs.len() {
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                    if i != j && seqs[i].len() <= 8 && seqs[j].len() <= 8 {
                        let w = seqs[i].len().max(seqs[j].len());
                        let want = brute_force_dtw(&seqs[i], &seqs[j], w);
                        prop_assert!((m.get(i, j) - want).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
