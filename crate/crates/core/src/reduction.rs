//! PCA of distance-matrix rows down to the dimensions that hold a target
//! share of the variance.
//!
//! Components come from the eigen-decomposition of the centered scatter
//! matrix `A^T A`.

use nalgebra::{DMatrix, SymmetricEigen};

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.99;
pub const DEFAULT_MAX_DIMS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub n: usize,
    pub dims: usize,
    /// Row-major `n x dims`.
    pub coords: Vec<Vec<f64>>,
    /// Ratios of the retained components, descending.
    pub explained_variance_ratio: Vec<f64>,
    /// Column means removed before projection.
    pub mean: Vec<f64>,
    /// Unit loading vectors of the retained components.
    pub components: Vec<Vec<f64>>,
}

impl Embedding {
    pub fn retained_ratio(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReductionError {
    #[error("PCA needs at least 2 rows, got {0}")]
    DegenerateInput(usize),
    #[error("ragged input: row {row} has {got} columns, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("variance target {0} outside (0, 1]")]
    BadTarget(f64),
}

/// [`pca_fit_transform_capped`] with the default dimension cap of 50.
pub fn pca_fit_transform(rows: &[Vec<f64>], variance_target: f64) -> Result<Embedding, ReductionError> {
    pca_fit_transform_capped(rows, variance_target, DEFAULT_MAX_DIMS)
}

/// Centers the columns, diagonalizes the scatter matrix and keeps the
/// smallest number of leading components whose cumulative variance ratio
/// reaches `variance_target`, never more than `min(n - 1, max_dims)`.
///
/// Each component's sign is chosen so its largest-magnitude loading is
/// positive. All-constant input yields one zero coordinate per row with a
/// ratio of `[1.0]`.
pub fn pca_fit_transform_capped(
    rows: &[Vec<f64>],
    variance_target: f64,
    max_dims: usize,
) -> Result<Embedding, ReductionError> {
    let n = rows.len();
    if n < 2 {
        return Err(ReductionError::DegenerateInput(n));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(ReductionError::BadTarget(variance_target));
    }
    let m = rows[0].len();
    for (row, r) in rows.iter().enumerate() {
        if r.len() != m {
            return Err(ReductionError::Ragged { row, got: r.len(), expected: m });
        }
    }

    let mean: Vec<f64> = (0..m)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, m, |i, j| rows[i][j] - mean[j]);
    let total_ss: f64 = centered.iter().map(|v| v * v).sum();
    let scale = rows.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m == 0 || total_ss <= (f64::EPSILON * scale).powi(2) * (n * m) as f64 {
        return Ok(Embedding {
            n,
            dims: 1,
            coords: vec![vec![0.0]; n],
            explained_variance_ratio: vec![1.0],
            mean,
            components: vec![vec![0.0; m]],
        });
    }

    // eigen-decomposition of the scatter matrix; nalgebra's SVD can stall on
    // rank-deficient input
    let eig = SymmetricEigen::new(centered.transpose() * &centered);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let variances: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let total: f64 = variances.iter().sum();

    let cap = (n - 1).min(max_dims).min(order.len()).max(1);
    let mut dims = cap;
    let mut cum = 0.0;
    for (k, v) in variances.iter().enumerate().take(cap) {
        cum += v / total;
        if cum >= variance_target - 1e-12 {
            dims = k + 1;
            break;
        }
    }

    let mut components = Vec::with_capacity(dims);
    for &k in order.iter().take(dims) {
        let mut comp: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = comp
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            comp.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(comp);
    }
    let coords = (0..n)
        .map(|i| {
            components
                .iter()
                .map(|c| centered.row(i).iter().zip(c).map(|(x, l)| x * l).sum())
                .collect()
        })
        .collect();

    Ok(Embedding {
        n,
        dims,
        coords,
        explained_variance_ratio: variances[..dims].iter().map(|v| v / total).collect(),
        mean,
        components,
    })
}
