//! Principal components of a multivariate sample on its covariance or
//! correlation matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaMode {
    Covariance,
    Correlation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub mode: PcaMode,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// `loadings[v][c]`: weight of variable `v` in component `c`.
    pub loadings: Vec<Vec<f64>>,
    pub prop_var: Vec<f64>,
    pub cum_prop: Vec<f64>,
    /// The covariance or correlation matrix that was decomposed.
    pub matrix: Vec<Vec<f64>>,
}

impl PcaResult {
    /// Component `c` as a vector over variables.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.loadings.iter().map(|row| row[c]).collect()
    }
}

/// Sample covariance (divisor `n - 1`) or correlation of the columns of `rows`.
pub fn dispersion_matrix(rows: &[Vec<f64>], mode: PcaMode) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if p == 0 {
        return Err(Error::DimensionMismatch("no variables".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::LengthMismatch(bad.len(), p));
    }
    if n < 5 {
        return Err(Error::DegenerateSample(format!("PCA needs at least 5 observations, got {n}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite observation".into()));
    }
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let means = x.row_mean();
    let centered = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    if mode == PcaMode::Correlation {
        let sd: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
        if let Some(j) = sd.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::DegenerateColumn(format!("column {j} has zero variance")));
        }
        cov = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { cov[(i, j)] / (sd[i] * sd[j]) });
    }
    Ok(cov)
}

/// Eigendecomposition with components in descending eigenvalue order; each
/// component is signed so its largest-magnitude loading is positive.
pub fn pca(rows: &[Vec<f64>], mode: PcaMode) -> Result<PcaResult> {
    let m = dispersion_matrix(rows, mode)?;
    let p = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let mut loadings = vec![vec![0.0; p]; p];
    for (c, &k) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        let lead = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for v in 0..p {
            loadings[v][c] = sign * col[v];
        }
    }
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSample("all columns are constant".into()));
    }
    let prop_var: Vec<f64> = eigenvalues.iter().map(|e| e / total).collect();
    let cum_prop = prop_var
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let matrix = (0..p).map(|i| (0..p).map(|j| m[(i, j)]).collect()).collect();
    Ok(PcaResult { mode, eigenvalues, loadings, prop_var, cum_prop, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Vec<f64>> {
        vec![
            vec![2.0, 4.1, 0.3, 7.0],
            vec![1.0, 2.2, -0.5, 6.5],
            vec![3.0, 5.9, 0.1, 8.1],
            vec![4.0, 8.3, 0.9, 7.2],
            vec![5.0, 9.8, -0.2, 6.9],
            vec![6.0, 12.1, 0.4, 7.7],
        ]
    }

    #[test]
    fn loadings_are_orthonormal() {
        let r = pca(&sample(), PcaMode::Covariance).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = (0..4).map(|v| r.loadings[v][a] * r.loadings[v][b]).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        assert!(r.prop_var.windows(2).all(|w| w[0] >= w[1]));
        assert!((r.cum_prop[3] - 1.0).abs() < 1e-12);
        assert!(r.prop_var[0] > 0.95);
    }

    #[test]
    fn correlation_trace_is_dimension() {
        let r = pca(&sample(), PcaMode::Correlation).unwrap();
        assert!((r.eigenvalues.iter().sum::<f64>() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn constant_column_rejected_in_correlation_mode() {
        let mut s = sample();
        for row in &mut s {
            row[2] = 1.0;
        }
        assert!(matches!(pca(&s, PcaMode::Correlation), Err(Error::DegenerateColumn(_))));
        assert!(pca(&s, PcaMode::Covariance).is_ok());
    }
}
