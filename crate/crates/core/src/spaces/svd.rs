use faer::Mat;
use ndarray::Array2;

use super::{CooccurrenceMatrix, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, Operator, Svd};

// Above this many cells the matrix is factorized with the randomized
// range finder instead of a dense decomposition.
const DENSE_CELL_LIMIT: usize = 4_000_000;
const OVERSAMPLE: usize = 10;
const POWER_ITERS: usize = 4;
// Singular values below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

struct SparseOp<'a>(&'a CooccurrenceMatrix);

impl Operator for SparseOp<'_> {
    fn nrows(&self) -> usize {
        self.0.n_rows()
    }

    fn ncols(&self) -> usize {
        self.0.n_cols()
    }

    fn apply(&self, x: &Mat<f64>) -> Mat<f64> {
        let mut out = Mat::zeros(self.nrows(), x.ncols());
        for (i, row) in self.0.rows().iter().enumerate() {
            for &(j, v) in row {
                for c in 0..x.ncols() {
                    out[(i, c)] += v * x[(j as usize, c)];
                }
            }
        }
        out
    }

    fn apply_t(&self, x: &Mat<f64>) -> Mat<f64> {
        let mut out = Mat::zeros(self.ncols(), x.ncols());
        for (i, row) in self.0.rows().iter().enumerate() {
            for &(j, v) in row {
                for c in 0..x.ncols() {
                    out[(j as usize, c)] += v * x[(i, c)];
                }
            }
        }
        out
    }
}

fn sparse_to_dense(m: &CooccurrenceMatrix) -> Mat<f64> {
    let mut out = Mat::zeros(m.n_rows(), m.n_cols());
    for (i, row) in m.rows().iter().enumerate() {
        for &(j, v) in row {
            out[(i, j as usize)] = v;
        }
    }
    out
}

/// Truncated SVD embedding `U_d * Sigma_d^p`.
///
/// With `p = 0` the result is `U_d`, whose columns are orthonormal.
/// Components beyond the numerical rank of the matrix (including any
/// `d > min(rows, cols)`) are zero columns.
pub fn svd_reduce(matrix: &CooccurrenceMatrix, d: usize, p: f64) -> Result<EmbeddingMatrix> {
    if d == 0 {
        return Err(Error::InvalidParameter("SVD dimensionality must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("eigenvalue weighting p must lie in [0, 1], got {p}")));
    }
    if matrix.rows().iter().flatten().any(|e| !e.1.is_finite()) {
        return Err(Error::NonFinite("SVD input".into()));
    }
    let (n, m) = (matrix.n_rows(), matrix.n_cols());
    let k = d.min(n).min(m);

    let Svd { u, sigma, .. } = if k == 0 {
        Svd {
            u: Mat::zeros(n, 0),
            sigma: Vec::new(),
            v_t: Mat::zeros(0, m),
        }
    } else if n * m <= DENSE_CELL_LIMIT {
        linalg::svd(&sparse_to_dense(matrix))?
    } else {
        linalg::randomized_svd(&SparseOp(matrix), k, OVERSAMPLE, POWER_ITERS, 0)?
    };

    let top = sigma.iter().copied().fold(0.0, f64::max);
    let mut out = Array2::zeros((n, d));
    for c in 0..k.min(sigma.len()) {
        let s = sigma[c];
        if top == 0.0 || s <= top * RANK_TOL {
            continue;
        }
        let weight = if p == 0.0 { 1.0 } else { s.powf(p) };
        for r in 0..n {
            out[[r, c]] = u[(r, c)] * weight;
        }
    }
    EmbeddingMatrix::new(matrix.shared_row_vocab(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::from_entries((0..n).map(|i| (format!("w{i}"), 1)))
    }

    fn diag(values: &[f64]) -> CooccurrenceMatrix {
        let rows = values.iter().enumerate().map(|(i, &v)| vec![(i as u32, v)]).collect();
        CooccurrenceMatrix::from_rows(rows, vocab(values.len()), vocab(values.len())).unwrap()
    }

    #[test]
    fn diagonal_rank_one() {
        let e = svd_reduce(&diag(&[3.0, 1.0]), 1, 1.0).unwrap();
        assert!((e.row(0)[0] - 3.0).abs() < 1e-12);
        assert!(e.row(1)[0].abs() < 1e-12);
        // rank-1 reconstruction U_1 S_1 V_1^T of diag(3,1) misses the 1
        let m = e.matrix();
        let recon = [[m[[0, 0]], 0.0], [m[[1, 0]], 0.0]];
        let err: f64 = (recon[0][0] - 3.0).powi(2) + recon[0][1].powi(2) + recon[1][0].powi(2) + (recon[1][1] - 1.0).powi(2);
        assert!((err.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pads_beyond_rank() {
        let e = svd_reduce(&diag(&[2.0, 0.0, 1.0]), 5, 0.0).unwrap();
        assert_eq!(e.dim(), 5);
        for c in 2..5 {
            for r in 0..3 {
                assert_eq!(e.matrix()[[r, c]], 0.0);
            }
        }
    }

    #[test]
    fn rejects_zero_dim() {
        assert!(svd_reduce(&diag(&[1.0]), 0, 0.0).is_err());
        assert!(svd_reduce(&diag(&[1.0]), 1, 2.0).is_err());
    }

    #[test]
    fn sparse_operator_agrees_with_dense() {
        let rows = vec![vec![(0, 1.0), (2, 2.0)], vec![(1, 3.0)], vec![]];
        let m = CooccurrenceMatrix::from_rows(rows, vocab(3), vocab(3)).unwrap();
        let dense = sparse_to_dense(&m);
        let x = Mat::from_fn(3, 2, |i, j| (i * 2 + j) as f64 - 1.5);
        let op = SparseOp(&m);
        assert!(linalg::max_abs_diff(&op.apply(&x), &(&dense * &x)) < 1e-15);
        assert!(linalg::max_abs_diff(&op.apply_t(&x), &(dense.transpose() * &x)) < 1e-15);
    }
}
