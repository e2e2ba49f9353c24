//! Dense decompositions on top of faer.

use faer::{Mat, Side};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::util::seeded_rng;

pub(crate) fn to_mat(m: &Array2<f64>) -> Mat<f64> {
    let (r, c) = m.dim();
    Mat::from_fn(r, c, |i, j| m[[i, j]])
}

pub(crate) fn from_mat(m: &Mat<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD with singular values in descending order.
///
/// Each left singular vector is flipped (together with its right partner)
/// so that its largest-magnitude entry is nonnegative, which makes the
/// factors deterministic up to ties in magnitude.
pub struct Svd {
    pub u: Mat<f64>,
    pub sigma: Vec<f64>,
    pub v_t: Mat<f64>,
}

pub fn svd(m: &Mat<f64>) -> Result<Svd> {
    if m.nrows() == 0 || m.ncols() == 0 {
        let k = m.nrows().min(m.ncols());
        return Ok(Svd {
            u: Mat::zeros(m.nrows(), k),
            sigma: Vec::new(),
            v_t: Mat::zeros(k, m.ncols()),
        });
    }
    let dec = m
        .thin_svd()
        .map_err(|e| Error::Degenerate(format!("SVD did not converge: {e:?}")))?;
    let s = dec.S().column_vector();
    let sigma: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    Ok(fix_signs(Svd {
        u: dec.U().to_owned(),
        sigma,
        v_t: dec.V().transpose().to_owned(),
    }))
}

/// `m^power` for a symmetric positive semi-definite matrix. Eigenvalues
/// below `rel_eps * max_eigenvalue` are treated as zero (pseudo-inverse
/// semantics for negative powers).
pub fn sym_power(m: &Mat<f64>, power: f64, rel_eps: f64) -> Result<Mat<f64>> {
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Degenerate(format!("eigendecomposition failed: {e:?}")))?;
    let vals = eig.S().column_vector();
    let n = vals.nrows();
    let max = (0..n).map(|i| vals[i]).fold(0.0f64, f64::max);
    let cutoff = max * rel_eps;
    let scaled: Vec<f64> = (0..n)
        .map(|i| if vals[i] > cutoff { vals[i].powf(power) } else { 0.0 })
        .collect();
    let u = eig.U();
    let weighted = Mat::from_fn(u.nrows(), n, |i, j| u[(i, j)] * scaled[j]);
    Ok(&weighted * u.transpose())
}

/// Linear operator access needed by the randomized range finder.
pub trait Operator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `self * x`
    fn apply(&self, x: &Mat<f64>) -> Mat<f64>;
    /// `self^T * x`
    fn apply_t(&self, x: &Mat<f64>) -> Mat<f64>;
}

fn orthonormalize(m: &Mat<f64>) -> Mat<f64> {
    m.qr().compute_thin_Q()
}

/// Randomized truncated SVD (range finder with subspace iteration) for
/// operators too large to decompose densely. Returns the top `k`
/// components.
pub fn randomized_svd<O: Operator>(op: &O, k: usize, oversample: usize, power_iters: usize, seed: u64) -> Result<Svd> {
    let l = (k + oversample).min(op.nrows()).min(op.ncols());
    let mut rng = seeded_rng(seed, 0);
    let omega = Mat::from_fn(op.ncols(), l, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = orthonormalize(&op.apply(&omega));
    for _ in 0..power_iters {
        let z = orthonormalize(&op.apply_t(&q));
        q = orthonormalize(&op.apply(&z));
    }
    // B = Q^T M, computed as (M^T Q)^T
    let b = op.apply_t(&q).transpose().to_owned();
    let small = svd(&b)?;
    let k = k.min(small.sigma.len());
    let u = &q * small.u.subcols(0, k);
    // the lifted factors need the sign convention re-applied
    Ok(fix_signs(Svd {
        u,
        sigma: small.sigma[..k].to_vec(),
        v_t: small.v_t.subrows(0, k).to_owned(),
    }))
}

fn fix_signs(mut s: Svd) -> Svd {
    for j in 0..s.u.ncols() {
        let mut pivot = 0.0f64;
        for i in 0..s.u.nrows() {
            let x = s.u[(i, j)];
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        if pivot < 0.0 {
            for i in 0..s.u.nrows() {
                s.u[(i, j)] = -s.u[(i, j)];
            }
            for c in 0..s.v_t.ncols() {
                s.v_t[(j, c)] = -s.v_t[(j, c)];
            }
        }
    }
    s
}

#[cfg(test)]
pub(crate) fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(Mat<f64>);

    impl Operator for Dense {
        fn nrows(&self) -> usize {
            self.0.nrows()
        }
        fn ncols(&self) -> usize {
            self.0.ncols()
        }
        fn apply(&self, x: &Mat<f64>) -> Mat<f64> {
            &self.0 * x
        }
        fn apply_t(&self, x: &Mat<f64>) -> Mat<f64> {
            self.0.transpose() * x
        }
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
        let mut rng = seeded_rng(seed, 0);
        Mat::from_fn(rows, cols, |_, _| rng.random::<f64>() - 0.5)
    }

    fn recompose(s: &Svd) -> Mat<f64> {
        let scaled = Mat::from_fn(s.u.nrows(), s.sigma.len(), |i, j| s.u[(i, j)] * s.sigma[j]);
        &scaled * &s.v_t
    }

    #[test]
    fn svd_sorted_and_reconstructs() {
        for (r, c) in [(7, 5), (5, 7), (120, 90)] {
            let m = random(r, c, 1);
            let s = svd(&m).unwrap();
            for w in s.sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
            assert!(max_abs_diff(&recompose(&s), &m) < 1e-12);
        }
    }

    #[test]
    fn low_rank_reconstructs() {
        let m = &random(120, 6, 3) * &random(6, 90, 4);
        let s = svd(&m).unwrap();
        assert!(max_abs_diff(&recompose(&s), &m) < 1e-12);
    }

    #[test]
    fn sym_power_inverts_square_root() {
        let x = random(20, 4, 2);
        let cov = x.transpose() * &x;
        let half = sym_power(&cov, 0.5, 1e-12).unwrap();
        let inv_half = sym_power(&cov, -0.5, 1e-12).unwrap();
        assert!(max_abs_diff(&(&half * &half), &cov) < 1e-10);
        assert!(max_abs_diff(&(&half * &inv_half), &Mat::identity(4, 4)) < 1e-10);
    }

    #[test]
    fn randomized_matches_dense_on_low_rank() {
        let m = &random(120, 6, 3) * &random(6, 90, 4);
        let exact = svd(&m).unwrap();
        let approx = randomized_svd(&Dense(m), 4, 8, 2, 7).unwrap();
        for i in 0..4 {
            assert!((exact.sigma[i] - approx.sigma[i]).abs() < 1e-8 * exact.sigma[0]);
            for r in 0..120 {
                assert!((exact.u[(r, i)] - approx.u[(r, i)]).abs() < 1e-8);
            }
        }
    }
}
