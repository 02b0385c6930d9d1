//! Thin sequential wrappers around faer.
//!
//! Replications are parallelized one level up, so every dense kernel here
//! runs with `Par::Seq`. That also keeps results bit-identical regardless of
//! the thread count.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::{Accum, Mat, MatRef, Par};

use crate::error::{Error, Result};

/// `alpha * lhs * rhs'`.
pub(crate) fn mul_transpose(lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>, alpha: f64) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(lhs.nrows(), rhs.nrows());
    faer::linalg::matmul::matmul(
        out.as_mut(),
        Accum::Replace,
        lhs,
        rhs.transpose(),
        alpha,
        Par::Seq,
    );
    out
}

/// `alpha * lhs * rhs`.
pub(crate) fn mul(lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>, alpha: f64) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(lhs.nrows(), rhs.ncols());
    faer::linalg::matmul::matmul(out.as_mut(), Accum::Replace, lhs, rhs, alpha, Par::Seq);
    out
}

/// Singular values in nonincreasing order.
pub(crate) fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    let mut s = faer::diag::Diag::<f64>::zeros(m.min(n));
    let mut buf = MemBuffer::new(svd::svd_scratch::<f64>(
        m,
        n,
        ComputeSvdVectors::No,
        ComputeSvdVectors::No,
        Par::Seq,
        Default::default(),
    ));
    svd::svd(
        a,
        s.as_mut(),
        None,
        None,
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    Ok(s.column_vector().iter().copied().collect())
}

/// Singular values and the thin matrix of left singular vectors.
pub(crate) fn left_svd(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut s = faer::diag::Diag::<f64>::zeros(k);
    let mut u = Mat::<f64>::zeros(m, k);
    let mut buf = MemBuffer::new(svd::svd_scratch::<f64>(
        m,
        n,
        ComputeSvdVectors::Thin,
        ComputeSvdVectors::No,
        Par::Seq,
        Default::default(),
    ));
    svd::svd(
        a,
        s.as_mut(),
        Some(u.as_mut()),
        None,
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    Ok((s.column_vector().iter().copied().collect(), u))
}

/// Orthonormal basis of the column space of a full-rank tall matrix
/// (the `Q` factor of a thin QR decomposition, with signs fixed so that
/// `R` has a nonnegative diagonal).
pub(crate) fn orthonormal_columns(a: MatRef<'_, f64>) -> Mat<f64> {
    // modified Gram-Schmidt, run twice for stability
    let (m, k) = a.shape();
    let mut q = a.to_owned();
    for _pass in 0..2 {
        for j in 0..k {
            for i in 0..j {
                let dot: f64 = (0..m).map(|r| q[(r, i)] * q[(r, j)]).sum();
                for r in 0..m {
                    let v = q[(r, i)];
                    q[(r, j)] -= dot * v;
                }
            }
            let norm = (0..m).map(|r| q[(r, j)] * q[(r, j)]).sum::<f64>().sqrt();
            for r in 0..m {
                q[(r, j)] /= norm;
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_loops() {
        let a = Mat::<f64>::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        let b = Mat::<f64>::from_fn(2, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let c = mul_transpose(a.as_ref(), b.as_ref(), 0.5);
        for i in 0..3 {
            for j in 0..2 {
                let want: f64 = 0.5 * (0..4).map(|k| a[(i, k)] * b[(j, k)]).sum::<f64>();
                assert!((c[(i, j)] - want).abs() < 1e-12);
            }
        }
        let d = mul(a.as_ref(), b.transpose(), 1.0);
        for i in 0..3 {
            for j in 0..2 {
                let want: f64 = (0..4).map(|k| a[(i, k)] * b[(j, k)]).sum::<f64>();
                assert!((d[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn svd_of_diagonal() {
        let a = Mat::<f64>::from_fn(3, 3, |i, j| if i == j { [1.0, -3.0, 2.0][i] } else { 0.0 });
        let s = singular_values(a.as_ref()).unwrap();
        assert_eq!(s.len(), 3);
        for (got, want) in s.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let (s2, u) = left_svd(a.as_ref()).unwrap();
        assert_eq!(s, s2);
        assert!((u[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gram_schmidt_is_orthonormal() {
        let a = Mat::<f64>::from_fn(5, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 + 0.1 * j as f64);
        let q = orthonormal_columns(a.as_ref());
        let g = mul(q.transpose(), q.as_ref(), 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}
