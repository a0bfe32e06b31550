//! Small dense linear algebra layer: Cholesky factorization for SPD
//! matrices and a power-method operator norm for symmetric PSD matrices.
//! Dimensions here are at most a few hundred, so simple O(d^3) routines
//! are both adequate and easy to keep deterministic.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Lower-triangular Cholesky factor of an SPD matrix.
pub fn cholesky(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.ncols() });
    }
    let mut l = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solves L y = b for lower-triangular L.
pub fn forward_solve(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let d = l.nrows();
    let mut y = Array1::<f64>::zeros(d);
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Solves L^T x = y for lower-triangular L.
pub fn backward_solve(l: &ArrayView2<f64>, y: &ArrayView1<f64>) -> Array1<f64> {
    let d = l.nrows();
    let mut x = Array1::<f64>::zeros(d);
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in (i + 1)..d {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let d = a.nrows();
    let l = cholesky(a)?;
    let mut inv = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut e = Array1::<f64>::zeros(d);
        e[j] = 1.0;
        let y = forward_solve(&l.view(), &e.view());
        let x = backward_solve(&l.view(), &y.view());
        inv.column_mut(j).assign(&x);
    }
    // Symmetrize to wash out round-off.
    for i in 0..d {
        for j in 0..i {
            let m = 0.5 * (inv[[i, j]] + inv[[j, i]]);
            inv[[i, j]] = m;
            inv[[j, i]] = m;
        }
    }
    Ok(inv)
}

/// |L^{-1}(x - m)|^2, the quadratic form (x-m)^T A^{-1} (x-m) given A = L L^T.
pub fn mahalanobis_sq(l: &ArrayView2<f64>, x: &[f64], m: &[f64]) -> f64 {
    let d = l.nrows();
    let diff = Array1::from_iter((0..d).map(|i| x[i] - m[i]));
    let y = forward_solve(l, &diff.view());
    y.iter().map(|v| v * v).sum()
}

/// Operator norm of a symmetric PSD matrix by power iteration with a
/// deterministic start vector. Relative tolerance on the Rayleigh quotient.
pub fn opnorm_psd(a: &ArrayView2<f64>, rel_tol: f64, max_iter: usize) -> f64 {
    top_eigenpair_psd(a, rel_tol, max_iter).0
}

/// Largest eigenvalue of a symmetric PSD matrix together with a unit vector
/// attaining it, by the same deterministic power iteration as `opnorm_psd`.
///
/// The start vector has strictly increasing positive entries, which is not
/// orthogonal to the top eigenspace for any matrix arising here; a restart
/// from the dominant diagonal direction guards the contrived cases.
pub fn top_eigenpair_psd(
    a: &ArrayView2<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> (f64, Array1<f64>) {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "top_eigenpair_psd needs a square matrix");
    if d == 0 {
        return (0.0, Array1::zeros(0));
    }
    if d == 1 {
        return (a[[0, 0]].max(0.0), Array1::from_elem(1, 1.0));
    }
    let mut e0 = Array1::<f64>::zeros(d);
    e0[0] = 1.0;
    let max_diag = (0..d).map(|i| a[[i, i]]).fold(f64::NEG_INFINITY, f64::max);
    if max_diag <= 0.0 {
        return (0.0, e0);
    }
    let start = Array1::from_iter((0..d).map(|i| 1.0 + (i as f64) / (d as f64)));
    let (lam, v) = power_iterate(a, start, rel_tol, max_iter);
    if lam + rel_tol * max_diag >= max_diag {
        return (lam, v);
    }
    // Start vector was (numerically) deficient in the top eigendirection.
    let i_max = (0..d).map(|i| (i, a[[i, i]])).fold((0, f64::NEG_INFINITY), |acc, c| {
        if c.1 > acc.1 {
            c
        } else {
            acc
        }
    });
    let mut e = Array1::<f64>::zeros(d);
    e[i_max.0] = 1.0;
    let (lam2, v2) = power_iterate(a, e, rel_tol, max_iter);
    if lam2 > lam {
        (lam2, v2)
    } else {
        (lam, v)
    }
}

fn power_iterate(
    a: &ArrayView2<f64>,
    mut v: Array1<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> (f64, Array1<f64>) {
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        return (0.0, v);
    }
    v /= norm;
    let mut lam_prev = 0.0;
    for _ in 0..max_iter {
        let mut w = a.dot(&v);
        let lam = v.dot(&w).max(0.0);
        let wn = w.dot(&w).sqrt();
        if wn <= f64::MIN_POSITIVE {
            return (0.0, v);
        }
        w /= wn;
        v = w;
        if (lam - lam_prev).abs() <= rel_tol * lam.max(f64::MIN_POSITIVE) {
            return (lam, v);
        }
        lam_prev = lam;
    }
    (lam_prev, v)
}

/// Weighted barycenter of row-points. Weights are assumed normalized.
pub fn weighted_mean(points: &ArrayView2<f64>, w: &[f64]) -> Array1<f64> {
    let (n, d) = (points.nrows(), points.ncols());
    let mut m = Array1::<f64>::zeros(d);
    for i in 0..n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            m[j] += wi * points[[i, j]];
        }
    }
    m
}

/// Weighted covariance of row-points about the supplied mean (population
/// form: the covariance of the weighted atoms themselves).
pub fn weighted_cov(points: &ArrayView2<f64>, w: &[f64], mean: &ArrayView1<f64>) -> Array2<f64> {
    let (n, d) = (points.nrows(), points.ncols());
    let mut c = Array2::<f64>::zeros((d, d));
    let mut diff = vec![0.0; d];
    for i in 0..n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            diff[j] = points[[i, j]] - mean[j];
        }
        for j in 0..d {
            let wdj = wi * diff[j];
            for k in j..d {
                c[[j, k]] += wdj * diff[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            c[[j, k]] = c[[k, j]];
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn cholesky_roundtrip() {
        let a = array![[4.0, 2.0, 0.5], [2.0, 5.0, 1.0], [0.5, 1.0, 3.0]];
        let l = cholesky(&a.view()).unwrap();
        let back = l.dot(&l.t());
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(back[[i, j]], a[[i, j]], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            cholesky(&a.view()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn spd_inverse_matches_identity() {
        let a = array![[2.0, 0.3], [0.3, 1.0]];
        let inv = spd_inverse(&a.view()).unwrap();
        let prod = a.dot(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[[i, j]] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn opnorm_of_diagonal_is_max_entry() {
        let a = array![[0.25, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 1.0]];
        let lam = opnorm_psd(&a.view(), 1e-10, 10_000);
        assert_relative_eq!(lam, 4.0, max_relative = 1e-8);
    }

    #[test]
    fn opnorm_handles_antisymmetric_top_eigvec() {
        // Top eigenvector (1, -1)/sqrt(2) is orthogonal to the all-ones vector;
        // the graded start vector must still find eigenvalue 3.
        let a = array![[2.0, -1.0], [-1.0, 2.0]];
        let lam = opnorm_psd(&a.view(), 1e-10, 10_000);
        assert_relative_eq!(lam, 3.0, max_relative = 1e-7);
    }

    #[test]
    fn weighted_moments_match_closed_form() {
        let pts = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0]];
        let w = [0.25, 0.25, 0.5];
        let m = weighted_mean(&pts.view(), &w);
        assert_relative_eq!(m[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(m[1], 1.0, epsilon = 1e-15);
        let c = weighted_cov(&pts.view(), &w, &m.view());
        assert_relative_eq!(c[[0, 0]], 0.5, epsilon = 1e-15);
        assert_relative_eq!(c[[1, 1]], 1.0, epsilon = 1e-15);
        assert_relative_eq!(c[[0, 1]], 0.0, epsilon = 1e-15);
    }
}
