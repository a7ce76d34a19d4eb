//! Small dense complex linear-algebra helpers built on `faer`.

use faer::linalg::solvers::DenseSolveCore;
use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64;

pub type CMatrix = Mat<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity(k: usize) -> CMatrix {
    Mat::from_fn(k, k, |i, j| if i == j { ONE } else { ZERO })
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    Mat::zeros(rows, cols)
}

/// Builds a complex matrix from real row-major entries.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let ncols = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(rows.len(), ncols, |i, j| Complex64::new(rows[i][j], 0.0))
}

pub fn from_rows(rows: &[Vec<Complex64>]) -> CMatrix {
    let ncols = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

pub fn to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn scale(m: &CMatrix, s: Complex64) -> CMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.adjoint().to_owned()
}

/// Frobenius norm.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm_l2()
}

pub fn is_finite(m: &CMatrix) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s = m
        .singular_values()
        .expect("singular value decomposition did not converge");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with threshold `rel * sigma_max`.
pub fn numerical_rank(m: &CMatrix, rel: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel * smax).count(),
        _ => 0,
    }
}

/// Reciprocal 2-norm condition number `sigma_min / sigma_max` (0 for a zero matrix).
pub fn inverse_condition(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Orthonormal bases `(range, null)` of the right singular subspaces of `m`.
///
/// `range` spans the conjugated row space of `m`, `null` its kernel; together
/// they split `C^ncols` orthogonally.
pub fn row_and_null_space(m: &CMatrix, rel: f64) -> (CMatrix, CMatrix) {
    let n = m.ncols();
    if m.nrows() == 0 {
        return (zeros(n, 0), identity(n));
    }
    let svd = m.svd().expect("singular value decomposition did not converge");
    let s = svd.S().column_vector();
    let smax = (0..s.nrows()).map(|i| s[i].re).fold(0.0, f64::max);
    let rank = if smax > 0.0 {
        (0..s.nrows()).filter(|&i| s[i].re > rel * smax).count()
    } else {
        0
    };
    let v = svd.V();
    let range = Mat::from_fn(n, rank, |i, j| v[(i, j)]);
    let null = Mat::from_fn(n, n - rank, |i, j| v[(i, rank + j)]);
    (range, null)
}

/// Sine of the largest principal angle between the column spans of two
/// orthonormal bases. Returns 1 when the dimensions differ.
pub fn max_principal_angle_sin(q1: &CMatrix, q2: &CMatrix) -> f64 {
    if q1.ncols() != q2.ncols() || q1.nrows() != q2.nrows() {
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let proj = q1 * (q1.adjoint() * q2);
    let resid = q2 - &proj;
    spectral_norm(&resid).min(1.0)
}

/// Solves `a x = b` by partial-pivoting LU. No singularity check.
pub fn solve(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.partial_piv_lu().solve(b)
}

pub fn inverse(a: &CMatrix) -> CMatrix {
    a.partial_piv_lu().inverse()
}

/// `‖U U* − I‖_F`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let prod = u * u.adjoint();
    frobenius(&(&prod - identity(u.nrows())))
}

/// `‖X − X*‖_F`.
pub fn hermitian_defect(x: &CMatrix) -> f64 {
    frobenius(&(x - x.adjoint()))
}

/// Horizontal concatenation `[a | b]`.
pub fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows());
    let ca = a.ncols();
    Mat::from_fn(a.nrows(), ca + b.ncols(), |i, j| {
        if j < ca {
            a[(i, j)]
        } else {
            b[(i, j - ca)]
        }
    })
}

/// Eigenvalues of a general square complex matrix.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.eigenvalues().expect("eigenvalue iteration did not converge")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_identity_block() {
        let m = hstack(&identity(3), &zeros(3, 3));
        assert_eq!(numerical_rank(&m, 1e-12), 3);
        assert_eq!(numerical_rank(&zeros(2, 4), 1e-12), 0);
    }

    #[test]
    fn row_and_null_spaces_are_complementary() {
        let m = from_real_rows(&[&[1.0, -1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 1.0]]);
        let (range, null) = row_and_null_space(&m, 1e-12);
        assert_eq!(range.ncols(), 2);
        assert_eq!(null.ncols(), 2);
        let kernel_image = &m * &null;
        assert!(frobenius(&kernel_image) < 1e-14);
        let cross = range.adjoint() * &null;
        assert!(frobenius(&cross.to_owned()) < 1e-14);
    }

    #[test]
    fn principal_angle_detects_distinct_spans() {
        let e = identity(3);
        let a = Mat::from_fn(3, 1, |i, _| e[(i, 0)]);
        let b = Mat::from_fn(3, 1, |i, _| e[(i, 1)]);
        assert!((max_principal_angle_sin(&a, &b) - 1.0).abs() < 1e-14);
        assert!(max_principal_angle_sin(&a, &a) < 1e-15);
    }
}
