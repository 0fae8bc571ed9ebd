//! Small dense linear-algebra helpers shared by the model-building stages.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold used for every numerical-rank decision.
pub const RANK_RTOL: f64 = 1e-10;

/// Absolute cutoff for a matrix of the given shape whose largest singular value is `sigma_max`.
pub fn rank_threshold(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * RANK_RTOL
}

/// Number of singular values strictly above [`rank_threshold`].
pub fn numerical_rank(singular_values: &DVector<f64>, rows: usize, cols: usize) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_threshold(rows, cols, smax);
    singular_values.iter().filter(|&&s| s > tol).count()
}

/// Moore-Penrose pseudo-inverse with the crate-wide rank threshold.
/// Returns the inverse and the numerical rank that was used.
pub fn pinv(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return (DMatrix::zeros(c, r), 0);
    }
    let svd = m.clone().svd(true, true);
    let rank = numerical_rank(&svd.singular_values, r, c);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(c, r);
    // singular values from nalgebra are sorted in decreasing order
    let smax = svd.singular_values.max();
    let tol = rank_threshold(r, c, smax);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            out += (vt.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    (out, rank)
}

/// Condition number in the 2-norm (infinite for rank-deficient input).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Row-wise rank-revealing LQ factorization `X ≈ L·Qᵀ`.
///
/// Rows are orthogonalized in order (classical Gram-Schmidt with one
/// reorthogonalization pass). A row whose residual falls below the rank
/// threshold contributes no new direction, so `L` is lower-echelon with as
/// many columns as the numerical row rank. When `X` has full row rank, `L` is
/// square lower-triangular with a positive diagonal.
#[derive(Debug, Clone)]
pub struct RowFactor {
    /// rows(X) × rank
    pub lower: DMatrix<f64>,
    /// cols(X) × rank, orthonormal columns
    pub basis: DMatrix<f64>,
}

pub fn lq_rank_revealing(x: &DMatrix<f64>) -> RowFactor {
    let (rows, m) = x.shape();
    let scale = (0..rows).map(|i| x.row(i).norm()).fold(0.0_f64, f64::max);
    let tol = rank_threshold(rows, m, scale);

    let mut basis = DMatrix::<f64>::zeros(m, rows.min(m));
    let mut lower = DMatrix::<f64>::zeros(rows, rows.min(m));
    let mut rank = 0usize;

    for i in 0..rows {
        let mut v: DVector<f64> = x.row(i).transpose();
        let mut coeffs = DVector::<f64>::zeros(rank);
        if rank > 0 {
            for _ in 0..2 {
                let q = basis.columns(0, rank);
                let c = q.tr_mul(&v);
                v -= q * &c;
                coeffs += c;
            }
        }
        lower.view_mut((i, 0), (1, rank)).copy_from(&coeffs.transpose());
        let nrm = v.norm();
        if nrm > tol && rank < basis.ncols() && scale > 0.0 {
            basis.set_column(rank, &(v / nrm));
            lower[(i, rank)] = nrm;
            rank += 1;
        }
    }

    RowFactor {
        lower: lower.columns(0, rank).into_owned(),
        basis: basis.columns(0, rank).into_owned(),
    }
}

/// `X − (X·Q)·Qᵀ` together with the coefficients `X·Q`, for orthonormal `Q`.
pub fn project_out(x: &DMatrix<f64>, basis: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    if basis.ncols() == 0 {
        return (x.clone(), DMatrix::zeros(x.nrows(), 0));
    }
    let coeffs = x * basis;
    let resid = x - &coeffs * basis.transpose();
    (resid, coeffs)
}

/// Left inverse of a full-column-rank matrix. Square lower-triangular input
/// takes the triangular-solve route.
pub fn left_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let (r, c) = m.shape();
    if r == c && is_lower_triangular(m) {
        let id = DMatrix::<f64>::identity(r, r);
        let smax = m.diagonal().abs().max();
        let smin = m.diagonal().abs().min();
        if smin > rank_threshold(r, c, smax) {
            if let Some(inv) = m.solve_lower_triangular(&id) {
                return Ok(inv);
            }
        }
        return Err(Error::RankDeficient(format!("{what} is singular")));
    }
    let (p, rank) = pinv(m);
    if rank < c {
        return Err(Error::RankDeficient(format!(
            "{what} has rank {rank} < {c} columns"
        )));
    }
    Ok(p)
}

pub fn is_lower_triangular(m: &DMatrix<f64>) -> bool {
    let (r, c) = m.shape();
    (0..r).all(|i| (i + 1..c).all(|j| m[(i, j)] == 0.0))
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

/// `I_times ⊗ block`.
pub fn block_diag_repeat(block: &DMatrix<f64>, times: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * times, c * times);
    for k in 0..times {
        out.view_mut((k * r, k * c), (r, c)).copy_from(block);
    }
    out
}

pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r0, 0), b.shape()).copy_from(*b);
        r0 += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c0), b.shape()).copy_from(*b);
        c0 += b.ncols();
    }
    out
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Cholesky factor of a symmetric positive semidefinite covariance, with a
/// tiny diagonal jitter fallback for exactly singular input.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = symmetrize(m);
    if let Some(ch) = s.clone().cholesky() {
        return Ok(ch.l());
    }
    // eigen route handles semidefinite covariances such as zero noise
    let eig = s.symmetric_eigen();
    let tr = eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if eig.eigenvalues.iter().any(|&v| v < -1e-12 * tr) {
        return Err(Error::InvalidParameter(
            "covariance is not positive semidefinite".into(),
        ));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lq_full_rank_is_square_triangular() {
        let x = DMatrix::from_row_slice(3, 5, &[
            1.0, 2.0, 0.0, 1.0, 3.0, //
            0.5, -1.0, 2.0, 0.0, 1.0, //
            2.0, 0.0, 1.0, 1.0, -1.0,
        ]);
        let f = lq_rank_revealing(&x);
        assert_eq!(f.lower.shape(), (3, 3));
        assert!(is_lower_triangular(&f.lower));
        let back = &f.lower * f.basis.transpose();
        assert_relative_eq!(back, x, epsilon = 1e-12);
        let qtq = f.basis.tr_mul(&f.basis);
        assert_relative_eq!(qtq, DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn lq_drops_dependent_and_zero_rows() {
        let x = DMatrix::from_row_slice(4, 4, &[
            1.0, 2.0, 3.0, 4.0, //
            0.0, 0.0, 0.0, 0.0, //
            2.0, 4.0, 6.0, 8.0, //
            1.0, 0.0, 0.0, 1.0,
        ]);
        let f = lq_rank_revealing(&x);
        assert_eq!(f.lower.ncols(), 2);
        assert_relative_eq!(&f.lower * f.basis.transpose(), x, epsilon = 1e-12);
        assert_eq!(f.lower[(1, 0)], 0.0);
        assert_eq!(f.lower[(0, 1)], 0.0);
        assert_eq!(f.lower[(2, 1)], 0.0);
    }

    #[test]
    fn pinv_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, rank) = pinv(&m);
        assert_eq!(rank, 1);
        assert_relative_eq!(p, DMatrix::from_element(2, 2, 0.25), epsilon = 1e-14);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert_relative_eq!(spectral_radius(&m), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn left_inverse_rejects_singular_triangle() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(left_inverse(&m, "m"), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn psd_sqrt_handles_zero() {
        let s = psd_sqrt(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(s, DMatrix::zeros(2, 2));
    }
}
