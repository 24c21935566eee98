//! Dense matrix container and the factorization kernels the robust-PCA
//! solver is built from: SVD, rank-k truncation, soft thresholding, and
//! singular value thresholding.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative magnitude below which a leading entry is treated as zero when
/// fixing singular-vector signs.
const SIGN_PIVOT_REL_TOL: f64 = 1e-12;

/// Iteration budget handed to the SVD kernel. Exceeding it is reported as a
/// numerical failure rather than returning partial factors.
const SVD_MAX_SWEEPS: usize = 10_000;

/// Column-major dense matrix of finite `f64` entries.
///
/// Every constructor validates finiteness, so downstream numeric code may
/// assume NaN and infinity never appear. Matrices with zero rows or columns
/// are representable because window slicing can legitimately produce them;
/// the factorization routines reject them instead.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    inner: DMatrix<f64>,
}

impl Matrix {
    /// Matrix of zeros with the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        Matrix {
            inner: DMatrix::identity(n, n),
        }
    }

    /// Builds a matrix entry by entry from `f(row, col)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        Self::try_from_dmatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from entries listed column by column.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::try_from_dmatrix(DMatrix::from_vec(rows, cols, data))
    }

    /// Square matrix with `diag` on the diagonal and zeros elsewhere.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// Validating conversion from a raw `nalgebra` matrix.
    pub fn try_from_dmatrix(inner: DMatrix<f64>) -> Result<Self> {
        if let Some(bad) = inner.iter().find(|v| !v.is_finite()) {
            return Err(Error::MalformedInput(format!(
                "matrix entries must be finite, found {bad}"
            )));
        }
        Ok(Matrix { inner })
    }

    /// Wraps a matrix known to be finite, e.g. the output of arithmetic on
    /// already-validated operands.
    pub(crate) fn from_dmatrix_unchecked(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.iter().all(|v| v.is_finite()));
        Matrix { inner }
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.inner.nrows(), self.inner.ncols())
    }

    /// True when either dimension is zero.
    pub fn is_empty(&self) -> bool {
        self.inner.nrows() == 0 || self.inner.ncols() == 0
    }

    /// Entry accessor. Panics when out of bounds, like slice indexing.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    /// Contiguous view of column `col`. Panics when out of bounds.
    pub fn column(&self, col: usize) -> &[f64] {
        let m = self.rows();
        &self.inner.as_slice()[col * m..(col + 1) * m]
    }

    /// Copy of the columns in `range`, preserving row count. The range may be
    /// empty; it must not exceed the column count.
    pub fn slice_cols(&self, range: std::ops::Range<usize>) -> Result<Matrix> {
        if range.start > range.end || range.end > self.cols() {
            return Err(Error::DimensionMismatch(format!(
                "column range {}..{} out of bounds for {} columns",
                range.start,
                range.end,
                self.cols()
            )));
        }
        let width = range.end - range.start;
        Ok(Matrix::from_dmatrix_unchecked(
            self.inner.columns(range.start, width).into_owned(),
        ))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_dmatrix_unchecked(self.inner.transpose())
    }

    /// Frobenius norm; 0 for empty matrices.
    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Largest entry magnitude; 0 for empty matrices.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Sum of entry magnitudes.
    pub fn l1_norm(&self) -> f64 {
        self.inner.iter().map(|v| v.abs()).sum()
    }

    /// Entrywise map. The result is validated because `f` is arbitrary.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Matrix> {
        Self::try_from_dmatrix(self.inner.map(f))
    }

    /// Entrywise clamp of every entry into `[lo, hi]` (both finite, lo <= hi).
    pub fn clamp_entries(&self, lo: f64, hi: f64) -> Result<Matrix> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidConfig(format!(
                "clamp bounds must be finite and ordered, got [{lo}, {hi}]"
            )));
        }
        Ok(Matrix::from_dmatrix_unchecked(
            self.inner.map(|v| v.clamp(lo, hi)),
        ))
    }

    /// Entrywise clamp into `[-bound[i,j], +bound[i,j]]`.
    pub fn clamp_entries_per_entry(&self, bound: &Matrix) -> Result<Matrix> {
        if bound.shape() != self.shape() {
            return Err(Error::DimensionMismatch(format!(
                "entrywise bound shape {:?} does not match matrix shape {:?}",
                bound.shape(),
                self.shape()
            )));
        }
        Ok(Matrix::from_dmatrix_unchecked(self.inner.zip_map(
            &bound.inner,
            |v, b| v.clamp(-b, b),
        )))
    }

    /// Inner product `<a, b> = sum_ij a_ij * b_ij`.
    pub fn dot(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "dot of mismatched shapes");
        self.inner.dot(&other.inner)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        assert!(factor.is_finite(), "scale factor must be finite");
        Matrix::from_dmatrix_unchecked(&self.inner * factor)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }
}

impl std::ops::Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "add of mismatched shapes");
        Matrix::from_dmatrix_unchecked(&self.inner + &rhs.inner)
    }
}

impl std::ops::Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "sub of mismatched shapes");
        Matrix::from_dmatrix_unchecked(&self.inner - &rhs.inner)
    }
}

impl std::ops::Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols(),
            rhs.rows(),
            "product of incompatible shapes {:?} x {:?}",
            self.shape(),
            rhs.shape()
        );
        Matrix::from_dmatrix_unchecked(&self.inner * &rhs.inner)
    }
}

/// Thin singular value decomposition
/// `y = left_vectors * diag(singular_values) * right_vectors_t`.
///
/// With `r = min(rows, cols)`: `left_vectors` is `rows x r` with orthonormal
/// columns, `right_vectors_t` is `r x cols` with orthonormal rows, and
/// `singular_values` has length `r`, sorted nonincreasing. Signs are fixed by
/// requiring the first nonzero entry of each left vector to be nonnegative,
/// which makes factors comparable across runs and implementations.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub left_vectors: Matrix,
    pub singular_values: Vec<f64>,
    pub right_vectors_t: Matrix,
}

impl SvdFactors {
    /// Rebuilds `left[:, ..k] * diag(s[..k]) * right_t[..k, :]` for `k` at
    /// most the factor count.
    fn rebuild_truncated(&self, k: usize, rows: usize, cols: usize) -> Matrix {
        let mut acc = DMatrix::zeros(rows, cols);
        for i in 0..k {
            let scale = self.singular_values[i];
            if scale == 0.0 {
                continue;
            }
            let col = self.left_vectors.inner.column(i);
            let row = self.right_vectors_t.inner.row(i);
            acc.gemm(scale, &col, &row, 1.0);
        }
        Matrix::from_dmatrix_unchecked(acc)
    }
}

/// Computes the thin SVD of `y`.
///
/// Non-convergence of the underlying iteration surfaces as
/// [`Error::Numerical`]; partial factors are never returned. Empty matrices
/// are rejected.
pub fn svd(y: &Matrix) -> Result<SvdFactors> {
    if y.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "svd requires a nonempty matrix, got {:?}",
            y.shape()
        )));
    }
    let decomp = nalgebra::SVD::try_new(
        y.inner.clone(),
        true,
        true,
        f64::EPSILON,
        SVD_MAX_SWEEPS,
    )
    .ok_or_else(|| {
        Error::Numerical(format!(
            "svd did not converge within {SVD_MAX_SWEEPS} sweeps on a {}x{} matrix",
            y.rows(),
            y.cols()
        ))
    })?;

    let mut u = decomp.u.expect("left factors requested");
    let mut v_t = decomp.v_t.expect("right factors requested");
    let singular_values: Vec<f64> = decomp.singular_values.iter().copied().collect();
    debug_assert!(singular_values.windows(2).all(|w| w[0] >= w[1]));

    // Fix the sign ambiguity: flip any pair (left column, right row) whose
    // left vector leads with a negative entry.
    for j in 0..singular_values.len() {
        let col_max = u.column(j).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if col_max == 0.0 {
            continue;
        }
        let pivot = u
            .column(j)
            .iter()
            .copied()
            .find(|v| v.abs() > SIGN_PIVOT_REL_TOL * col_max);
        if let Some(p) = pivot {
            if p < 0.0 {
                u.column_mut(j).neg_mut();
                v_t.row_mut(j).neg_mut();
            }
        }
    }

    if !singular_values.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(
            "svd produced non-finite singular values".to_string(),
        ));
    }

    Ok(SvdFactors {
        left_vectors: Matrix::try_from_dmatrix(u)
            .map_err(|_| Error::Numerical("svd produced non-finite left factors".to_string()))?,
        singular_values,
        right_vectors_t: Matrix::try_from_dmatrix(v_t)
            .map_err(|_| Error::Numerical("svd produced non-finite right factors".to_string()))?,
    })
}

/// Best rank-`k` approximation together with its subspace coordinates.
#[derive(Debug, Clone)]
pub struct PcaTruncation {
    /// Best rank-at-most-`k` Frobenius approximation of the input.
    pub l: Matrix,
    /// Coordinates of `l` in the retained left-singular basis: exactly `k`
    /// rows, `x = diag(s[..k]) * right_vectors_t[..k, :]`, so
    /// `l = left_vectors[:, ..k] * x`.
    pub x: Matrix,
}

/// Rank-`k` truncation of `y` by keeping the `k` largest singular triplets.
///
/// `k = 0` yields the zero matrix; `k = min(m, n)` reproduces `y` up to
/// floating-point error. `k` beyond `min(m, n)` is an argument error.
pub fn pca_truncate(y: &Matrix, k: usize) -> Result<PcaTruncation> {
    let r = y.rows().min(y.cols());
    if k > r {
        return Err(Error::DimensionMismatch(format!(
            "truncation rank {k} exceeds min dimension {r}"
        )));
    }
    let factors = svd(y)?;
    let l = factors.rebuild_truncated(k, y.rows(), y.cols());
    let mut x = factors
        .right_vectors_t
        .inner
        .rows(0, k)
        .into_owned();
    for i in 0..k {
        let s = factors.singular_values[i];
        x.row_mut(i).scale_mut(s);
    }
    Ok(PcaTruncation {
        l,
        x: Matrix::from_dmatrix_unchecked(x),
    })
}

/// Scalar soft threshold `sign(x) * max(|x| - tau, 0)`.
///
/// `tau` must be nonnegative; the shrink operator is only defined as a
/// proximal map for nonnegative thresholds.
pub fn shrink(x: f64, tau: f64) -> f64 {
    assert!(tau >= 0.0, "shrink threshold must be nonnegative, got {tau}");
    let mag = x.abs() - tau;
    if mag > 0.0 {
        x.signum() * mag
    } else {
        0.0
    }
}

/// Entrywise soft threshold of a matrix.
pub fn shrink_matrix(y: &Matrix, tau: f64) -> Result<Matrix> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "shrink threshold must be finite and nonnegative, got {tau}"
        )));
    }
    Ok(Matrix::from_dmatrix_unchecked(
        y.inner.map(|v| shrink(v, tau)),
    ))
}

/// Result of singular value thresholding: the rebuilt matrix and the full
/// shrunk spectrum (length `min(rows, cols)`, nonincreasing, with entries
/// beyond the rank cap zeroed).
#[derive(Debug, Clone)]
pub struct SvtOutcome {
    pub matrix: Matrix,
    pub singular_values: Vec<f64>,
}

/// Singular value thresholding with a hard rank cap.
///
/// Computes the SVD of `y`, shrinks each singular value by `tau`, zeroes all
/// but the `max_rank` largest shrunk values, and rebuilds. The cap applies
/// after shrinking, so the survivors are the top of the already-shrunk
/// spectrum; this makes the result the exact minimizer of
/// `tau * ||X||_* + 0.5 * ||X - y||_F^2` over matrices of rank at most
/// `max_rank` (and the exact proximal map of the nuclear norm when
/// `max_rank = min(m, n)`).
pub fn svt(y: &Matrix, tau: f64, max_rank: usize) -> Result<SvtOutcome> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "svt threshold must be finite and nonnegative, got {tau}"
        )));
    }
    let r = y.rows().min(y.cols());
    if max_rank > r {
        return Err(Error::DimensionMismatch(format!(
            "rank cap {max_rank} exceeds min dimension {r}"
        )));
    }
    let factors = svd(y)?;
    let mut shrunk: Vec<f64> = factors
        .singular_values
        .iter()
        .map(|&s| shrink(s, tau))
        .collect();
    let kept = shrunk[..max_rank].iter().take_while(|&&s| s > 0.0).count();
    for v in shrunk.iter_mut().skip(kept) {
        *v = 0.0;
    }
    let rebuilt = SvdFactors {
        left_vectors: factors.left_vectors,
        singular_values: shrunk.clone(),
        right_vectors_t: factors.right_vectors_t,
    }
    .rebuild_truncated(kept, y.rows(), y.cols());
    Ok(SvtOutcome {
        matrix: rebuilt,
        singular_values: shrunk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TIGHT: f64 = 1e-10;

    fn assert_near(actual: f64, expected: f64, tol: f64, what: &str) {
        assert!(
            (actual - expected).abs() <= tol,
            "{what}: expected {expected}, got {actual} (tol {tol})"
        );
    }

    /// Deterministic pseudo-random matrix; a tiny multiplicative generator
    /// keeps the test corpus independent of any RNG crate.
    fn seeded_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        Matrix::from_fn(rows, cols, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            // Map the top bits into [-1, 1).
            ((state >> 11) as f64) / ((1u64 << 52) as f64) - 1.0
        })
        .unwrap()
    }

    /// Product of seeded factors, so the rank is at most `rank` by
    /// construction.
    fn seeded_low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Matrix {
        let a = seeded_matrix(rows, rank, seed);
        let b = seeded_matrix(rank, cols, seed ^ 0x9e3779b97f4a7c15);
        &a * &b
    }

    /// Independent spectrum oracle: cyclic Jacobi eigensolver applied to the
    /// Gram matrix `y^T y`. Returns singular values, descending.
    fn jacobi_singular_values(y: &Matrix) -> Vec<f64> {
        let n = y.cols();
        let mut a = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..y.rows() {
                    acc += y.get(k, i) * y.get(k, j);
                }
                a[i][j] = acc;
            }
        }
        for _sweep in 0..200 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a[p][q].abs());
                }
            }
            if off < 1e-15 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut sv: Vec<f64> = (0..n).map(|i| a[i][i].max(0.0).sqrt()).collect();
        sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
        sv
    }

    #[test]
    fn svd_identity_has_unit_spectrum() {
        let factors = svd(&Matrix::identity(4)).unwrap();
        for (i, s) in factors.singular_values.iter().enumerate() {
            assert_near(*s, 1.0, TIGHT, &format!("singular value {i}"));
        }
        let rebuilt = factors.rebuild_truncated(4, 4, 4);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_near(rebuilt.get(i, j), want, TIGHT, "identity rebuild");
            }
        }
    }

    #[test]
    fn svd_diagonal_spectrum_is_the_diagonal() {
        let factors = svd(&Matrix::from_diagonal(&[3.0, 1.0]).unwrap()).unwrap();
        assert_near(factors.singular_values[0], 3.0, TIGHT, "sv 0");
        assert_near(factors.singular_values[1], 1.0, TIGHT, "sv 1");
    }

    #[test]
    fn svd_matches_jacobi_oracle_on_seeded_matrices() {
        for seed in 0..20u64 {
            let y = seeded_matrix(5, 3, seed);
            let got = svd(&y).unwrap().singular_values;
            let want = jacobi_singular_values(&y);
            assert_eq!(got.len(), 3);
            for i in 0..3 {
                assert_near(got[i], want[i], 1e-10, &format!("seed {seed} sv {i}"));
            }
        }
    }

    #[test]
    fn svd_factors_are_orthonormal_and_reconstruct() {
        let y = seeded_matrix(8, 5, 42);
        let f = svd(&y).unwrap();
        let ugram = &f.left_vectors.transpose() * &f.left_vectors;
        let vgram = &f.right_vectors_t * &f.right_vectors_t.transpose();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_near(ugram.get(i, j), want, 1e-10, "left gram");
                assert_near(vgram.get(i, j), want, 1e-10, "right gram");
            }
        }
        let rebuilt = f.rebuild_truncated(5, 8, 5);
        assert!((&rebuilt - &y).frobenius_norm() <= 1e-8 * y.frobenius_norm().max(1.0));
    }

    #[test]
    fn svd_sign_convention_pins_first_nonzero_entry() {
        for seed in [1u64, 7, 99, 1234] {
            let y = seeded_matrix(6, 4, seed);
            let f = svd(&y).unwrap();
            for j in 0..f.singular_values.len() {
                let col = f.left_vectors.column(j);
                let col_max = col.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let pivot = col
                    .iter()
                    .copied()
                    .find(|v| v.abs() > SIGN_PIVOT_REL_TOL * col_max);
                if let Some(p) = pivot {
                    assert!(p >= 0.0, "seed {seed} column {j} leads with {p}");
                }
            }
        }
    }

    #[test]
    fn svd_rejects_empty_matrices() {
        let err = svd(&Matrix::zeros(0, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn svd_of_zero_matrix_is_zero_spectrum() {
        let f = svd(&Matrix::zeros(3, 5)).unwrap();
        assert!(f.singular_values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pca_truncate_k0_is_zero_and_full_k_reproduces_input() {
        let y = seeded_matrix(6, 6, 3);
        let zero = pca_truncate(&y, 0).unwrap();
        assert_eq!(zero.l.frobenius_norm(), 0.0);
        assert_eq!(zero.x.shape(), (0, 6));
        let full = pca_truncate(&y, 6).unwrap();
        assert!((&full.l - &y).frobenius_norm() <= TIGHT * y.frobenius_norm());
        assert!(pca_truncate(&y, 7).is_err());
    }

    #[test]
    fn pca_truncate_coordinates_factor_the_approximation() {
        let y = seeded_matrix(7, 4, 12);
        let k = 2;
        let out = pca_truncate(&y, k).unwrap();
        assert_eq!(out.x.shape(), (k, 4));
        let basis = svd(&y).unwrap().left_vectors.slice_cols(0..k).unwrap();
        let rebuilt = &basis * &out.x;
        assert!((&rebuilt - &out.l).frobenius_norm() <= 1e-10);
    }

    #[test]
    fn pca_truncate_error_matches_tail_spectrum() {
        // Eckart-Young: the rank-k error equals the l2 norm of the dropped
        // singular values.
        let y = seeded_matrix(7, 5, 11);
        let sv = svd(&y).unwrap().singular_values;
        for k in 0..=5 {
            let err = (&pca_truncate(&y, k).unwrap().l - &y).frobenius_norm();
            let want = sv[k..].iter().map(|s| s * s).sum::<f64>().sqrt();
            assert_near(err, want, TIGHT, &format!("rank-{k} error"));
        }
    }

    #[test]
    fn pca_truncate_beats_random_rank_k_competitors() {
        // Eckart-Young optimality against sampled competitors of the same
        // rank.
        for seed in 0..100u64 {
            let rows = 3 + (seed % 5) as usize;
            let cols = 3 + (seed % 4) as usize;
            let y = seeded_matrix(rows, cols, seed);
            for k in 0..=rows.min(cols) {
                let best = (&pca_truncate(&y, k).unwrap().l - &y).frobenius_norm();
                for trial in 0..20u64 {
                    let r = seeded_low_rank(rows, cols, k.max(1), seed * 1000 + trial);
                    let competitor = if k == 0 { Matrix::zeros(rows, cols) } else { r };
                    let err = (&competitor - &y).frobenius_norm();
                    assert!(
                        best <= err + 1e-12,
                        "seed {seed} k {k} trial {trial}: {best} > {err}"
                    );
                }
            }
        }
    }

    #[test]
    fn shrink_known_values() {
        assert_eq!(shrink(0.5, 0.2), 0.3);
        assert_eq!(shrink(-0.1, 0.2), 0.0);
        assert_eq!(shrink(3.0, 1.0), 2.0);
        assert_eq!(shrink(-3.0, 1.0), -2.0);
        assert_eq!(shrink(0.0, 0.0), 0.0);
        assert_eq!(shrink(0.0, 5.0), 0.0);
    }

    #[test]
    fn shrink_matrix_with_zero_tau_is_identity() {
        let y = seeded_matrix(4, 4, 5);
        let s = shrink_matrix(&y, 0.0).unwrap();
        assert_eq!(s, y);
    }

    #[test]
    fn shrink_matrix_rejects_negative_tau() {
        let err = shrink_matrix(&Matrix::zeros(2, 2), -0.1).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn svt_on_diagonal_matrix_shrinks_spectrum_exactly() {
        let y = Matrix::from_diagonal(&[3.0, 1.0]).unwrap();
        let out = svt(&y, 2.0, 2).unwrap();
        assert_eq!(out.singular_values, vec![1.0, 0.0]);
        assert_near(out.matrix.get(0, 0), 1.0, TIGHT, "svt diagonal 00");
        assert_near(out.matrix.get(1, 1), 0.0, TIGHT, "svt diagonal 11");
    }

    #[test]
    fn svt_with_zero_tau_and_full_cap_is_identity() {
        let y = seeded_matrix(5, 4, 8);
        let out = svt(&y, 0.0, 4).unwrap();
        assert!((&out.matrix - &y).frobenius_norm() <= TIGHT * y.frobenius_norm());
    }

    #[test]
    fn svt_rank_cap_drops_trailing_values() {
        let y = Matrix::from_diagonal(&[5.0, 3.0, 1.0]).unwrap();
        let out = svt(&y, 2.0, 1).unwrap();
        assert_eq!(out.singular_values, vec![3.0, 0.0, 0.0]);
        assert_near(out.matrix.get(0, 0), 3.0, TIGHT, "capped svt 00");
        assert_near(out.matrix.get(1, 1), 0.0, TIGHT, "capped svt 11");
    }

    #[test]
    fn svt_composes_shrink_then_truncate() {
        let y = seeded_low_rank(8, 8, 4, 77);
        let sv = svd(&y).unwrap().singular_values;
        let tau = 0.5 * sv[3];
        let capped = svt(&y, tau, 2).unwrap();
        let nonzero = capped
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-12 * sv[0])
            .count();
        assert_eq!(nonzero, 2);
        // Same result as shrinking the full spectrum by hand and keeping the
        // top two triplets.
        let f = svd(&y).unwrap();
        let by_hand = SvdFactors {
            left_vectors: f.left_vectors,
            singular_values: f.singular_values.iter().map(|&s| shrink(s, tau)).collect(),
            right_vectors_t: f.right_vectors_t,
        }
        .rebuild_truncated(2, 8, 8);
        assert!((&capped.matrix - &by_hand).frobenius_norm() <= TIGHT);
    }

    #[test]
    fn svt_with_tau_above_spectrum_returns_zero() {
        let y = seeded_matrix(5, 4, 9);
        let top = svd(&y).unwrap().singular_values[0];
        let out = svt(&y, top + 1.0, 4).unwrap();
        assert_eq!(out.matrix.frobenius_norm(), 0.0);
        assert!(out.singular_values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn svt_rejects_cap_beyond_min_dimension() {
        let y = seeded_matrix(5, 4, 10);
        assert!(matches!(
            svt(&y, 0.1, 5),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn matrix_construction_rejects_non_finite_entries() {
        assert!(Matrix::from_col_major(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_col_major(1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(Matrix::from_col_major(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn slice_cols_supports_empty_ranges() {
        let y = seeded_matrix(3, 4, 1);
        let empty = y.slice_cols(2..2).unwrap();
        assert_eq!(empty.shape(), (3, 0));
        assert!(empty.is_empty());
        let tail = y.slice_cols(1..4).unwrap();
        assert_eq!(tail.shape(), (3, 3));
        assert_eq!(tail.get(0, 0), y.get(0, 1));
        assert!(y.slice_cols(2..5).is_err());
    }

    proptest! {
        #[test]
        fn shrink_is_a_contraction(
            a in -1e6f64..1e6,
            b in -1e6f64..1e6,
            tau in 0.0f64..1e3,
        ) {
            let sa = shrink(a, tau);
            let sb = shrink(b, tau);
            prop_assert!((sa - sb).abs() <= (a - b).abs() + 1e-9);
            prop_assert!(sa.abs() <= a.abs());
            prop_assert!(sa * a >= 0.0);
        }

        #[test]
        fn svt_never_raises_nuclear_norm(seed in 0u64..500, tau in 0.0f64..4.0) {
            let y = seeded_matrix(5, 4, seed);
            let before: f64 = svd(&y).unwrap().singular_values.iter().sum();
            let out = svt(&y, tau, 4).unwrap();
            let after: f64 = out.singular_values.iter().sum();
            prop_assert!(after <= before + 1e-9);
        }

        #[test]
        fn svt_spectrum_stays_sorted_and_capped(seed in 0u64..500, cap in 1usize..5) {
            let y = seeded_matrix(6, 5, seed);
            let out = svt(&y, 0.5, cap).unwrap();
            prop_assert!(out.singular_values.windows(2).all(|w| w[0] >= w[1]));
            let nonzero = out.singular_values.iter().filter(|&&s| s > 0.0).count();
            prop_assert!(nonzero <= cap);
        }

        #[test]
        fn svd_reconstructs_seeded_fuzz_inputs(seed in 0u64..300) {
            let rows = 2 + (seed % 7) as usize;
            let cols = 2 + ((seed / 7) % 6) as usize;
            let y = seeded_matrix(rows, cols, seed);
            let f = svd(&y).unwrap();
            let r = rows.min(cols);
            let rebuilt = f.rebuild_truncated(r, rows, cols);
            prop_assert!(
                (&rebuilt - &y).frobenius_norm() <= 1e-8 * y.frobenius_norm().max(1.0)
            );
            let gram = &f.left_vectors.transpose() * &f.left_vectors;
            for i in 0..r {
                for j in 0..r {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((gram.get(i, j) - want).abs() <= 1e-10);
                }
            }
        }
    }
}
