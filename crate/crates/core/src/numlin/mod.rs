//! Dense linear-algebra kernel.
//!
//! Every rank statement of the theory is exact; this module turns them into
//! floating-point decisions under an explicit [`TolerancePolicy`]. Subspaces
//! are always carried as orthonormal bases and membership is decided by
//! projection residuals rather than by ranks of explicitly stacked matrices.

mod eigen;
mod place;
mod spectrum;
mod subspace;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use eigen::{complex_schur_ordered, eigenvalues, power_image_basis};
pub use place::{ackermann, place_poles};
pub use spectrum::{EigenCluster, Spectrum};
pub use subspace::{
    controllability_subspace, observability_indices, observability_subspace, SubspaceBasis,
};

/// Real dense matrix, row/column counts may be zero for empty augmentations.
pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Complex = nalgebra::Complex<f64>;

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
pub const DEFAULT_EIGEN_MATCH_TOL: f64 = 1e-6;

/// Numerical thresholds used to turn exact rank statements into decisions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TolerancePolicy {
    /// Factor applied to the largest singular value in [`numerical_rank`].
    /// `None` selects `max(rows, cols) * f64::EPSILON`.
    pub relative_rank_tol: Option<f64>,
    /// Residual-norm threshold (scaled by the operand norm where one exists).
    pub absolute_zero_tol: f64,
    /// Distance under which two eigenvalues are considered equal.
    pub eigen_match_tol: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            relative_rank_tol: None,
            absolute_zero_tol: DEFAULT_ZERO_TOL,
            eigen_match_tol: DEFAULT_EIGEN_MATCH_TOL,
        }
    }
}

impl TolerancePolicy {
    pub fn new(
        relative_rank_tol: Option<f64>,
        absolute_zero_tol: f64,
        eigen_match_tol: f64,
    ) -> Result<Self> {
        let policy = Self {
            relative_rank_tol,
            absolute_zero_tol,
            eigen_match_tol,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if let Some(r) = self.relative_rank_tol {
            if !positive(r) {
                return Err(Error::InvalidTolerance(format!("relative_rank_tol = {r}")));
            }
        }
        if !positive(self.absolute_zero_tol) {
            return Err(Error::InvalidTolerance(format!(
                "absolute_zero_tol = {}",
                self.absolute_zero_tol
            )));
        }
        if !positive(self.eigen_match_tol) {
            return Err(Error::InvalidTolerance(format!(
                "eigen_match_tol = {}",
                self.eigen_match_tol
            )));
        }
        Ok(())
    }

    /// Singular-value cutoff for a `rows x cols` matrix whose largest
    /// singular value is `sigma_max`.
    pub fn rank_threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        let factor = self
            .relative_rank_tol
            .unwrap_or(rows.max(cols) as f64 * f64::EPSILON);
        factor * sigma_max
    }

    /// Residual threshold for an operand of norm `scale`.
    pub fn zero_threshold(&self, scale: f64) -> f64 {
        self.absolute_zero_tol * scale.max(1.0)
    }
}

/// Thin singular value decomposition `m = U diag(s) Vᵀ` with `s` decreasing.
///
/// Backed by faer: the nalgebra 0.35 bidiagonal SVD returns inaccurate left
/// vectors on some nearly rank-deficient inputs.
pub(crate) struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

pub(crate) fn svd(m: &Matrix) -> Result<Svd> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok(Svd { u: Matrix::zeros(r, 0), s: Vec::new(), v: Matrix::zeros(c, 0) });
    }
    ensure_finite(m, "svd operand")?;
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let dec = fm.thin_svd().map_err(|_| Error::ConvergenceFailure("singular value decomposition"))?;
    let (fu, fv) = (dec.U(), dec.V());
    let fs = dec.S().column_vector();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| fs[y].total_cmp(&fs[x]));
    Ok(Svd {
        u: Matrix::from_fn(r, k, |i, j| fu[(i, order[j])]),
        s: order.iter().map(|&j| fs[j]).collect(),
        v: Matrix::from_fn(c, k, |i, j| fv[(i, order[j])]),
    })
}

/// Singular values in decreasing order; empty for matrices with a zero dimension.
/// Non-finite input yields NaN values.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    match svd(m) {
        Ok(d) => d.s,
        Err(_) => vec![f64::NAN; m.nrows().min(m.ncols())],
    }
}

/// Number of singular values above the policy's relative cutoff.
pub fn numerical_rank(m: &Matrix, tol: &TolerancePolicy) -> usize {
    let s = singular_values(m);
    let Some(&smax) = s.first() else {
        return 0;
    };
    if smax == 0.0 {
        return 0;
    }
    let cutoff = tol.rank_threshold(m.nrows(), m.ncols(), smax);
    s.iter().filter(|&&v| v > cutoff).count()
}

/// Right inverse `F^T (F F^T)^{-1}` of a full-row-rank matrix.
pub fn right_pseudoinverse(f: &Matrix, tol: &TolerancePolicy) -> Result<Matrix> {
    let rank = numerical_rank(f, tol);
    if f.nrows() == 0 || rank < f.nrows() {
        return Err(Error::RankDeficient {
            what: "functional matrix",
            rank,
            expected: f.nrows(),
        });
    }
    let gram = f * f.transpose();
    let chol = gram.cholesky().ok_or(Error::RankDeficient {
        what: "functional matrix",
        rank,
        expected: f.nrows(),
    })?;
    Ok(f.transpose() * chol.inverse())
}

/// Moore–Penrose inverse of an arbitrary matrix, singular values below the
/// policy's relative cutoff treated as zero.
pub fn pseudoinverse(m: &Matrix, tol: &TolerancePolicy) -> Matrix {
    let smax = spectral_norm(m);
    pseudoinverse_with_cutoff(m, tol.rank_threshold(m.nrows(), m.ncols(), smax))
}

/// Moore–Penrose inverse treating singular values at or below `cutoff` as zero.
pub fn pseudoinverse_with_cutoff(m: &Matrix, cutoff: f64) -> Matrix {
    if m.is_empty() {
        return Matrix::zeros(m.ncols(), m.nrows());
    }
    let Ok(d) = svd(m) else {
        return Matrix::from_element(m.ncols(), m.nrows(), f64::NAN);
    };
    let mut out = Matrix::zeros(m.ncols(), m.nrows());
    for (i, &s) in d.s.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += d.v.column(i) * d.u.column(i).transpose() / s;
        }
    }
    out
}

/// Orthonormal basis (as columns) of the column space of `m`, keeping
/// directions whose singular value exceeds `cutoff`.
pub fn orthonormal_columns(m: &Matrix, cutoff: f64) -> Matrix {
    let n = m.nrows();
    if m.is_empty() {
        return Matrix::zeros(n, 0);
    }
    let Ok(d) = svd(m) else {
        return Matrix::zeros(n, 0);
    };
    let keep = d.s.iter().take_while(|&&s| s > cutoff).count();
    d.u.columns(0, keep).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// the orthonormal `basis` inside `R^n`.
pub fn orthogonal_complement(basis: &Matrix) -> Matrix {
    let n = basis.nrows();
    let mut projector = Matrix::identity(n, n);
    if basis.ncols() > 0 {
        projector -= basis * basis.transpose();
    }
    let out = orthonormal_columns(&projector, 0.5);
    let keep = (n - basis.ncols().min(n)).min(out.ncols());
    out.columns(0, keep).into_owned()
}

/// Vertical concatenation; blocks may have zero rows but must agree on columns.
pub fn vstack(blocks: &[&Matrix]) -> Matrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack: column mismatch");
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Horizontal concatenation; blocks may have zero columns but must agree on rows.
pub fn hstack(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack: row mismatch");
        out.view_mut((0, at), (rows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Largest singular value (0 for empty matrices).
pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub(crate) fn ensure_finite(m: &Matrix, name: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn ensure_square(m: &Matrix, name: &str) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{name} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}
