use super::{ensure_square, hstack, orthonormal_columns, Matrix, TolerancePolicy, Vector};
use crate::error::{Error, Result};

/// Subspace of `R^n` held as an orthonormal column basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: Matrix,
    tol_used: f64,
}

impl SubspaceBasis {
    pub(crate) fn from_orthonormal(basis: Matrix, tol_used: f64) -> Self {
        Self { basis, tol_used }
    }

    pub fn full(n: usize) -> Self {
        Self::from_orthonormal(Matrix::identity(n, n), 0.0)
    }

    pub fn zero(n: usize) -> Self {
        Self::from_orthonormal(Matrix::zeros(n, 0), 0.0)
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dimension(&self) -> usize {
        self.basis.nrows()
    }

    pub fn tol_used(&self) -> f64 {
        self.tol_used
    }

    /// `v - Q Q^T v`.
    pub fn reject(&self, v: &Vector) -> Vector {
        if self.dimension() == 0 {
            return v.clone();
        }
        let mut r = v - &self.basis * (self.basis.transpose() * v);
        // second pass keeps the residual orthogonal to Q at rounding level
        r -= &self.basis * (self.basis.transpose() * &r);
        r
    }

    /// `‖(I - Q Q^T) v‖`.
    pub fn residual(&self, v: &Vector) -> f64 {
        self.reject(v).norm()
    }

    /// Sum of this subspace and the column space of `extra`.
    pub fn extend(&self, extra: &Matrix, cutoff: f64) -> SubspaceBasis {
        let rejected = reject_columns(&self.basis, extra);
        let mut added = orthonormal_columns(&rejected, cutoff);
        added = reject_columns(&self.basis, &added);
        let added = orthonormal_columns(&added, 0.5);
        SubspaceBasis::from_orthonormal(hstack(&[&self.basis, &added]), cutoff)
    }

    /// Sine of the largest principal angle between two subspaces of equal dimension,
    /// `None` if dimensions differ.
    pub fn max_principal_angle_sin(&self, other: &SubspaceBasis) -> Option<f64> {
        if self.dimension() != other.dimension() {
            return None;
        }
        if self.dimension() == 0 {
            return Some(0.0);
        }
        let r = reject_columns(&self.basis, &other.basis);
        Some(super::spectral_norm(&r))
    }
}

/// Columns of `m` with their components along `q` removed (two passes).
fn reject_columns(q: &Matrix, m: &Matrix) -> Matrix {
    if q.ncols() == 0 || m.ncols() == 0 {
        return m.clone();
    }
    let mut r = m - q * (q.transpose() * m);
    r -= q * (q.transpose() * &r);
    r
}

/// Orthonormal basis of `Im [B, AB, ..., A^{n-1}B]`.
///
/// Block Krylov iteration: each new block is `A` applied to the directions
/// admitted in the previous step, re-orthogonalised against everything
/// accumulated so far. Powers of `A` are never formed.
pub fn controllability_subspace(
    a: &Matrix,
    b: &Matrix,
    tol: &TolerancePolicy,
) -> Result<SubspaceBasis> {
    let n = ensure_square(a, "A")?;
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "input matrix has {} rows, state dimension is {n}",
            b.nrows()
        )));
    }
    let cutoff = tol.zero_threshold(a.norm().max(b.norm()));
    let mut basis = Matrix::zeros(n, 0);
    let mut block = b.clone();
    for _ in 0..n {
        let rejected = reject_columns(&basis, &block);
        let fresh = orthonormal_columns(&rejected, cutoff);
        if fresh.ncols() == 0 {
            break;
        }
        let fresh = orthonormal_columns(&reject_columns(&basis, &fresh), 0.5);
        basis = hstack(&[&basis, &fresh]);
        if basis.ncols() >= n {
            break;
        }
        block = a * fresh;
    }
    Ok(SubspaceBasis::from_orthonormal(basis, cutoff))
}

/// Orthonormal basis of the row space of the observability matrix of `(A, C)`,
/// returned as columns. Same routine as the controllability subspace of `(A^T, C^T)`.
pub fn observability_subspace(
    a: &Matrix,
    c: &Matrix,
    tol: &TolerancePolicy,
) -> Result<SubspaceBasis> {
    let n = ensure_square(a, "A")?;
    if c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "output matrix has {} columns, state dimension is {n}",
            c.ncols()
        )));
    }
    controllability_subspace(&a.transpose(), &c.transpose(), tol)
}

/// Observability indices of `(A, F)` under power-major selection: for
/// `k = 0, 1, ...` and rows `i = 1..r` in order, `F_i A^k` is admitted when it is
/// independent of every previously admitted row. A row stops at its first
/// rejected power.
pub fn observability_indices(a: &Matrix, f: &Matrix, tol: &TolerancePolicy) -> Result<Vec<usize>> {
    let n = ensure_square(a, "A")?;
    if f.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "functional matrix has {} columns, state dimension is {n}",
            f.ncols()
        )));
    }
    let r = f.nrows();
    let rank = super::numerical_rank(f, tol);
    if r == 0 || rank < r {
        return Err(Error::RankDeficient {
            what: "functional matrix",
            rank,
            expected: r,
        });
    }
    let at = a.transpose();
    let cutoff = tol.zero_threshold(a.norm());
    let mut admitted = SubspaceBasis::zero(n);
    let mut indices = vec![0usize; r];
    let mut active = vec![true; r];
    // current candidate for each row, normalised to unit length
    let mut current: Vec<Vector> = (0..r).map(|i| f.row(i).transpose()).collect();
    for v in current.iter_mut() {
        let norm = v.norm();
        *v /= norm;
    }
    for k in 0..n {
        let mut any = false;
        for i in 0..r {
            if !active[i] {
                continue;
            }
            let candidate = if k == 0 {
                current[i].clone()
            } else {
                &at * &current[i]
            };
            let threshold = if k == 0 { tol.absolute_zero_tol } else { cutoff };
            let residual = admitted.reject(&candidate);
            if residual.norm() > threshold && admitted.dimension() < n {
                let unit = &residual / residual.norm();
                let basis = hstack(&[admitted.basis(), &Matrix::from_columns(&[unit])]);
                admitted = SubspaceBasis::from_orthonormal(basis, cutoff);
                indices[i] += 1;
                let norm = candidate.norm();
                current[i] = candidate / norm;
                any = true;
            } else {
                active[i] = false;
            }
        }
        if !any {
            break;
        }
    }
    Ok(indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn ex1() -> (Matrix, Matrix) {
        let s = catalog::example1(0);
        (s.system.a().clone(), s.system.b().clone())
    }

    fn span_of(cols: &[usize], n: usize) -> SubspaceBasis {
        let mut m = Matrix::zeros(n, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            m[(c, j)] = 1.0;
        }
        SubspaceBasis::from_orthonormal(m, 0.0)
    }

    #[test]
    fn example1_controllable_subspace_is_first_two_coordinates() {
        let (a, b) = ex1();
        let q = controllability_subspace(&a, &b, &tol()).unwrap();
        assert_eq!(q.dimension(), 2);
        assert!(q.max_principal_angle_sin(&span_of(&[0, 1], 4)).unwrap() < 1e-12);
    }

    #[test]
    fn zero_input_gives_trivial_subspace() {
        let (a, _) = ex1();
        let q = controllability_subspace(&a, &Matrix::zeros(4, 2), &tol()).unwrap();
        assert_eq!(q.dimension(), 0);
    }

    #[test]
    fn example2_controllable_subspace_has_dimension_four() {
        let s = catalog::example2().system;
        let q = controllability_subspace(s.a(), s.b(), &tol()).unwrap();
        assert_eq!(q.dimension(), 4);
    }

    #[test]
    fn example2_observable_subspace_has_dimension_two() {
        let s = catalog::example2().system;
        let q = observability_subspace(s.a(), s.c(), &tol()).unwrap();
        assert_eq!(q.dimension(), 2);
    }

    #[test]
    fn full_measurement_is_observable() {
        let s = catalog::example2().system;
        let q = observability_subspace(s.a(), &Matrix::identity(5, 5), &tol()).unwrap();
        assert_eq!(q.dimension(), 5);
    }

    #[test]
    fn example1_dual_output_observes_first_two_coordinates() {
        let (a, b) = ex1();
        let q = observability_subspace(&a, &b.transpose(), &tol()).unwrap();
        assert!(q.max_principal_angle_sin(&span_of(&[0, 1], 4)).unwrap() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (a, _) = ex1();
        assert!(matches!(
            controllability_subspace(&a, &Matrix::zeros(3, 1), &tol()),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            observability_subspace(&a, &Matrix::zeros(1, 3), &tol()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn indices_examples() {
        let s = catalog::example3();
        assert_eq!(observability_indices(s.system.a(), &s.f, &tol()).unwrap(), vec![2]);

        let a = s.system.a();
        assert_eq!(
            observability_indices(a, &Matrix::identity(5, 5), &tol()).unwrap(),
            vec![1; 5]
        );

        let r8 = catalog::remark8();
        assert_eq!(observability_indices(r8.system.a(), &r8.f, &tol()).unwrap(), vec![2]);
    }

    #[test]
    fn indices_reject_rank_deficient_functional() {
        let s = catalog::example3();
        let f = Matrix::from_row_slice(2, 5, &[1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            observability_indices(s.system.a(), &f, &tol()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn power_major_order_breaks_ties_by_row() {
        // chain e1 -> e2 -> e3 -> 0; rows e1 and e2 compete for e2, e3
        let mut a = Matrix::zeros(3, 3);
        a[(0, 1)] = 1.0;
        a[(1, 2)] = 1.0;
        let f = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        // k=0: e1, e2 admitted; k=1: e1 A = e2 (dependent), e2 A = e3 admitted
        assert_eq!(observability_indices(&a, &f, &tol()).unwrap(), vec![1, 2]);
    }
}
