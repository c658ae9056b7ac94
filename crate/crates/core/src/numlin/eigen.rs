use nalgebra::{DMatrix, Schur};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ensure_finite, ensure_square, Complex, Matrix, Spectrum, SubspaceBasis, TolerancePolicy};
use crate::error::{Error, Result};

type CMatrix = DMatrix<Complex>;

const SCHUR_ATTEMPTS: usize = 4;

fn max_iterations(n: usize) -> usize {
    200 * n.max(2) * n.max(2)
}

/// Random orthogonal matrix from a seeded generator (QR of a Gaussian-like sample).
fn random_orthogonal(n: usize, seed: u64) -> Matrix {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}

/// Eigenvalues of `A` (real Schur form).
///
/// If the QR iteration stalls the matrix is conjugated by a seeded random
/// orthogonal matrix and the iteration is retried.
pub fn eigenvalues(a: &Matrix) -> Result<Spectrum> {
    let n = ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    for attempt in 0..SCHUR_ATTEMPTS {
        let m = if attempt == 0 {
            a.clone()
        } else {
            let q = random_orthogonal(n, attempt as u64);
            q.transpose() * a * &q
        };
        if let Some(schur) = Schur::try_new(m, f64::EPSILON, max_iterations(n)) {
            let values: Vec<Complex> = schur.complex_eigenvalues().iter().copied().collect();
            if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                return Ok(Spectrum::new(values));
            }
        }
    }
    Err(Error::ConvergenceFailure("Schur decomposition"))
}

/// Complex Schur form `A = U T U^H` reordered so that the diagonal entries
/// selected by `in_cluster` occupy the trailing positions.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub u: CMatrix,
    pub t: CMatrix,
    /// Number of leading diagonal entries outside the cluster.
    pub leading: usize,
}

fn complex_schur(a: &Matrix) -> Result<(CMatrix, CMatrix)> {
    let n = ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    for attempt in 0..SCHUR_ATTEMPTS {
        let q = if attempt == 0 {
            Matrix::identity(n, n)
        } else {
            random_orthogonal(n, 0x5eed + attempt as u64)
        };
        let m = (q.transpose() * a * &q).map(|v| Complex::new(v, 0.0));
        if let Some(schur) = Schur::try_new(m, f64::EPSILON, max_iterations(n)) {
            let (u, mut t) = schur.unpack();
            if t.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                continue;
            }
            let mut u = q.map(|v| Complex::new(v, 0.0)) * u;
            triangularize(&mut u, &mut t);
            return Ok((u, t));
        }
    }
    Err(Error::ConvergenceFailure("complex Schur decomposition"))
}

/// Apply the unitary similarity `G^H T G` acting on indices `i, i+1`, and `U <- U G`.
fn apply_rotation(u: &mut CMatrix, t: &mut CMatrix, i: usize, g: [[Complex; 2]; 2]) {
    let n = t.nrows();
    // rows: T <- G^H T
    for j in 0..n {
        let (x, y) = (t[(i, j)], t[(i + 1, j)]);
        t[(i, j)] = g[0][0].conj() * x + g[1][0].conj() * y;
        t[(i + 1, j)] = g[0][1].conj() * x + g[1][1].conj() * y;
    }
    // columns: T <- T G, U <- U G
    for m in [&mut *t, &mut *u] {
        for r in 0..n {
            let (x, y) = (m[(r, i)], m[(r, i + 1)]);
            m[(r, i)] = x * g[0][0] + y * g[1][0];
            m[(r, i + 1)] = x * g[0][1] + y * g[1][1];
        }
    }
}

/// Unitary `[v, w]` whose first column is the unit vector along `v`.
fn rotation_from(v1: Complex, v2: Complex) -> Option<[[Complex; 2]; 2]> {
    let norm = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let (c, s) = (v1 / norm, v2 / norm);
    Some([[c, -s.conj()], [s, c.conj()]])
}

/// Remove any 2x2 bumps left on the subdiagonal.
fn triangularize(u: &mut CMatrix, t: &mut CMatrix) {
    let n = t.nrows();
    let scale = t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 0..n.saturating_sub(1) {
        if t[(i + 1, i)].norm() <= f64::EPSILON * scale {
            t[(i + 1, i)] = Complex::new(0.0, 0.0);
            continue;
        }
        let (p, q, r, s) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let half = (p - s) * 0.5;
        let disc = (q * r + half * half).sqrt();
        let mu = (p + s) * 0.5 + disc;
        // eigenvector for mu: pick the better-conditioned of (mu - s, r) and (q, mu - p)
        let cand_a = (mu - s, r);
        let cand_b = (q, mu - p);
        let (v1, v2) = if cand_a.0.norm() + cand_a.1.norm() >= cand_b.0.norm() + cand_b.1.norm() {
            cand_a
        } else {
            cand_b
        };
        if let Some(g) = rotation_from(v1, v2) {
            apply_rotation(u, t, i, g);
        }
        t[(i + 1, i)] = Complex::new(0.0, 0.0);
    }
}

/// Complex Schur form of `A` with every eigenvalue selected by `in_cluster`
/// moved to the bottom-right by adjacent Givens swaps.
pub fn complex_schur_ordered(
    a: &Matrix,
    in_cluster: impl Fn(Complex) -> bool,
) -> Result<OrderedSchur> {
    let (u, t) = complex_schur(a)?;
    let flags: Vec<bool> = (0..t.nrows()).map(|i| in_cluster(t[(i, i)])).collect();
    Ok(reorder(u, t, flags))
}

fn reorder(mut u: CMatrix, mut t: CMatrix, mut flags: Vec<bool>) -> OrderedSchur {
    let n = t.nrows();
    let leading = flags.iter().filter(|&&f| !f).count();
    // bubble cluster entries downwards; each swap exchanges two adjacent diagonal entries
    for pass in 0..n {
        let mut swapped = false;
        for i in 0..n - 1 - pass.min(n - 1) {
            if flags[i] && !flags[i + 1] {
                let (a_ii, b) = (t[(i, i)], t[(i + 1, i + 1)]);
                let x = t[(i, i + 1)];
                // eigenvector of [[a, x], [0, b]] for b is (x, b - a)
                if let Some(g) = rotation_from(x, b - a_ii) {
                    apply_rotation(&mut u, &mut t, i, g);
                }
                t[(i + 1, i)] = Complex::new(0.0, 0.0);
                t[(i, i)] = b;
                t[(i + 1, i + 1)] = a_ii;
                flags.swap(i, i + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    OrderedSchur { u, t, leading }
}

/// Real orthonormal basis of `Im((λI - A)^n)`, the sum of the generalised
/// eigenspaces of all eigenvalues different from `λ`.
///
/// For non-real `λ` the returned real subspace also excludes the generalised
/// eigenspace of `conj(λ)`: the test against it is the conjunction of the
/// tests at `λ` and at `conj(λ)`, which are equivalent for real data.
pub fn power_image_basis(a: &Matrix, lambda: Complex, tol: &TolerancePolicy) -> Result<SubspaceBasis> {
    let n = ensure_square(a, "A")?;
    let radius = tol.eigen_match_tol * lambda.norm().max(1.0);
    let (u, t) = complex_schur(a)?;
    // select whole clusters so that a split multiple eigenvalue is removed entirely
    let diagonal = Spectrum::new((0..n).map(|i| t[(i, i)]).collect());
    let mut flags = vec![false; n];
    for cluster in diagonal.clusters(a.norm(), tol) {
        let reach = radius.max(cluster.spread);
        let c = cluster.center;
        if (c - lambda).norm() <= reach || (c - lambda.conj()).norm() <= reach {
            for &i in &cluster.members {
                flags[i] = true;
            }
        }
    }
    let ordered = reorder(u, t, flags);
    let k = ordered.leading;
    if k == n {
        return Ok(SubspaceBasis::full(n));
    }
    if k == 0 {
        return Ok(SubspaceBasis::zero(n));
    }
    let u1 = ordered.u.columns(0, k);
    // the leading block is conjugation-closed, so its real and imaginary parts span a
    // real subspace of dimension exactly k
    let mut real = Matrix::zeros(n, 2 * k);
    for j in 0..k {
        for i in 0..n {
            real[(i, j)] = u1[(i, j)].re;
            real[(i, k + j)] = u1[(i, j)].im;
        }
    }
    let d = super::svd(&real)?;
    Ok(SubspaceBasis::from_orthonormal(d.u.columns(0, k).into_owned(), radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    /// `(λI - A)^n` by repeated multiplication; only used as a cross-check.
    fn explicit_power_image(a: &Matrix, lambda: f64) -> SubspaceBasis {
        let n = a.nrows();
        let m = Matrix::identity(n, n) * lambda - a;
        let mut p = Matrix::identity(n, n);
        for _ in 0..n {
            p = &p * &m;
        }
        let basis = super::super::orthonormal_columns(&p, 1e-8 * p.norm().max(1.0));
        SubspaceBasis::from_orthonormal(basis, 0.0)
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, -1.0, 3.0]));
        let s = eigenvalues(&a).unwrap();
        assert!(s.matches(&Spectrum::from_real(&[1.0, 2.0, -1.0, 3.0]), 1e-12));
    }

    #[test]
    fn eigenvalues_of_rotation_are_imaginary() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let s = eigenvalues(&a).unwrap();
        let expected = Spectrum::new(vec![Complex::new(0.0, 2.0), Complex::new(0.0, -2.0)]);
        assert!(s.matches(&expected, 1e-12));
    }

    #[test]
    fn example2_spectrum() {
        let a = crate::catalog::example2().system.a().clone();
        let s = eigenvalues(&a).unwrap();
        assert!(s.matches(&Spectrum::from_real(&[-4.0, -1.0, -2.0, 2.0, 3.0]), 1e-9));
    }

    #[test]
    fn ordered_schur_reconstructs_and_orders() {
        let a = crate::catalog::example2().system.a().clone();
        let lambda = Complex::new(2.0, 0.0);
        let o = complex_schur_ordered(&a, |mu| (mu - lambda).norm() < 1e-6).unwrap();
        assert_eq!(o.leading, 4);
        let back = &o.u * &o.t * o.u.adjoint();
        let ac = a.map(|v| Complex::new(v, 0.0));
        assert!((back - ac).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12);
        assert!((o.t[(4, 4)] - lambda).norm() < 1e-9);
        for i in 0..5 {
            for j in 0..i {
                assert_eq!(o.t[(i, j)].norm(), 0.0);
            }
        }
    }

    #[test]
    fn example1_power_image_at_three() {
        let a = crate::catalog::example1(0).system.a().clone();
        let b = power_image_basis(&a, Complex::new(3.0, 0.0), &tol()).unwrap();
        assert_eq!(b.dimension(), 3);
        let oracle = explicit_power_image(&a, 3.0);
        assert!(b.max_principal_angle_sin(&oracle).unwrap() < 1e-10);
    }

    #[test]
    fn non_eigenvalue_gives_full_space() {
        let a = crate::catalog::example2().system.a().clone();
        let b = power_image_basis(&a, Complex::new(100.0, 0.0), &tol()).unwrap();
        assert_eq!(b.dimension(), 5);
    }

    #[test]
    fn jordan_block_is_annihilated() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = power_image_basis(&a, Complex::new(0.0, 0.0), &tol()).unwrap();
        assert_eq!(b.dimension(), 0);
    }

    #[test]
    fn example2_power_images_match_explicit_powers() {
        let a = crate::catalog::example2().system.a().clone();
        for lambda in [-4.0, -1.0, -2.0, 2.0, 3.0] {
            let b = power_image_basis(&a, Complex::new(lambda, 0.0), &tol()).unwrap();
            assert_eq!(b.dimension(), 4);
            let oracle = explicit_power_image(&a, lambda);
            assert!(b.max_principal_angle_sin(&oracle).unwrap() < 1e-8, "λ = {lambda}");
        }
    }

    #[test]
    fn complex_pair_is_removed_together() {
        // rotation block with eigenvalues 1 ± 2i, plus a stable real mode
        let a = Matrix::from_row_slice(3, 3, &[1.0, -2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, -5.0]);
        let b = power_image_basis(&a, Complex::new(1.0, 2.0), &tol()).unwrap();
        assert_eq!(b.dimension(), 1);
        let e3 = nalgebra::DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert!(b.residual(&e3) < 1e-12);
    }
}
