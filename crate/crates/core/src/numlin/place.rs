use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;


use super::{
    controllability_subspace, eigenvalues, ensure_finite, ensure_square, orthogonal_complement, Complex, Matrix,
    Spectrum, TolerancePolicy,
};
use crate::error::{Error, Result};

const RANDOM_ATTEMPTS: u64 = 24;
const SEED: u64 = 0x0b5e_77ab;
const KNV_SWEEPS: usize = 40;
const KNV_RESTARTS: usize = 8;

type CMatrix = DMatrix<Complex>;

fn check_poles(n: usize, poles: &Spectrum, tol: &TolerancePolicy) -> Result<()> {
    if poles.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} poles requested for a system of order {n}",
            poles.len()
        )));
    }
    if poles.values().iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
        return Err(Error::NonFinite("poles"));
    }
    if let Some(p) = poles.first_unpaired(tol.eigen_match_tol) {
        return Err(Error::UnpairedComplexPole { re: p.re, im: p.im });
    }
    Ok(())
}

fn check_pair(a: &Matrix, b: &Matrix) -> Result<usize> {
    let n = ensure_square(a, "A")?;
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "input matrix has {} rows, state dimension is {n}",
            b.nrows()
        )));
    }
    ensure_finite(a, "A")?;
    ensure_finite(b, "B")?;
    Ok(n)
}

/// Single-input gain `k` (1 x n) with `eig(A - b k) = poles`.
///
/// Ackermann's formula evaluated in controller-Hessenberg coordinates: an
/// orthogonal `Q` maps `b` to `β e_1` and `A` to upper Hessenberg `H`, where
/// the controllability matrix is triangular and `k_H = e_n^T p(H) / (β ∏ h_{i+1,i})`.
/// No Krylov matrix is formed or inverted.
pub fn ackermann(a: &Matrix, b: &Matrix, poles: &Spectrum, tol: &TolerancePolicy) -> Result<Matrix> {
    let n = check_pair(a, b)?;
    if b.ncols() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "single-input placement needs one input column, got {}",
            b.ncols()
        )));
    }
    check_poles(n, poles, tol)?;
    let reach = controllability_subspace(a, b, tol)?;
    if reach.dimension() < n {
        return Err(Error::Uncontrollable {
            dimension: reach.dimension(),
            order: n,
        });
    }
    let (q, h, beta) = controller_hessenberg(a, b);
    let mut pivot = beta;
    for i in 0..n - 1 {
        pivot *= h[(i + 1, i)];
    }
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::Uncontrollable {
            dimension: reach.dimension(),
            order: n,
        });
    }
    // v = e_n^T p(H), one real factor per real pole or conjugate pair
    let mut v = Matrix::zeros(1, n);
    v[(0, n - 1)] = 1.0;
    let mut pending: Vec<Complex> = poles.values().to_vec();
    while let Some(p) = pending.pop() {
        if p.im == 0.0 {
            v = &v * &h - &v * p.re;
            continue;
        }
        let mate = pending
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - p.conj()).norm().total_cmp(&(y.1 - p.conj()).norm()))
            .map(|(i, _)| i)
            .ok_or(Error::UnpairedComplexPole { re: p.re, im: p.im })?;
        let mate = pending.remove(mate);
        let re = 0.5 * (p.re + mate.re);
        let norm2 = 0.5 * (p.norm_sqr() + mate.norm_sqr());
        let vh = &v * &h;
        v = &vh * &h - vh * (2.0 * re) + &v * norm2;
    }
    Ok(v / pivot * q)
}

/// Orthogonal `Q` with `Q b = β e_1` and `Q A Q^T` upper Hessenberg.
fn controller_hessenberg(a: &Matrix, b: &Matrix) -> (Matrix, Matrix, f64) {
    let n = a.nrows();
    let mut q = Matrix::identity(n, n);
    let mut h = a.clone();
    let mut lead = b.column(0).into_owned();
    // step 0 reflects b, step k >= 1 clears column k - 1 of H below the subdiagonal
    for k in 0..n.saturating_sub(1) {
        let x = if k == 0 { lead.clone() } else { h.column(k - 1).rows(k, n - k).into_owned() };
        let Some(p) = householder(&x, n) else {
            continue;
        };
        h = &p * h * &p;
        q = &p * q;
        lead = &p * lead;
    }
    (q, h, lead[0])
}

/// Reflector acting on the trailing `x.len()` coordinates of `R^n` that maps `x` onto its first axis.
fn householder(x: &super::Vector, n: usize) -> Option<Matrix> {
    let alpha = x.norm();
    if alpha == 0.0 {
        return None;
    }
    let mut w = x.clone();
    w[0] += alpha.copysign(x[0]);
    let w = w.normalize();
    let mut full = super::Vector::zeros(n);
    full.rows_mut(n - x.len(), x.len()).copy_from(&w);
    Some(Matrix::identity(n, n) - &full * full.transpose() * 2.0)
}

fn placement_error(a: &Matrix, b: &Matrix, k: &Matrix, poles: &Spectrum) -> f64 {
    match eigenvalues(&(a - b * k)) {
        Ok(s) => s.containment_error(poles).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    }
}

/// Gain `K` (m x n) with `eig(A - B K) = poles`.
///
/// `B` is first compressed to an orthonormal basis of its range. With one
/// remaining direction Ackermann's formula is used directly. Otherwise the
/// closed-loop eigenvectors are chosen for conditioning (Kautsky, Nichols and
/// Van Dooren, method 0). If that fails the pair is reduced to single-input
/// form `(A - U K0, U g)` with seeded random `g` and `K0`, keeping the
/// attempt with the smallest spectrum error.
pub fn place_poles(a: &Matrix, b: &Matrix, poles: &Spectrum, tol: &TolerancePolicy) -> Result<Matrix> {
    let n = check_pair(a, b)?;
    check_poles(n, poles, tol)?;
    let reach = controllability_subspace(a, b, tol)?;
    if reach.dimension() < n {
        return Err(Error::Uncontrollable {
            dimension: reach.dimension(),
            order: n,
        });
    }
    let m = b.ncols();
    let d = super::svd(b)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    // same scale as the controllability decision, so rounding-level directions are dropped
    let cutoff = tol.zero_threshold(smax);
    let keep = d.s.iter().take_while(|&&s| s > cutoff).count();
    let uk = d.u.columns(0, keep).into_owned();
    // K = V_k S_k^{-1} K'
    let mut back = Matrix::zeros(m, keep);
    for j in 0..keep {
        back.set_column(j, &(d.v.column(j) / d.s[j]));
    }

    let k_reduced = if keep == 1 {
        ackermann(a, &uk, poles, tol)?
    } else {
        match robust_placement(a, &uk, poles, tol) {
            Some(k) if placement_error(a, &uk, &k, poles) <= 1e-3 * tol.eigen_match_tol => k,
            _ => cyclic_placement(a, &uk, poles, tol)?,
        }
    };
    let gain = back * k_reduced;
    let err = placement_error(a, b, &gain, poles);
    if !(err <= tol.eigen_match_tol) {
        return Err(Error::PlacementInaccurate { mismatch: err });
    }
    Ok(gain)
}

fn cyclic_placement(a: &Matrix, u: &Matrix, poles: &Spectrum, tol: &TolerancePolicy) -> Result<Matrix> {
    let n = a.nrows();
    let m = u.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let scale = a.norm().max(1.0);
    let mut best: Option<(f64, Matrix)> = None;
    for attempt in 0..RANDOM_ATTEMPTS {
        let g = super::Vector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let g = &g / g.norm();
        // first half: no feedback pre-shaping; afterwards a random K0 to make A - U K0 cyclic
        let k0 = if attempt < RANDOM_ATTEMPTS / 2 {
            Matrix::zeros(m, n)
        } else {
            Matrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0) * scale)
        };
        let a0 = a - u * &k0;
        let bg = u * &g;
        let bg = Matrix::from_column_slice(n, 1, bg.as_slice());
        let Ok(k1) = ackermann(&a0, &bg, poles, tol) else {
            continue;
        };
        let gain = k0 + Matrix::from_column_slice(m, 1, g.as_slice()) * k1;
        let err = placement_error(a, u, &gain, poles);
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, gain));
        }
        if err <= 1e-3 * tol.eigen_match_tol {
            break;
        }
    }
    best.map(|(_, k)| k).ok_or(Error::PlacementInaccurate {
        mismatch: f64::INFINITY,
    })
}

fn to_faer(m: &CMatrix) -> faer::Mat<Complex> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Orthonormal basis of `{v : M v = 0}` for a full-row-rank `M`.
fn complex_null_space(m: &CMatrix) -> Option<CMatrix> {
    let (r, n) = m.shape();
    if r == 0 {
        return Some(CMatrix::identity(n, n));
    }
    let dec = to_faer(m).svd().ok()?;
    let v = dec.V();
    Some(CMatrix::from_fn(n, n - r, |i, j| v[(i, r + j)]))
}

/// Unit vector orthogonal to every column of `x` (`n x (n-1)`).
fn orthogonal_direction(x: &CMatrix) -> Option<nalgebra::DVector<Complex>> {
    let n = x.nrows();
    let dec = to_faer(&x.adjoint()).svd().ok()?;
    let v = dec.V();
    Some(nalgebra::DVector::from_fn(n, |i, _| v[(i, n - 1)]))
}

/// Real unit vector from a vector of a real subspace's complexification: the
/// phase of the largest entry is removed and the real part kept.
fn realify(col: &nalgebra::DVector<Complex>) -> nalgebra::DVector<Complex> {
    let Some((k, _)) = col.iter().enumerate().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())) else {
        return col.clone();
    };
    if col[k].norm() == 0.0 {
        return col.clone();
    }
    let phase = col[k].conj() / col[k].norm();
    let real = col.map(|z| Complex::new((z * phase).re, 0.0));
    let norm = real.norm();
    if norm == 0.0 { real } else { real / Complex::new(norm, 0.0) }
}

/// Eigenvectors from `S(λ) = ker(U⊥ᵀ (A - λI))`, updated one at a time to be
/// as orthogonal as possible to the rest; then `K V = W` with
/// `W = Uᵀ (A - λI) V`. Returns `None` when a pole repeats more than `rank U` times.
fn robust_placement(a: &Matrix, u: &Matrix, poles: &Spectrum, tol: &TolerancePolicy) -> Option<Matrix> {
    let n = a.nrows();
    let m = u.ncols();
    let uperp = orthogonal_complement(u).map(|v| Complex::new(v, 0.0));
    let ac = a.map(|v| Complex::new(v, 0.0));
    let eye = CMatrix::identity(n, n);

    // one representative per conjugate pair, the partner mirrors it
    let mut order: Vec<Complex> = Vec::new();
    let mut pending: Vec<Complex> = poles.values().to_vec();
    while let Some(p) = pending.pop() {
        if p.im.abs() <= tol.eigen_match_tol {
            order.push(Complex::new(p.re, 0.0));
            continue;
        }
        let mate = pending
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - p.conj()).norm().total_cmp(&(y.1 - p.conj()).norm()))?
            .0;
        pending.remove(mate);
        let upper = Complex::new(p.re, p.im.abs());
        order.push(upper);
        order.push(upper.conj());
    }
    let repeats = |p: Complex| order.iter().filter(|q| (*q - p).norm() <= tol.eigen_match_tol).count();
    if order.iter().any(|&p| repeats(p) > m) {
        return None;
    }

    let mut bases = Vec::with_capacity(n);
    for &p in &order {
        let s = complex_null_space(&(uperp.adjoint() * (&ac - &eye * p)))?;
        if s.ncols() != m {
            return None;
        }
        bases.push(s);
    }
    // a few deterministic restarts; the sweeps only find a local optimum
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b6e76);
    let mut best: Option<(f64, Matrix)> = None;
    for attempt in 0..KNV_RESTARTS {
        let mut v = CMatrix::zeros(n, n);
        for i in 0..n {
            // distinct starting columns for repeated poles
            let earlier = order[..i].iter().filter(|q| (**q - order[i]).norm() <= tol.eigen_match_tol).count();
            if order[i].im < 0.0 {
                let c = v.column(i - 1).map(|z| z.conj());
                v.set_column(i, &c);
            } else {
                let start = if attempt == 0 {
                    bases[i].column(earlier % m).into_owned()
                } else {
                    let c = nalgebra::DVector::from_fn(m, |_, _| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                    &bases[i] * c
                };
                v.set_column(i, &if order[i].im == 0.0 { realify(&start) } else { start });
            }
        }
        if let Some((cond, k)) = knv_sweeps(a, u, &ac, &bases, &order, v) {
            if best.as_ref().map_or(true, |(c, _)| cond < *c) {
                best = Some((cond, k));
            }
        }
    }
    best.map(|(_, k)| k)
}

/// KNV method-0 sweeps from the starting eigenvectors `v`, then `K = W V⁻¹`.
/// Returns the eigenvector condition number alongside the gain.
fn knv_sweeps(a: &Matrix, u: &Matrix, ac: &CMatrix, bases: &[CMatrix], order: &[Complex], mut v: CMatrix) -> Option<(f64, Matrix)> {
    let n = a.nrows();
    let m = u.ncols();
    let eye = CMatrix::identity(n, n);
    for _ in 0..KNV_SWEEPS {
        for i in 0..n {
            if order[i].im < 0.0 {
                continue;
            }
            let paired = order[i].im > 0.0;
            let others: Vec<usize> = (0..n).filter(|&j| j != i && !(paired && j == i + 1)).collect();
            let x = CMatrix::from_fn(n, others.len(), |r, c| v[(r, others[c])]);
            let s = &bases[i];
            let candidate = if !paired {
                let y = orthogonal_direction(&x)?;
                s * (s.adjoint() * y)
            } else {
                // Tits-Yang rank-2 step: the complement of the other columns is a real
                // plane (q1, q2); pick the direction of S(λ) maximising |det| of the real
                // eigenvector matrix and project the current vector onto it
                let q = complex_null_space(&x.adjoint())?;
                let parts = Matrix::from_fn(n, 2 * q.ncols(), |r, c| {
                    let z = q[(r, c / 2)];
                    if c % 2 == 0 { z.re } else { z.im }
                });
                let plane = super::svd(&parts).ok()?.u;
                let w = nalgebra::DVector::from_fn(n, |r, _| Complex::new(plane[(r, 0)], plane[(r, 1)]));
                // S^H (w w^H - w̄ w^T) S = i H with H Hermitian
                let sw = s.adjoint() * &w;
                let swc = s.adjoint() * w.map(|z| z.conj());
                let skew = &sw * sw.adjoint() - &swc * swc.adjoint();
                let herm = skew.map(|z| Complex::new(z.im, -z.re));
                let eig = herm.symmetric_eigen();
                let mut idx: Vec<usize> = (0..m).collect();
                idx.sort_by(|&p, &q| eig.eigenvalues[q].abs().total_cmp(&eig.eigenvalues[p].abs()));
                let top = eig.eigenvalues[idx[0]].abs();
                let tied = m > 1 && (top - eig.eigenvalues[idx[1]].abs()).abs() <= 1e-8 * top.max(f64::MIN_POSITIVE);
                let dirs = CMatrix::from_fn(m, if tied { 2 } else { 1 }, |r, c| eig.eigenvectors[(r, idx[c])]);
                let basis = s * dirs;
                &basis * (basis.adjoint() * v.column(i))
            };
            let norm = candidate.norm();
            if norm <= 1e-12 {
                continue;
            }
            let candidate = candidate / Complex::new(norm, 0.0);
            // real poles keep real eigenvectors
            let candidate = if paired { candidate } else { realify(&candidate) };
            if candidate.norm() <= 1e-12 {
                continue;
            }
            v.set_column(i, &candidate);
            if paired {
                v.set_column(i + 1, &candidate.map(|z| z.conj()));
            }
        }
    }

    // real eigenvector matrix and right-hand side
    let mut vr = Matrix::zeros(n, n);
    let mut wr = Matrix::zeros(m, n);
    let mut i = 0;
    while i < n {
        let p = order[i];
        let col = v.column(i).into_owned();
        let w = u.map(|x| Complex::new(x, 0.0)).adjoint() * ((ac - &eye * p) * &col);
        if p.im == 0.0 {
            for r in 0..n {
                vr[(r, i)] = col[r].re;
            }
            for r in 0..m {
                wr[(r, i)] = w[r].re;
            }
            i += 1;
        } else {
            for r in 0..n {
                vr[(r, i)] = col[r].re;
                vr[(r, i + 1)] = col[r].im;
            }
            for r in 0..m {
                wr[(r, i)] = w[r].re;
                wr[(r, i + 1)] = w[r].im;
            }
            i += 2;
        }
    }
    let sv = vr.singular_values();
    let cond = sv.max() / sv.min();
    let inv = vr.try_inverse()?;
    let k = wr * inv;
    (cond.is_finite() && k.iter().all(|x| x.is_finite())).then_some((cond, k))
}
