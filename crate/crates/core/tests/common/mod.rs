//! Exact-arithmetic oracles and random system generators shared by the integration tests.
#![allow(dead_code)]

use funcctl::criteria::{FunctionalTarget, SystemTriple};
use funcctl::numlin::{hstack, singular_values, Matrix, TolerancePolicy};
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

/// Rank over the rationals. Every finite `f64` is a rational, so this is exact for the stored matrix.
pub fn rank_exact(m: &Matrix) -> usize {
    let (rows, cols) = m.shape();
    let mut a: Vec<Vec<BigRational>> = (0..rows)
        .map(|i| (0..cols).map(|j| BigRational::from_float(m[(i, j)]).expect("finite entry")).collect())
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        for r in 0..rows {
            if r != rank && !a[r][col].is_zero() {
                let factor = &a[r][col] / &a[rank][col];
                for c in col..cols {
                    let delta = &factor * &a[rank][c];
                    a[r][c] -= delta;
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// `(B, AB, ..., A^{n-1} B)` in exact arithmetic for integer data.
pub fn krylov(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    let mut blocks = vec![b.clone()];
    for k in 1..n {
        blocks.push(a * &blocks[k - 1]);
    }
    let refs: Vec<&Matrix> = blocks.iter().collect();
    hstack(&refs)
}

/// Does the column space of `cols` lie in that of `space`? Exact.
pub fn contained_exact(space: &Matrix, cols: &Matrix) -> bool {
    if space.ncols() == 0 {
        return rank_exact(cols) == 0;
    }
    rank_exact(&hstack(&[space, cols])) == rank_exact(space)
}

/// `(λ I - A)^n` for an integer `λ`; entries stay integers.
pub fn shifted_power(a: &Matrix, lambda: f64) -> Matrix {
    let n = a.nrows();
    let m = Matrix::identity(n, n) * lambda - a;
    let mut p = Matrix::identity(n, n);
    for _ in 0..n {
        p = &p * &m;
    }
    p
}

pub fn is_integer(m: &Matrix) -> bool {
    m.iter().all(|v| v.fract() == 0.0 && v.abs() < 2f64.powi(52))
}

pub fn cond(m: &Matrix) -> f64 {
    let s = singular_values(m);
    s[0] / s[s.len() - 1]
}

fn int_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: i32, hi: i32) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..=hi) as f64)
}

/// Unimodular integer matrix and its integer inverse, condition number at most 100.
pub fn unimodular(rng: &mut ChaCha8Rng, n: usize) -> (Matrix, Matrix) {
    loop {
        let mut t = Matrix::identity(n, n);
        let mut inv = Matrix::identity(n, n);
        for _ in 0..(2 * n) {
            if n < 2 {
                break;
            }
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            // t <- E t with E = I + s e_i e_j^T, inverse picks up E^{-1} on the right
            let row_j = t.row(j).into_owned();
            let mut row_i = t.row_mut(i);
            row_i += row_j * s;
            let col_i = inv.column(i).into_owned();
            let mut col_j = inv.column_mut(j);
            col_j -= col_i * s;
        }
        if cond(&t) <= 100.0 {
            debug_assert!((&t * &inv - Matrix::identity(n, n)).abs().max() == 0.0);
            return (t, inv);
        }
    }
}

/// Plant with integer entries in controllability staircase form, hidden by a
/// unimodular change of basis `x = T⁻¹ x̃`.
pub struct Planted {
    pub sys: SystemTriple,
    pub f: Matrix,
    /// Eigenvalues of the uncontrollable block (integers).
    pub uncontrollable_modes: Vec<f64>,
    /// Dimension of the controllable subspace.
    pub nc: usize,
}

fn staircase_pair(rng: &mut ChaCha8Rng, n: usize, nc: usize, m: usize) -> (Matrix, Matrix, Vec<f64>) {
    let mut a = int_matrix(rng, n, n, -2, 2);
    let mut modes = Vec::new();
    for i in nc..n {
        for j in 0..nc {
            a[(i, j)] = 0.0;
        }
        for j in nc..i {
            a[(i, j)] = 0.0;
        }
        let d = rng.gen_range(-3..=2) as f64;
        a[(i, i)] = d;
        modes.push(d);
    }
    let mut b = int_matrix(rng, n, m, -2, 2);
    for i in nc..n {
        for j in 0..m {
            b[(i, j)] = 0.0;
        }
    }
    (a, b, modes)
}

/// Random system in hidden Kalman form. `F` rows lie in the planted
/// controllable subspace with probability one half, otherwise they are generic.
pub fn planted(rng: &mut ChaCha8Rng) -> Planted {
    loop {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=2);
        let p = rng.gen_range(1..=n.min(3));
        let nc = rng.gen_range(0..=n);
        let (a0, b0, modes) = staircase_pair(rng, n, nc, m);
        // the staircase must be exact: (A11, B1) controllable
        if rank_exact(&krylov(&a0, &b0)) != nc {
            continue;
        }
        let (t, tinv) = unimodular(rng, n);
        let a = &tinv * &a0 * &t;
        let b = &tinv * &b0;
        let c = int_matrix(rng, p, n, -2, 2);
        if rank_exact(&c) < p {
            continue;
        }
        let r = rng.gen_range(1..=n.min(3));
        let f = if nc > 0 && rng.gen_bool(0.5) {
            // rows spanned by the planted controllable directions T⁻¹ e_1 .. T⁻¹ e_nc
            let g = int_matrix(rng, r.min(nc), nc, -2, 2);
            (tinv.columns(0, nc) * g.transpose()).transpose()
        } else {
            int_matrix(rng, r, n, -2, 2)
        };
        if rank_exact(&f) < f.nrows() {
            continue;
        }
        let Ok(sys) = SystemTriple::new(a.clone(), b, c) else {
            continue;
        };
        return Planted { sys, f, uncontrollable_modes: modes, nc };
    }
}

pub fn target(f: &Matrix, n: usize) -> FunctionalTarget {
    FunctionalTarget::new(f.clone(), n, &tol()).expect("full row rank")
}

/// Exact verdicts computed from integer data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactVerdicts {
    pub controllable: bool,
    pub functional_controllable: bool,
    pub target_output_controllable: bool,
    pub functional_stabilizable: bool,
    pub stabilizable: bool,
}

/// Exact oracle for a staircase plant whose `(A11, B1)` is controllable: unstable modes
/// outside `modes` are then controllable, so only the planted integer modes matter.
pub fn exact_verdicts(a: &Matrix, b: &Matrix, f: &Matrix, modes: &[f64]) -> ExactVerdicts {
    let n = a.nrows();
    let k = krylov(a, b);
    let rank_k = rank_exact(&k);
    let ft = f.transpose();
    let unstable: Vec<f64> = modes.iter().copied().filter(|&d| d >= 0.0).collect();
    let functional_stabilizable = unstable.iter().all(|&l| {
        let space = hstack(&[&shifted_power(a, l), &k]);
        contained_exact(&space, &ft)
    });
    ExactVerdicts {
        controllable: rank_k == n,
        functional_controllable: contained_exact(&k, &ft),
        target_output_controllable: rank_exact(&(f * &k)) == f.nrows(),
        functional_stabilizable,
        stabilizable: unstable.is_empty(),
    }
}

pub fn random_stable_poles(rng: &mut ChaCha8Rng, count: usize, allow_complex: bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    while out.len() < count {
        let re = -1.0 - 3.0 * rng.gen::<f64>();
        if allow_complex && count - out.len() >= 2 && rng.gen_bool(0.3) {
            let im = 0.5 + rng.gen::<f64>();
            out.push((re, im));
            out.push((re, -im));
        } else {
            out.push((re, 0.0));
        }
    }
    out
}

/// Plant with `F A = M F` in hidden integer coordinates, so the controller rank
/// condition holds with `R1` empty and the reduced pair is controllable.
/// `q` fixes the number of functional rows.
pub fn invariant_functional_system(rng: &mut ChaCha8Rng, q: Option<usize>) -> (SystemTriple, Matrix) {
    loop {
        let n = rng.gen_range(2..=6);
        let q = q.unwrap_or_else(|| rng.gen_range(1..=n.min(3))).min(n - 1);
        let m = rng.gen_range(1..=2);
        let p = rng.gen_range(1..=n.min(3));
        let mut a0 = int_matrix(rng, n, n, -2, 2);
        for i in 0..q {
            for j in q..n {
                a0[(i, j)] = 0.0;
            }
        }
        let b0 = int_matrix(rng, n, m, -2, 2);
        let (t, tinv) = unimodular(rng, n);
        let a = &tinv * &a0 * &t;
        let b = &tinv * &b0;
        let c = int_matrix(rng, p, n, -2, 2);
        let f = t.rows(0, q).into_owned();
        let reduced = krylov(&a0.view((0, 0), (q, q)).into_owned(), &b0.rows(0, q).into_owned());
        if rank_exact(&reduced) < q || rank_exact(&c) < p {
            continue;
        }
        if let Ok(sys) = SystemTriple::new(a, b, c) {
            return (sys, f);
        }
    }
}

/// Like [`random_stable_poles`] but every two poles are at least `gap` apart.
/// Nearly coincident poles make single-input placement ill-conditioned.
pub fn separated_stable_poles(rng: &mut ChaCha8Rng, count: usize, allow_complex: bool, gap: f64) -> Vec<(f64, f64)> {
    loop {
        let poles = random_stable_poles(rng, count, allow_complex);
        let ok = poles.iter().enumerate().all(|(i, p)| {
            poles[i + 1..].iter().all(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() >= gap)
        });
        if ok {
            return poles;
        }
    }
}

/// Two conjugate-closed pole sets whose union keeps every pair `gap` apart.
pub fn disjoint_pole_sets(rng: &mut ChaCha8Rng, first: usize, second: usize, gap: f64) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    loop {
        let mut all = separated_stable_poles(rng, first + second, true, gap);
        // conjugate pairs are adjacent; a pair cut in half is fixed by moving a later real pole in front of it
        if first > 0 && all[first - 1].1 > 0.0 {
            let Some(i) = (first..all.len()).find(|&i| all[i].1 == 0.0) else {
                continue;
            };
            let real = all.remove(i);
            all.insert(first - 1, real);
        }
        let rest = all.split_off(first);
        return (all, rest);
    }
}
