//! Yes/no system-property tests: classical PBH properties, target output
//! controllability, and the functional controllability, stabilizability,
//! observability and detectability criteria.
//!
//! Every functional test compares the row space of `F` with an invariant
//! subspace. `F` is replaced by an orthonormal basis of its row space first,
//! so verdicts do not depend on row scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{
    controllability_subspace, eigenvalues, ensure_finite, hstack, numerical_rank,
    observability_subspace, orthonormal_columns, power_image_basis, singular_values, Complex,
    Matrix, SubspaceBasis, TolerancePolicy,
};

/// Plant `x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemTriple {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl SystemTriple {
    /// Validates shapes, finiteness, and full row rank of `C`.
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        Self::with_tolerance(a, b, c, &TolerancePolicy::default())
    }

    pub fn with_tolerance(a: Matrix, b: Matrix, c: Matrix, tol: &TolerancePolicy) -> Result<Self> {
        let sys = Self::unchecked(a, b, c)?;
        let rank = numerical_rank(&sys.c, tol);
        if rank < sys.c.nrows() {
            return Err(Error::RankDeficient {
                what: "output matrix",
                rank,
                expected: sys.c.nrows(),
            });
        }
        Ok(sys)
    }

    /// Shape and finiteness checks only.
    fn unchecked(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let n = crate::numlin::ensure_square(&a, "A")?;
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, expected {n} rows and at least one column",
                b.nrows(),
                b.ncols()
            )));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "C is {}x{}, expected {n} columns and at least one row",
                c.nrows(),
                c.ncols()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&c, "C")?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// `(A^T, C^T, B^T)`. The dual's output matrix is `B^T`, which need not have
    /// full row rank; no rank check is applied here.
    pub fn dual(&self) -> SystemTriple {
        SystemTriple {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
        }
    }
}

/// Full-row-rank functional `z = F x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTarget {
    f: Matrix,
}

impl FunctionalTarget {
    pub fn new(f: Matrix, states: usize, tol: &TolerancePolicy) -> Result<Self> {
        if f.ncols() != states || f.nrows() == 0 || f.nrows() > states {
            return Err(Error::DimensionMismatch(format!(
                "F is {}x{}, expected 1..={states} rows and {states} columns",
                f.nrows(),
                f.ncols()
            )));
        }
        ensure_finite(&f, "F")?;
        let rank = numerical_rank(&f, tol);
        if rank < f.nrows() {
            return Err(Error::RankDeficient {
                what: "functional matrix",
                rank,
                expected: f.nrows(),
            });
        }
        Ok(Self { f })
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn rows(&self) -> usize {
        self.f.nrows()
    }

    /// Orthonormal basis of the row space of `F`, as columns.
    pub fn row_basis(&self) -> Matrix {
        orthonormal_columns(&self.f.transpose(), 0.0)
    }
}

fn check_conformal(sys: &SystemTriple, f: &FunctionalTarget) -> Result<()> {
    if f.f.ncols() != sys.states() {
        return Err(Error::DimensionMismatch(format!(
            "F has {} columns, system has {} states",
            f.f.ncols(),
            sys.states()
        )));
    }
    Ok(())
}

/// Numerical evidence behind one verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub test: String,
    /// Rank of the matrix including the tested block.
    pub rank_with: usize,
    /// Rank of the reference matrix.
    pub rank_without: usize,
    /// The number compared against `threshold` to decide the verdict.
    pub deciding_value: f64,
    pub threshold: f64,
    /// Deciding value within a factor of ten of the threshold.
    pub marginal: bool,
    pub holds: bool,
}

impl Evidence {
    fn new(test: impl Into<String>, rank_with: usize, rank_without: usize, value: f64, threshold: f64, holds: bool) -> Self {
        let marginal = value > threshold / 10.0 && value < threshold * 10.0;
        Self {
            test: test.into(),
            rank_with,
            rank_without,
            deciding_value: value,
            threshold,
            marginal,
            holds,
        }
    }

    /// Conjunction over a quantifier: the first failing instance, else the
    /// passing instance closest to its threshold.
    fn all(test: &str, parts: Vec<Evidence>, vacuous_rank: usize) -> Evidence {
        if let Some(fail) = parts.iter().find(|e| !e.holds) {
            return Evidence { test: test.into(), ..fail.clone() };
        }
        let closest = parts.into_iter().max_by(|x, y| {
            (x.deciding_value / x.threshold).total_cmp(&(y.deciding_value / y.threshold))
        });
        match closest {
            Some(e) => Evidence { test: test.into(), ..e },
            None => Evidence::new(test, vacuous_rank, vacuous_rank, 0.0, 1.0, true),
        }
    }
}

/// Do all columns of `cols` lie in `space`?
fn containment(test: &str, space: &SubspaceBasis, cols: &Matrix, tol: &TolerancePolicy) -> Evidence {
    let threshold = tol.absolute_zero_tol;
    let worst = cols
        .column_iter()
        .map(|c| space.residual(&c.into_owned()))
        .fold(0.0, f64::max);
    let with = space.extend(cols, threshold).dimension();
    Evidence::new(test, with, space.dimension(), worst, threshold, worst <= threshold)
}

/// Centers of the eigenvalue clusters with `Re >= -eigen_match_tol`,
/// conjugate pairs represented by the member with `Im >= 0`.
fn unstable_eigenvalues(a: &Matrix, tol: &TolerancePolicy) -> Result<Vec<Complex>> {
    let spectrum = eigenvalues(a)?;
    let mut reps: Vec<Complex> = Vec::new();
    for cluster in spectrum.clusters(a.norm(), tol) {
        let v = cluster.center;
        if v.re < -tol.eigen_match_tol || v.im < 0.0 {
            continue;
        }
        reps.push(v);
    }
    Ok(reps)
}

/// PBH rank of `(λI - A | B)` over the complex field, via the real embedding.
fn pbh(a: &Matrix, b: &Matrix, lambda: Complex, tol: &TolerancePolicy) -> Evidence {
    let n = a.nrows();
    let re = Matrix::identity(n, n) * lambda.re - a;
    let im = Matrix::identity(n, n) * lambda.im;
    let block = hstack(&[&re, b]);
    let (rank, value, threshold) = if lambda.im == 0.0 {
        rank_above(&block, tol, n)
    } else {
        let zb = Matrix::zeros(n, b.ncols());
        let top = hstack(&[&re, &(-&im), b, &zb]);
        let bottom = hstack(&[&im, &re, &zb, b]);
        let (r, v, t) = rank_above(&crate::numlin::vstack(&[&top, &bottom]), tol, 2 * n);
        (r / 2, v, t)
    };
    let label = format!("pbh at {}{:+}i", lambda.re, lambda.im);
    Evidence::new(label, rank, n, value, threshold, rank == n)
}

/// Rank with cutoff `zero_threshold(σ_max)`, the `k`-th singular value, and the cutoff.
fn rank_above(m: &Matrix, tol: &TolerancePolicy, k: usize) -> (usize, f64, f64) {
    let s = singular_values(m);
    let threshold = tol.zero_threshold(s.first().copied().unwrap_or(0.0));
    let rank = s.iter().filter(|&&v| v > threshold).count();
    let value = s.get(k.saturating_sub(1)).copied().unwrap_or(0.0);
    (rank, value, threshold)
}

/// Classical verdicts of the pairs `(A, B)` and `(A, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalProperties {
    pub controllable: bool,
    pub stabilizable: bool,
    pub observable: bool,
    pub detectable: bool,
}

fn controllable_evidence(a: &Matrix, b: &Matrix, tol: &TolerancePolicy) -> Result<Evidence> {
    let n = a.nrows();
    let q = controllability_subspace(a, b, tol)?;
    let mut e = Evidence::new("controllable", q.dimension(), n, q.tol_used(), q.tol_used(), q.dimension() == n);
    // the Krylov cutoff already decided; dimensions carry no margin information
    e.marginal = false;
    Ok(e)
}

fn stabilizable_evidence(a: &Matrix, b: &Matrix, tol: &TolerancePolicy) -> Result<Evidence> {
    let parts = unstable_eigenvalues(a, tol)?
        .into_iter()
        .map(|l| pbh(a, b, l, tol))
        .collect();
    Ok(Evidence::all("stabilizable", parts, a.nrows()))
}

pub fn classical_properties(sys: &SystemTriple, tol: &TolerancePolicy) -> Result<ClassicalProperties> {
    let d = sys.dual();
    Ok(ClassicalProperties {
        controllable: controllable_evidence(sys.a(), sys.b(), tol)?.holds,
        stabilizable: stabilizable_evidence(sys.a(), sys.b(), tol)?.holds,
        observable: controllable_evidence(d.a(), d.b(), tol)?.holds,
        detectable: stabilizable_evidence(d.a(), d.b(), tol)?.holds,
    })
}

fn target_output_evidence(sys: &SystemTriple, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<Evidence> {
    check_conformal(sys, f)?;
    let q = controllability_subspace(sys.a(), sys.b(), tol)?;
    let fo = f.row_basis().transpose();
    let r = f.rows();
    let threshold = tol.absolute_zero_tol;
    if q.dimension() == 0 {
        return Ok(Evidence::new("target_output_controllable", 0, r, 0.0, threshold, false));
    }
    let s = singular_values(&(fo * q.basis()));
    let rank = s.iter().filter(|&&v| v > threshold).count();
    let value = s.get(r - 1).copied().unwrap_or(0.0);
    Ok(Evidence::new("target_output_controllable", rank, r, value, threshold, rank == r))
}

fn functional_controllable_evidence(a: &Matrix, b: &Matrix, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<Evidence> {
    let q = controllability_subspace(a, b, tol)?;
    Ok(containment("functional_controllable", &q, &f.row_basis(), tol))
}

fn functional_stabilizable_evidence(a: &Matrix, b: &Matrix, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<Evidence> {
    let q = controllability_subspace(a, b, tol)?;
    let cols = f.row_basis();
    let mut parts = Vec::new();
    for lambda in unstable_eigenvalues(a, tol)? {
        let v = power_image_basis(a, lambda, tol)?;
        let space = v.extend(q.basis(), tol.absolute_zero_tol);
        let label = format!("functional_stabilizable at {}{:+}i", lambda.re, lambda.im);
        parts.push(containment(&label, &space, &cols, tol));
    }
    Ok(Evidence::all("functional_stabilizable", parts, a.nrows()))
}

/// `rank(F C_(A,B)) = rank F`.
pub fn is_target_output_controllable(sys: &SystemTriple, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<bool> {
    Ok(target_output_evidence(sys, f, tol)?.holds)
}

/// Row space of `F` inside the controllable subspace.
pub fn is_functional_controllable(sys: &SystemTriple, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<bool> {
    check_conformal(sys, f)?;
    Ok(functional_controllable_evidence(sys.a(), sys.b(), f, tol)?.holds)
}

/// Row space of `F` inside `Im((λI - A)^n) + Im C_(A,B)` for every eigenvalue with `Re λ >= 0`.
pub fn is_functional_stabilizable(sys: &SystemTriple, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<bool> {
    check_conformal(sys, f)?;
    Ok(functional_stabilizable_evidence(sys.a(), sys.b(), f, tol)?.holds)
}

/// Row space of `F` inside the row space of the observability matrix.
pub fn is_functional_observable(sys: &SystemTriple, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<bool> {
    check_conformal(sys, f)?;
    let o = observability_subspace(sys.a(), sys.c(), tol)?;
    Ok(containment("functional_observable", &o, &f.row_basis(), tol).holds)
}

/// Row-space form of the stabilizability test on the dual pair `(A^T, C^T)`.
pub fn is_functional_detectable(sys: &SystemTriple, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<bool> {
    check_conformal(sys, f)?;
    let d = sys.dual();
    Ok(functional_stabilizable_evidence(d.a(), d.b(), f, tol)?.holds)
}

/// All verdicts for one `(A, B, C, F)`, with the evidence behind each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub controllable: bool,
    pub stabilizable: bool,
    pub observable: bool,
    pub detectable: bool,
    pub target_output_controllable: bool,
    pub functional_controllable: bool,
    pub functional_stabilizable: bool,
    pub functional_observable: bool,
    pub functional_detectable: bool,
    pub ranks_evidence: Vec<Evidence>,
}

impl PropertyReport {
    pub fn any_marginal(&self) -> bool {
        self.ranks_evidence.iter().any(|e| e.marginal)
    }

    /// Implication edges that fail in this report.
    pub fn violated_implications(&self) -> Vec<&'static str> {
        let edges = [
            (self.controllable, self.functional_controllable, "controllable => functional_controllable"),
            (self.functional_controllable, self.target_output_controllable, "functional_controllable => target_output_controllable"),
            (self.functional_controllable, self.functional_stabilizable, "functional_controllable => functional_stabilizable"),
            (self.stabilizable, self.functional_stabilizable, "stabilizable => functional_stabilizable"),
            (self.observable, self.functional_observable, "observable => functional_observable"),
            (self.functional_observable, self.functional_detectable, "functional_observable => functional_detectable"),
            (self.detectable, self.functional_detectable, "detectable => functional_detectable"),
        ];
        edges
            .into_iter()
            .filter(|(p, q, _)| *p && !*q)
            .map(|(_, _, name)| name)
            .collect()
    }
}

pub fn property_report(sys: &SystemTriple, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<PropertyReport> {
    check_conformal(sys, f)?;
    let d = sys.dual();
    let rename = |mut e: Evidence, name: &str| {
        e.test = name.to_string();
        e
    };
    let evidence = vec![
        controllable_evidence(sys.a(), sys.b(), tol)?,
        stabilizable_evidence(sys.a(), sys.b(), tol)?,
        rename(controllable_evidence(d.a(), d.b(), tol)?, "observable"),
        rename(stabilizable_evidence(d.a(), d.b(), tol)?, "detectable"),
        target_output_evidence(sys, f, tol)?,
        functional_controllable_evidence(sys.a(), sys.b(), f, tol)?,
        functional_stabilizable_evidence(sys.a(), sys.b(), f, tol)?,
        containment(
            "functional_observable",
            &observability_subspace(sys.a(), sys.c(), tol)?,
            &f.row_basis(),
            tol,
        ),
        rename(functional_stabilizable_evidence(d.a(), d.b(), f, tol)?, "functional_detectable"),
    ];
    let report = PropertyReport {
        controllable: evidence[0].holds,
        stabilizable: evidence[1].holds,
        observable: evidence[2].holds,
        detectable: evidence[3].holds,
        target_output_controllable: evidence[4].holds,
        functional_controllable: evidence[5].holds,
        functional_stabilizable: evidence[6].holds,
        functional_observable: evidence[7].holds,
        functional_detectable: evidence[8].holds,
        ranks_evidence: evidence,
    };
    let violated = report.violated_implications();
    if !violated.is_empty() {
        return Err(Error::InconsistentVerdicts(violated.join("; ")));
    }
    Ok(report)
}
