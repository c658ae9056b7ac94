use serde::{Deserialize, Serialize};

use super::{augmented_functional, check_design_poles, Conditions, DesignOptions};
use crate::criteria::{FunctionalTarget, SystemTriple};
use crate::error::{Error, Result};
use crate::numlin::{
    controllability_subspace, eigenvalues, place_poles, pseudoinverse_with_cutoff,
    singular_values, spectral_norm, vstack, Matrix, Spectrum, TolerancePolicy,
};

/// `N` is set directly (not by placement) only when `Mfree` is this well conditioned;
/// its columns come from an orthogonal projector, so singular values lie in `[0, 1]`.
const DIRECT_CHOICE_MIN_SINGULAR: f64 = 1e-6;

/// Darouach observer `w' = N w + J y + H u`, `ẑ = w + E y` for `F̄ x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverDesign {
    pub r: Matrix,
    pub fbar: Matrix,
    pub n: Matrix,
    pub j: Matrix,
    pub h: Matrix,
    pub e: Matrix,
    /// `K = J - N E`
    pub k: Matrix,
    pub assigned_poles: Spectrum,
    pub warnings: Vec<String>,
}

impl ObserverDesign {
    pub fn order(&self) -> usize {
        self.n.nrows()
    }

    /// Wrap externally supplied parameters, e.g. to check them with [`verify_observer`].
    pub fn from_parameters(
        f: &Matrix,
        r: &Matrix,
        n: Matrix,
        e: Matrix,
        k: Matrix,
        j: Matrix,
        h: Matrix,
    ) -> Self {
        let fbar = if r.nrows() == 0 { f.clone() } else { vstack(&[f, r]) };
        Self {
            r: r.clone(),
            fbar,
            n,
            j,
            h,
            e,
            k,
            assigned_poles: Spectrum::default(),
            warnings: Vec::new(),
        }
    }
}

/// Solution space of `Θ Σ = F̄ A` with `Θ = (N | E | K)` and `Σ = stack(F̄, CA, C)`.
///
/// Every solution is `Θ = F̄ A Σ⁺ + Y (I - Σ Σ⁺)`, so `N = N1 + Y Mfree`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisWorkspace {
    pub fbar: Matrix,
    pub sigma: Matrix,
    pub sigma_pinv: Matrix,
    pub theta_particular: Matrix,
    /// `I - Σ Σ⁺`
    pub free_projector: Matrix,
    pub n1: Matrix,
    pub mfree: Matrix,
}

impl SynthesisWorkspace {
    pub fn new(sys: &SystemTriple, fbar: Matrix, tol: &TolerancePolicy) -> Self {
        let c = sys.c();
        let ca = c * sys.a();
        let sigma = vstack(&[&fbar, &ca, c]);
        // a relative cutoff at the residual level, so exactly dependent stacks stay dependent
        let cutoff = tol.absolute_zero_tol * spectral_norm(&sigma);
        let sigma_pinv = pseudoinverse_with_cutoff(&sigma, cutoff);
        let theta_particular = &fbar * sys.a() * &sigma_pinv;
        let rows = sigma.nrows();
        let free_projector = Matrix::identity(rows, rows) - &sigma * &sigma_pinv;
        let q = fbar.nrows();
        let n1 = theta_particular.columns(0, q).into_owned();
        let mfree = free_projector.columns(0, q).into_owned();
        Self {
            fbar,
            sigma,
            sigma_pinv,
            theta_particular,
            free_projector,
            n1,
            mfree,
        }
    }

    pub fn order(&self) -> usize {
        self.fbar.nrows()
    }

    /// `‖F̄ A - Θp Σ‖`: zero exactly when the parameter equation is solvable.
    pub fn particular_residual(&self, sys: &SystemTriple) -> f64 {
        spectral_norm(&(&self.fbar * sys.a() - &self.theta_particular * &self.sigma))
    }
}

fn conditions_from(sys: &SystemTriple, ws: &SynthesisWorkspace, tol: &TolerancePolicy) -> Result<Conditions> {
    let residual = ws.particular_residual(sys);
    let rank_condition = residual <= tol.zero_threshold(spectral_norm(&(&ws.fbar * sys.a())));
    let assignability = if rank_condition {
        let reach = controllability_subspace(&ws.n1.transpose(), &ws.mfree.transpose(), tol)?;
        Some(reach.dimension() == ws.order())
    } else {
        None
    };
    Ok(Conditions {
        rank_condition,
        assignability,
        residual,
    })
}

/// Existence conditions of a Darouach observer for `F̄ = stack(F, R)`:
/// solvability of `Θ Σ = F̄ A` and arbitrary assignability of `eig(N1 + Y Mfree)`.
pub fn observer_conditions(
    sys: &SystemTriple,
    f: &FunctionalTarget,
    r: &Matrix,
    tol: &TolerancePolicy,
) -> Result<Conditions> {
    let fbar = augmented_functional(f.f(), r, tol)?;
    check_columns(sys, &fbar)?;
    conditions_from(sys, &SynthesisWorkspace::new(sys, fbar, tol), tol)
}

fn check_columns(sys: &SystemTriple, fbar: &Matrix) -> Result<()> {
    if fbar.ncols() != sys.states() {
        return Err(Error::DimensionMismatch(format!(
            "functional has {} columns, system has {} states",
            fbar.ncols(),
            sys.states()
        )));
    }
    Ok(())
}

/// Observer of order `rows(F̄)` whose error obeys `e' = N e` with `eig(N) = poles`.
pub fn design_functional_observer(
    sys: &SystemTriple,
    f: &FunctionalTarget,
    r: &Matrix,
    poles: &Spectrum,
    options: DesignOptions,
    tol: &TolerancePolicy,
) -> Result<ObserverDesign> {
    let fbar = augmented_functional(f.f(), r, tol)?;
    check_columns(sys, &fbar)?;
    let ws = SynthesisWorkspace::new(sys, fbar, tol);
    let cond = conditions_from(sys, &ws, tol)?;
    if !cond.rank_condition {
        return Err(Error::ConditionsViolated(format!(
            "F̄A is not in the row space of (F̄; CA; C) (residual {:e})",
            cond.residual
        )));
    }
    if cond.assignability != Some(true) {
        return Err(Error::ConditionsViolated(
            "observer dynamics N1 + Y Mfree are not freely assignable".into(),
        ));
    }
    let q = ws.order();
    let warnings = check_design_poles(poles, q, "observer", options, tol)?;
    let smallest = singular_values(&ws.mfree).get(q - 1).copied().unwrap_or(0.0);
    let y = if smallest > DIRECT_CHOICE_MIN_SINGULAR {
        // N is entirely free: take the real block-diagonal form of the poles
        (canonical_matrix(poles, tol) - &ws.n1) * pseudoinverse_with_cutoff(&ws.mfree, 0.0)
    } else {
        // eig(N1^T - Mfree^T G) = poles, hence Y = -G^T
        -place_poles(&ws.n1.transpose(), &ws.mfree.transpose(), poles, tol)?.transpose()
    };
    let theta = &ws.theta_particular + &y * &ws.free_projector;
    let p = sys.outputs();
    let n = theta.columns(0, q).into_owned();
    let e = theta.columns(q, p).into_owned();
    let k = theta.columns(q + p, p).into_owned();
    let j = &k + &n * &e;
    let h = (&ws.fbar - &e * sys.c()) * sys.b();
    Ok(ObserverDesign {
        r: if r.nrows() == 0 { Matrix::zeros(0, sys.states()) } else { r.clone() },
        fbar: ws.fbar,
        n,
        j,
        h,
        e,
        k,
        assigned_poles: poles.clone(),
        warnings,
    })
}

/// Block-diagonal real matrix with the given spectrum, in the given order:
/// `1x1` blocks for real poles, `[[a, b], [-b, a]]` for each pair `a ± bi`.
fn canonical_matrix(poles: &Spectrum, tol: &TolerancePolicy) -> Matrix {
    let values = poles.values();
    let q = values.len();
    let mut m = Matrix::zeros(q, q);
    let mut used = vec![false; q];
    let mut at = 0;
    for i in 0..q {
        if used[i] {
            continue;
        }
        used[i] = true;
        let v = values[i];
        if v.im.abs() <= tol.eigen_match_tol {
            m[(at, at)] = v.re;
            at += 1;
            continue;
        }
        if let Some(j) = (i + 1..q).find(|&j| !used[j] && (values[j] - v.conj()).norm() <= tol.eigen_match_tol) {
            used[j] = true;
        }
        let b = v.im.abs();
        m[(at, at)] = v.re;
        m[(at, at + 1)] = b;
        m[(at + 1, at)] = -b;
        m[(at + 1, at + 1)] = v.re;
        at += 2;
    }
    m
}

/// Residuals of the defining equations of an observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverVerification {
    /// `‖F̄A - N F̄ - E C A - K C‖`
    pub constraint_residual: f64,
    /// `‖H - (F̄ - E C) B‖`
    pub h_residual: f64,
    /// `‖J - K - N E‖`
    pub j_residual: f64,
    pub spectrum: Spectrum,
    pub passes: bool,
}

pub fn verify_observer(
    sys: &SystemTriple,
    design: &ObserverDesign,
    tol: &TolerancePolicy,
) -> Result<ObserverVerification> {
    let q = design.fbar.nrows();
    let (n, p, m) = (sys.states(), sys.outputs(), sys.inputs());
    let shapes = [
        (design.fbar.shape(), (q, n), "F̄"),
        (design.n.shape(), (q, q), "N"),
        (design.e.shape(), (q, p), "E"),
        (design.k.shape(), (q, p), "K"),
        (design.j.shape(), (q, p), "J"),
        (design.h.shape(), (q, m), "H"),
    ];
    for (got, want, name) in shapes {
        if got != want {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, expected {}x{}",
                got.0, got.1, want.0, want.1
            )));
        }
    }
    let c = sys.c();
    let constraint = &design.fbar * sys.a() - &design.n * &design.fbar - &design.e * c * sys.a() - &design.k * c;
    let h_res = &design.h - (&design.fbar - &design.e * c) * sys.b();
    let j_res = &design.j - &design.k - &design.n * &design.e;
    let constraint_residual = spectral_norm(&constraint);
    let h_residual = spectral_norm(&h_res);
    let j_residual = spectral_norm(&j_res);
    let limit = tol.absolute_zero_tol;
    Ok(ObserverVerification {
        constraint_residual,
        h_residual,
        j_residual,
        spectrum: eigenvalues(&design.n)?,
        passes: constraint_residual <= limit && h_residual <= limit && j_residual <= limit,
    })
}
