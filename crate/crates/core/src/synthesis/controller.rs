use serde::{Deserialize, Serialize};

use super::{augmented_functional, check_design_poles, Conditions, DesignOptions};
use crate::criteria::{FunctionalTarget, SystemTriple};
use crate::error::{Error, Result};
use crate::numlin::{
    controllability_subspace, eigenvalues, right_pseudoinverse, spectral_norm, place_poles,
    Matrix, Spectrum, TolerancePolicy,
};

/// Functional state feedback `u = -Z F̄ x` with `F̄ = stack(F, R1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerDesign {
    pub r1: Matrix,
    pub fbar: Matrix,
    pub z: Matrix,
    /// `F̄ A F̄⁺`
    pub reduced_a: Matrix,
    /// `F̄ B`
    pub reduced_b: Matrix,
    pub assigned_poles: Spectrum,
    /// Largest distance from a reduced closed-loop eigenvalue to the spectrum of `A - B Z F̄`.
    pub containment_error: f64,
    pub warnings: Vec<String>,
}

impl ControllerDesign {
    pub fn order(&self) -> usize {
        self.fbar.nrows()
    }

    /// `F̄ A F̄⁺ - F̄ B Z`
    pub fn reduced_closed_loop(&self) -> Matrix {
        &self.reduced_a - &self.reduced_b * &self.z
    }

    /// `A - B Z F̄`
    pub fn state_closed_loop(&self, sys: &SystemTriple) -> Matrix {
        sys.a() - sys.b() * &self.z * &self.fbar
    }
}

struct Reduced {
    fbar: Matrix,
    reduced_a: Matrix,
    reduced_b: Matrix,
    conditions: Conditions,
}

fn reduce(sys: &SystemTriple, f: &FunctionalTarget, r1: &Matrix, tol: &TolerancePolicy) -> Result<Reduced> {
    let fbar = augmented_functional(f.f(), r1, tol)?;
    if fbar.ncols() != sys.states() {
        return Err(Error::DimensionMismatch(format!(
            "functional has {} columns, system has {} states",
            fbar.ncols(),
            sys.states()
        )));
    }
    let pinv = right_pseudoinverse(&fbar, tol)?;
    let fa = &fbar * sys.a();
    let n = sys.states();
    // F̄ A (I - F̄⁺ F̄) = 0  <=>  rows of F̄ A lie in the row space of F̄
    let residual = spectral_norm(&(&fa * (Matrix::identity(n, n) - &pinv * &fbar)));
    let rank_condition = residual <= tol.zero_threshold(spectral_norm(&fa));
    let reduced_a = &fa * &pinv;
    let reduced_b = &fbar * sys.b();
    let assignability = if rank_condition {
        let reach = controllability_subspace(&reduced_a, &reduced_b, tol)?;
        Some(reach.dimension() == fbar.nrows())
    } else {
        None
    };
    Ok(Reduced {
        fbar,
        reduced_a,
        reduced_b,
        conditions: Conditions {
            rank_condition,
            assignability,
            residual,
        },
    })
}

/// Existence conditions of a functional controller for `F̄ = stack(F, R1)`:
/// `F̄ A (I - F̄⁺F̄) = 0` and controllability of `(F̄ A F̄⁺, F̄ B)`.
pub fn controller_conditions(
    sys: &SystemTriple,
    f: &FunctionalTarget,
    r1: &Matrix,
    tol: &TolerancePolicy,
) -> Result<Conditions> {
    Ok(reduce(sys, f, r1, tol)?.conditions)
}

/// Place the poles of the reduced pair `(F̄ A F̄⁺, F̄ B)`.
pub fn design_functional_controller(
    sys: &SystemTriple,
    f: &FunctionalTarget,
    r1: &Matrix,
    poles: &Spectrum,
    options: DesignOptions,
    tol: &TolerancePolicy,
) -> Result<ControllerDesign> {
    let red = reduce(sys, f, r1, tol)?;
    if !red.conditions.rank_condition {
        return Err(Error::ConditionsViolated(format!(
            "rows of F̄A are not in the row space of F̄ (residual {:e})",
            red.conditions.residual
        )));
    }
    if red.conditions.assignability != Some(true) {
        return Err(Error::ConditionsViolated(
            "reduced pair (F̄AF̄⁺, F̄B) is not controllable".into(),
        ));
    }
    let warnings = check_design_poles(poles, red.fbar.nrows(), "controller", options, tol)?;
    let z = place_poles(&red.reduced_a, &red.reduced_b, poles, tol)?;
    let mut design = ControllerDesign {
        r1: if r1.nrows() == 0 { Matrix::zeros(0, sys.states()) } else { r1.clone() },
        fbar: red.fbar,
        z,
        reduced_a: red.reduced_a,
        reduced_b: red.reduced_b,
        assigned_poles: poles.clone(),
        containment_error: 0.0,
        warnings,
    };
    let reduced = eigenvalues(&design.reduced_closed_loop())?;
    let full = eigenvalues(&design.state_closed_loop(sys))?;
    design.containment_error = full.containment_error(&reduced).unwrap_or(f64::INFINITY);
    Ok(design)
}
