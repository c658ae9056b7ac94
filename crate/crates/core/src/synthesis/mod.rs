//! Functional controller and functional observer synthesis, augmentation
//! search, and assembly of the observer-based closed loop.

mod augment;
mod controller;
mod observer;
mod pipeline;
mod separation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{numerical_rank, vstack, Complex, Matrix, Spectrum, TolerancePolicy};

pub use augment::{
    build_augmentation_thm16, find_controller_augmentation, find_observer_augmentation,
    find_observer_augmentation_with_prefix, AugmentationResult, AugmentationStrategy,
};
pub use controller::{controller_conditions, design_functional_controller, ControllerDesign};
pub use observer::{
    design_functional_observer, observer_conditions, verify_observer, ObserverDesign,
    ObserverVerification, SynthesisWorkspace,
};
pub use pipeline::{default_poles, design_pipeline, AugmentMode, PipelineDesign, PoleRole};
pub use separation::{assemble_separation, SeparationClosedLoop};
pub(crate) use separation::selector;

/// Outcome of an existence test: the rank condition and, when it holds, the
/// assignability of the derived reduced pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub rank_condition: bool,
    /// `None` when the rank condition fails and the reduced pair is undefined.
    pub assignability: Option<bool>,
    /// Residual that decided the rank condition.
    pub residual: f64,
}

impl Conditions {
    pub fn both(&self) -> bool {
        self.rank_condition && self.assignability == Some(true)
    }
}

/// Options shared by the design operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignOptions {
    /// Accept poles with non-negative real part, recording a warning instead of failing.
    pub allow_unstable: bool,
}

/// `stack(F, R)` after checking that it has full row rank.
pub(crate) fn augmented_functional(f: &Matrix, r: &Matrix, tol: &TolerancePolicy) -> Result<Matrix> {
    if r.nrows() > 0 && r.ncols() != f.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "augmentation has {} columns, functional has {}",
            r.ncols(),
            f.ncols()
        )));
    }
    let fbar = if r.nrows() == 0 { f.clone() } else { vstack(&[f, r]) };
    let rank = numerical_rank(&fbar, tol);
    if rank < fbar.nrows() {
        return Err(Error::RankDeficient {
            what: "augmented functional",
            rank,
            expected: fbar.nrows(),
        });
    }
    Ok(fbar)
}

/// Count, conjugate closure and stability of a requested pole set.
pub(crate) fn check_design_poles(
    poles: &Spectrum,
    order: usize,
    role: &str,
    options: DesignOptions,
    tol: &TolerancePolicy,
) -> Result<Vec<String>> {
    if poles.len() != order {
        return Err(Error::DimensionMismatch(format!(
            "{role} needs {order} poles, {} given",
            poles.len()
        )));
    }
    if let Some(p) = poles.first_unpaired(tol.eigen_match_tol) {
        return Err(Error::UnpairedComplexPole { re: p.re, im: p.im });
    }
    let mut warnings = Vec::new();
    for p in poles.values() {
        if p.re >= 0.0 {
            if !options.allow_unstable {
                return Err(Error::UnstablePole { re: p.re, im: p.im });
            }
            warnings.push(format!("{role} pole {} is not strictly stable", fmt_complex(*p)));
        }
    }
    Ok(warnings)
}

pub(crate) fn fmt_complex(v: Complex) -> String {
    if v.im == 0.0 {
        format!("{}", v.re)
    } else {
        format!("{}{:+}i", v.re, v.im)
    }
}
