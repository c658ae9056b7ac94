use serde::{Deserialize, Serialize};

use super::{
    assemble_separation, design_functional_controller, design_functional_observer,
    find_controller_augmentation, find_observer_augmentation_with_prefix, AugmentationStrategy,
    ControllerDesign, DesignOptions, ObserverDesign, SeparationClosedLoop,
};
use crate::criteria::{FunctionalTarget, SystemTriple};
use crate::error::{CandidateDiagnostic, Result};
use crate::numlin::{Matrix, Spectrum, TolerancePolicy};

/// How the augmentation rows are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentMode {
    /// `R1` and `R` empty.
    None,
    /// Ordered searches; the observer search keeps `R1` as a prefix.
    Auto,
    /// Caller-supplied rows; `r` defaults to `r1`.
    Given { r1: Matrix, r: Option<Matrix> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleRole {
    Controller,
    Observer,
}

/// Poles used when none are requested: `-3, -5, -7, ...` for the controller
/// and `-6, -7, -8, ...` for the observer.
pub fn default_poles(role: PoleRole, order: usize) -> Spectrum {
    let values: Vec<f64> = (0..order)
        .map(|k| match role {
            PoleRole::Controller => -3.0 - 2.0 * k as f64,
            PoleRole::Observer => -6.0 - k as f64,
        })
        .collect();
    Spectrum::from_real(&values)
}

/// Controller, observer and assembled closed loop for one plant and functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDesign {
    pub controller_strategy: AugmentationStrategy,
    pub observer_strategy: AugmentationStrategy,
    pub controller_candidates: Vec<CandidateDiagnostic>,
    pub observer_candidates: Vec<CandidateDiagnostic>,
    pub controller: ControllerDesign,
    pub observer: ObserverDesign,
    pub separation: SeparationClosedLoop,
}

pub fn design_pipeline(
    sys: &SystemTriple,
    f: &FunctionalTarget,
    augment: &AugmentMode,
    controller_poles: Option<&Spectrum>,
    observer_poles: Option<&Spectrum>,
    options: DesignOptions,
    tol: &TolerancePolicy,
) -> Result<PipelineDesign> {
    let n = sys.states();
    let empty = Matrix::zeros(0, n);
    let (r1, controller_strategy, controller_candidates) = match augment {
        AugmentMode::None => (empty.clone(), AugmentationStrategy::Empty, Vec::new()),
        AugmentMode::Given { r1, .. } => (r1.clone(), AugmentationStrategy::Given, Vec::new()),
        AugmentMode::Auto => {
            let found = find_controller_augmentation(sys, f, tol)?;
            (found.r, found.strategy, found.candidates)
        }
    };
    let q1 = f.rows() + r1.nrows();
    let cpoles = controller_poles
        .cloned()
        .unwrap_or_else(|| default_poles(PoleRole::Controller, q1));
    let controller = design_functional_controller(sys, f, &r1, &cpoles, options, tol)?;

    let (r, observer_strategy, observer_candidates) = match augment {
        AugmentMode::None => (empty, AugmentationStrategy::Empty, Vec::new()),
        AugmentMode::Given { r1, r } => (
            r.clone().unwrap_or_else(|| r1.clone()),
            AugmentationStrategy::Given,
            Vec::new(),
        ),
        AugmentMode::Auto => {
            let found = find_observer_augmentation_with_prefix(sys, f, &r1, tol)?;
            (found.r, found.strategy, found.candidates)
        }
    };
    let q = f.rows() + r.nrows();
    let opoles = observer_poles
        .cloned()
        .unwrap_or_else(|| default_poles(PoleRole::Observer, q));
    let observer = design_functional_observer(sys, f, &r, &opoles, options, tol)?;
    let separation = assemble_separation(sys, &controller, &observer, tol)?;
    Ok(PipelineDesign {
        controller_strategy,
        observer_strategy,
        controller_candidates,
        observer_candidates,
        controller,
        observer,
        separation,
    })
}
