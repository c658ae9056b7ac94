use serde::{Deserialize, Serialize};

use super::{ControllerDesign, ObserverDesign};
use crate::criteria::SystemTriple;
use crate::error::{Error, Result};
use crate::numlin::{eigenvalues, hstack, vstack, Matrix, Spectrum, TolerancePolicy};

/// Observer-based functional control `u = -Z P (w + E y)`, `P = (I_q1 | 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationClosedLoop {
    /// Dynamics of `(F̄_c x, ε)` with `ε = F̄ x - (w + E y)`; block upper triangular.
    pub psi: Matrix,
    /// Dynamics of the plant and observer states `(x, w)`.
    pub a_full: Matrix,
    /// The same loop over `(x, ε)` with `ε = (F̄ - EC) x - w`. Similar to `a_full`
    /// but free of the large cancelling observer gains, so it is the one to integrate.
    pub a_error: Matrix,
    pub controller_spectrum: Spectrum,
    pub observer_spectrum: Spectrum,
    pub psi_spectrum: Spectrum,
    pub full_spectrum: Spectrum,
}

/// `P = (I_q1 | 0)`, selecting the controller rows of the observer estimate.
pub(crate) fn selector(q1: usize, q: usize) -> Matrix {
    let mut p = Matrix::zeros(q1, q);
    for i in 0..q1 {
        p[(i, i)] = 1.0;
    }
    p
}

/// Controller and observer must share `A`'s dimension and the leading functional rows.
pub(crate) fn check_compatible(
    sys: &SystemTriple,
    ctrl: &ControllerDesign,
    obs: &ObserverDesign,
    tol: &TolerancePolicy,
) -> Result<()> {
    let (q1, q) = (ctrl.fbar.nrows(), obs.fbar.nrows());
    if ctrl.fbar.ncols() != sys.states() || obs.fbar.ncols() != sys.states() {
        return Err(Error::IncompatibleDesigns("functional width differs from the state dimension".into()));
    }
    if q < q1 {
        return Err(Error::IncompatibleDesigns(format!(
            "observer order {q} is below controller order {q1}"
        )));
    }
    let leading = obs.fbar.rows(0, q1);
    let diff = (&ctrl.fbar - leading).abs().max();
    let scale = ctrl.fbar.abs().max();
    if diff > tol.zero_threshold(scale) {
        return Err(Error::IncompatibleDesigns(format!(
            "first {q1} observer functional rows differ from the controller rows by {diff:e}"
        )));
    }
    Ok(())
}

pub fn assemble_separation(
    sys: &SystemTriple,
    ctrl: &ControllerDesign,
    obs: &ObserverDesign,
    tol: &TolerancePolicy,
) -> Result<SeparationClosedLoop> {
    check_compatible(sys, ctrl, obs, tol)?;
    let (q1, q) = (ctrl.fbar.nrows(), obs.fbar.nrows());
    let p = selector(q1, q);
    let top_left = ctrl.reduced_closed_loop();
    let top_right = &ctrl.reduced_b * &ctrl.z * &p;
    let psi = vstack(&[
        &hstack(&[&top_left, &top_right]),
        &hstack(&[&Matrix::zeros(q, q1), &obs.n]),
    ]);

    let zp = &ctrl.z * &p;
    let ec = &obs.e * sys.c();
    let b = sys.b();
    let a_full = vstack(&[
        &hstack(&[&(sys.a() - b * &zp * &ec), &(-(b * &zp))]),
        &hstack(&[&(&obs.j * sys.c() - &obs.h * &zp * &ec), &(&obs.n - &obs.h * &zp)]),
    ]);
    // eig(A_full) is evaluated on the similar matrix in (x, ε) coordinates, ε = G x - w with
    // G = F̄ - EC. The large observer gains cancel there, and the ε rows keep the design
    // residuals, so a faulty observer still shows up in the spectrum.
    let g = &obs.fbar - &ec;
    let pf = &p * &obs.fbar;
    let d = &g * b - &obs.h;
    let a_error = vstack(&[
        &hstack(&[&(sys.a() - b * &zp * &pf), &(b * &zp)]),
        &hstack(&[
            &(&g * sys.a() - &obs.n * &g - &obs.j * sys.c() - &d * &zp * &pf),
            &(&obs.n + &d * &zp),
        ]),
    ]);
    Ok(SeparationClosedLoop {
        controller_spectrum: eigenvalues(&top_left)?,
        observer_spectrum: eigenvalues(&obs.n)?,
        psi_spectrum: eigenvalues(&psi)?,
        full_spectrum: eigenvalues(&a_error)?,
        psi,
        a_full,
        a_error,
    })
}
