//! Regenerate the bundled worked examples and compare against their published values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::{self, Example, PublishedObserver};
use crate::criteria::{
    is_functional_controllable, is_functional_stabilizable, is_target_output_controllable, property_report,
};
use crate::error::Result;
use crate::io::Num;
use crate::numlin::{eigenvalues, Matrix, Spectrum, TolerancePolicy};
use crate::synthesis::{design_pipeline, verify_observer, AugmentMode, DesignOptions, ObserverDesign, PipelineDesign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleId {
    Example1,
    Example2,
    Example3,
}

impl ExampleId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "example1" => Some(Self::Example1),
            "example2" => Some(Self::Example2),
            "example3" => Some(Self::Example3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    /// Deviation from the expected value (0 or 1 for boolean checks).
    pub error: Num,
    pub tolerance: Num,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub status: String,
    pub example: ExampleId,
    pub passed: usize,
    pub total: usize,
    pub checks: Vec<Check>,
}

impl ReproduceReport {
    pub fn all_pass(&self) -> bool {
        self.passed == self.total
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(4);
        let mut out = String::new();
        for c in &self.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{verdict}  {:<width$}  err {:.2e} (tol {:.0e})  {}", c.name, c.error.0, c.tolerance.0, c.observed);
        }
        let _ = writeln!(out, "{}/{} checks passed", self.passed, self.total);
        out
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn flag(&mut self, name: impl Into<String>, expected: bool, observed: Result<bool>) {
        let (obs, pass) = match observed {
            Ok(v) => (v.to_string(), v == expected),
            Err(e) => (format!("error: {e}"), false),
        };
        self.0.push(Check {
            name: name.into(),
            expected: expected.to_string(),
            observed: obs,
            error: Num(if pass { 0.0 } else { 1.0 }),
            tolerance: Num(0.0),
            pass,
        });
    }

    fn matrix(&mut self, name: &str, expected: &Matrix, observed: Option<&Matrix>, tol: f64) {
        let (err, obs) = match observed {
            Some(m) if m.shape() == expected.shape() => ((m - expected).abs().max(), fmt_matrix(m)),
            Some(m) => (f64::INFINITY, format!("shape {}x{}", m.nrows(), m.ncols())),
            None => (f64::INFINITY, "unavailable".into()),
        };
        self.push(name, fmt_matrix(expected), obs, err, tol);
    }

    fn spectrum(&mut self, name: &str, expected: &Spectrum, observed: Option<&Spectrum>, tol: f64) {
        let (err, obs) = match observed {
            Some(s) if s.len() == expected.len() => {
                let err = expected.containment_error(s).unwrap_or(f64::INFINITY);
                (err, s.sorted().to_string())
            }
            Some(s) => (f64::INFINITY, s.sorted().to_string()),
            None => (f64::INFINITY, "unavailable".into()),
        };
        self.push(name, expected.sorted().to_string(), obs, err, tol);
    }

    fn residual(&mut self, name: &str, observed: Option<f64>, tol: f64) {
        let err = observed.unwrap_or(f64::INFINITY);
        self.push(name, "0".into(), format!("{err:.3e}"), err, tol);
    }

    fn push(&mut self, name: &str, expected: String, observed: String, err: f64, tol: f64) {
        self.0.push(Check {
            name: name.into(),
            expected,
            observed,
            error: Num(err),
            tolerance: Num(tol),
            pass: err <= tol,
        });
    }

    fn failure(&mut self, name: &str, message: String) {
        self.0.push(Check {
            name: name.into(),
            expected: "success".into(),
            observed: message,
            error: Num(f64::INFINITY),
            tolerance: Num(0.0),
            pass: false,
        });
    }
}

fn fmt_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| r.iter().map(|v| format!("{}", (v * 1e9).round() / 1e9)).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join("; "))
}

fn from_rows<const R: usize, const C: usize>(rows: &[[f64; C]; R]) -> Matrix {
    Matrix::from_fn(R, C, |i, j| rows[i][j])
}

fn pipeline(ex: &Example, tol: &TolerancePolicy) -> Result<PipelineDesign> {
    design_pipeline(
        &ex.system,
        &ex.functional(),
        &AugmentMode::Auto,
        Some(&ex.controller_poles),
        Some(&ex.observer_poles),
        DesignOptions::default(),
        tol,
    )
}

fn published_residuals(checks: &mut Checks, ex: &Example, p: PublishedObserver, tol: &TolerancePolicy) {
    let design = ObserverDesign::from_parameters(&ex.f, &p.r, p.n, p.e, p.k, p.j, p.h);
    match verify_observer(&ex.system, &design, tol) {
        Ok(v) => {
            checks.residual("published observer: F̄A - NF̄ - ECA - KC", Some(v.constraint_residual), 1e-9);
            checks.residual("published observer: H - (F̄ - EC)B", Some(v.h_residual), 1e-9);
            checks.residual("published observer: J - K - NE", Some(v.j_residual), 1e-9);
        }
        Err(e) => checks.failure("published observer", e.to_string()),
    }
}

fn example1(tol: &TolerancePolicy) -> Vec<Check> {
    let mut checks = Checks(Vec::new());
    for (i, &(toc, stab, ctrb)) in catalog::EXAMPLE1_TABLE.iter().enumerate() {
        let ex = catalog::example1(i);
        let f = ex.functional();
        let z = i + 1;
        checks.flag(format!("z{z} target output controllable"), toc, is_target_output_controllable(&ex.system, &f, tol));
        checks.flag(format!("z{z} functional stabilizable"), stab, is_functional_stabilizable(&ex.system, &f, tol));
        checks.flag(format!("z{z} functional controllable"), ctrb, is_functional_controllable(&ex.system, &f, tol));
    }
    checks.0
}

fn example2(tol: &TolerancePolicy) -> Vec<Check> {
    let mut checks = Checks(Vec::new());
    let ex = catalog::example2();
    let report = property_report(&ex.system, &ex.functional(), tol);
    checks.flag("controllable", false, report.as_ref().map(|r| r.controllable).map_err(Clone::clone));
    checks.flag("functional observable", true, report.as_ref().map(|r| r.functional_observable).map_err(Clone::clone));
    published_residuals(&mut checks, &ex, catalog::example2_published_observer(), tol);
    match pipeline(&ex, tol) {
        Ok(d) => {
            checks.matrix("Z", &Matrix::from_element(1, 1, 6.0), Some(&d.controller.z), 1e-9);
            let cl = eigenvalues(&d.controller.state_closed_loop(&ex.system)).ok();
            checks.spectrum("eig(A - BZF)", &Spectrum::from_real(&[-4.0, -3.0, -2.0, -1.0, 2.0]), cl.as_ref(), 1e-6);
            checks.matrix("designed N", &Matrix::from_element(1, 1, -6.0), Some(&d.observer.n), 1e-9);
            let v = verify_observer(&ex.system, &d.observer, tol).ok();
            let worst = v.map(|v| v.constraint_residual.max(v.h_residual).max(v.j_residual));
            checks.residual("designed observer residuals", worst, 1e-9);
            checks.matrix("Psi", &from_rows(&catalog::EXAMPLE2_PSI), Some(&d.separation.psi), 1e-9);
        }
        Err(e) => checks.failure("design", e.to_string()),
    }
    checks.0
}

fn example3(tol: &TolerancePolicy) -> Vec<Check> {
    let mut checks = Checks(Vec::new());
    let ex = catalog::example3();
    published_residuals(&mut checks, &ex, catalog::example3_published_observer(), tol);
    match pipeline(&ex, tol) {
        Ok(d) => {
            let fa = &ex.f * ex.system.a();
            checks.matrix("R1 = FA", &fa, Some(&d.controller.r1), 1e-12);
            checks.matrix("Z", &Matrix::from_row_slice(1, 2, &catalog::EXAMPLE3_Z), Some(&d.controller.z), 1e-6);
            checks.matrix(
                "F̄AF̄⁺ - F̄BZ",
                &from_rows(&catalog::EXAMPLE3_REDUCED_CLOSED_LOOP),
                Some(&d.controller.reduced_closed_loop()),
                1e-6,
            );
            let cl = eigenvalues(&d.controller.state_closed_loop(&ex.system)).ok();
            checks.spectrum("eig(A - BZF̄)", &Spectrum::from_real(&[-5.0, -4.0, -3.0, -2.0, -1.0]), cl.as_ref(), 1e-6);
            checks.matrix("Psi", &from_rows(&catalog::EXAMPLE3_PSI), Some(&d.separation.psi), 1e-6);
            checks.spectrum("eig(N)", &Spectrum::from_real(&[-6.0, -7.0]), Some(&d.separation.observer_spectrum), 1e-6);
            checks.spectrum(
                "eig(Psi)",
                &Spectrum::from_real(&[-3.0, -5.0, -6.0, -7.0]),
                Some(&d.separation.psi_spectrum),
                1e-6,
            );
        }
        Err(e) => checks.failure("design", e.to_string()),
    }
    checks.0
}

/// Run every check of one example. Failures are recorded, never returned as errors.
pub fn reproduce(id: ExampleId, tol: &TolerancePolicy) -> ReproduceReport {
    let checks = match id {
        ExampleId::Example1 => example1(tol),
        ExampleId::Example2 => example2(tol),
        ExampleId::Example3 => example3(tol),
    };
    let passed = checks.iter().filter(|c| c.pass).count();
    let total = checks.len();
    ReproduceReport {
        status: if passed == total { "pass" } else { "fail" }.into(),
        example: id,
        passed,
        total,
        checks,
    }
}
