//! System files and JSON reports.
//!
//! Every floating-point number in a report is written with 17 significant
//! digits, which round-trips any `f64` exactly.

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;

use crate::criteria::{property_report, Evidence, FunctionalTarget, PropertyReport, SystemTriple};
use crate::error::{CandidateDiagnostic, Error, Result};
use crate::numlin::{Complex, Matrix, Spectrum, TolerancePolicy, Vector};
use crate::synthesis::{
    verify_observer, AugmentationStrategy, ControllerDesign, ObserverDesign, ObserverVerification, PipelineDesign,
};

/// `f64` written as `d.dddddddddddddddde±x`; non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Num {
    fn text(self) -> String {
        if self.0.is_finite() {
            format!("{:.16e}", self.0)
        } else {
            "null".into()
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(self.text()).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Num(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN)))
    }
}

/// Matrix as a row-major array of arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonMatrix(pub Matrix);

impl Serialize for JsonMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Num>> = self.0.row_iter().map(|r| r.iter().map(|&v| Num(v)).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for JsonMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<Num>>::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(JsonMatrix(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j].0)))
    }
}

/// Spectrum as a list of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonSpectrum(pub Spectrum);

impl Serialize for JsonSpectrum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[Num; 2]> = self.0.values().iter().map(|z| [Num(z.re), Num(z.im)]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for JsonSpectrum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(JsonSpectrum(Spectrum::deserialize(d)?))
    }
}

/// Optional tolerance overrides in a system file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub relative_rank_tol: Option<f64>,
    pub absolute_zero_tol: Option<f64>,
    pub eigen_match_tol: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, base: TolerancePolicy) -> Result<TolerancePolicy> {
        TolerancePolicy::new(
            self.relative_rank_tol.or(base.relative_rank_tol),
            self.absolute_zero_tol.unwrap_or(base.absolute_zero_tol),
            self.eigen_match_tol.unwrap_or(base.eigen_match_tol),
        )
    }
}

/// Plant, functional and optional augmentation rows read from JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub f: Matrix,
    pub r1: Option<Matrix>,
    pub r: Option<Matrix>,
    pub tolerances: ToleranceOverrides,
}

fn parse_matrix(v: &Value, name: &str, allow_empty: bool) -> Result<Matrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("\"{name}\": expected an array of rows")))?;
    if rows.is_empty() {
        return if allow_empty {
            Ok(Matrix::zeros(0, 0))
        } else {
            Err(Error::Parse(format!("\"{name}\": matrix is empty")))
        };
    }
    let mut data = Vec::new();
    let mut cols = None;
    for (i, row) in rows.iter().enumerate() {
        let entries = row
            .as_array()
            .ok_or_else(|| Error::Parse(format!("\"{name}\"[{i}]: expected an array of numbers")))?;
        match cols {
            None if entries.is_empty() => {
                return Err(Error::Parse(format!("\"{name}\"[{i}]: row is empty")));
            }
            None => cols = Some(entries.len()),
            Some(c) if c != entries.len() => {
                return Err(Error::Parse(format!(
                    "\"{name}\"[{i}]: row has {} entries, row 0 has {c}",
                    entries.len()
                )));
            }
            Some(_) => {}
        }
        for (j, e) in entries.iter().enumerate() {
            let x = e
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("\"{name}\"[{i}][{j}]: expected a number, got {e}")))?;
            data.push(x);
        }
    }
    Ok(Matrix::from_row_slice(rows.len(), cols.unwrap_or(0), &data))
}

fn check_cols(m: &Matrix, name: &str, n: usize) -> Result<()> {
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "\"{name}\" is {}x{}, expected {n} columns to match \"A\"",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::Parse("top level must be a JSON object".into()))?;
        for key in obj.keys() {
            if !["A", "B", "C", "F", "R1", "R", "tolerances"].contains(&key.as_str()) {
                return Err(Error::Parse(format!("unknown member \"{key}\"")));
            }
        }
        let get = |k: &str| obj.get(k).ok_or_else(|| Error::Parse(format!("missing member \"{k}\"")));
        let a = parse_matrix(get("A")?, "A", false)?;
        let b = parse_matrix(get("B")?, "B", false)?;
        let c = parse_matrix(get("C")?, "C", false)?;
        let f = parse_matrix(get("F")?, "F", false)?;
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("\"A\" is {}x{}, expected square", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "\"B\" is {}x{}, expected {n} rows to match \"A\"",
                b.nrows(),
                b.ncols()
            )));
        }
        check_cols(&c, "C", n)?;
        check_cols(&f, "F", n)?;
        let optional = |k: &str| -> Result<Option<Matrix>> {
            match obj.get(k) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => {
                    let m = parse_matrix(v, k, true)?;
                    if m.nrows() == 0 {
                        return Ok(Some(Matrix::zeros(0, n)));
                    }
                    check_cols(&m, k, n)?;
                    Ok(Some(m))
                }
            }
        };
        let r1 = optional("R1")?;
        let r = optional("R")?;
        let tolerances = match obj.get("tolerances") {
            None | Some(Value::Null) => ToleranceOverrides::default(),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::Parse(format!("\"tolerances\": {e}")))?,
        };
        Ok(Self { a, b, c, f, r1, r, tolerances })
    }

    pub fn tolerance(&self, base: TolerancePolicy) -> Result<TolerancePolicy> {
        self.tolerances.apply(base)
    }

    pub fn system(&self, tol: &TolerancePolicy) -> Result<SystemTriple> {
        SystemTriple::with_tolerance(self.a.clone(), self.b.clone(), self.c.clone(), tol)
    }

    pub fn functional(&self, tol: &TolerancePolicy) -> Result<FunctionalTarget> {
        FunctionalTarget::new(self.f.clone(), self.a.nrows(), tol)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(rename = "A")]
            a: JsonMatrix,
            #[serde(rename = "B")]
            b: JsonMatrix,
            #[serde(rename = "C")]
            c: JsonMatrix,
            #[serde(rename = "F")]
            f: JsonMatrix,
            #[serde(rename = "R1", skip_serializing_if = "Option::is_none")]
            r1: Option<JsonMatrix>,
            #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
            r: Option<JsonMatrix>,
            tolerances: &'a ToleranceOverrides,
        }
        let out = Out {
            a: JsonMatrix(self.a.clone()),
            b: JsonMatrix(self.b.clone()),
            c: JsonMatrix(self.c.clone()),
            f: JsonMatrix(self.f.clone()),
            r1: self.r1.clone().map(JsonMatrix),
            r: self.r.clone().map(JsonMatrix),
            tolerances: &self.tolerances,
        };
        serde_json::to_string_pretty(&out).expect("serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceJson {
    pub test: String,
    pub rank_with: usize,
    pub rank_without: usize,
    pub deciding_value: Num,
    pub threshold: Num,
    pub marginal: bool,
    pub holds: bool,
}

impl From<&Evidence> for EvidenceJson {
    fn from(e: &Evidence) -> Self {
        Self {
            test: e.test.clone(),
            rank_with: e.rank_with,
            rank_without: e.rank_without,
            deciding_value: Num(e.deciding_value),
            threshold: Num(e.threshold),
            marginal: e.marginal,
            holds: e.holds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub controllable: bool,
    pub stabilizable: bool,
    pub observable: bool,
    pub detectable: bool,
    pub target_output_controllable: bool,
    pub functional_controllable: bool,
    pub functional_stabilizable: bool,
    pub functional_observable: bool,
    pub functional_detectable: bool,
}

impl From<&PropertyReport> for Verdicts {
    fn from(p: &PropertyReport) -> Self {
        Self {
            controllable: p.controllable,
            stabilizable: p.stabilizable,
            observable: p.observable,
            detectable: p.detectable,
            target_output_controllable: p.target_output_controllable,
            functional_controllable: p.functional_controllable,
            functional_stabilizable: p.functional_stabilizable,
            functional_observable: p.functional_observable,
            functional_detectable: p.functional_detectable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub status: String,
    pub dimensions: Dimensions,
    pub verdicts: Verdicts,
    /// Some decision was within a factor of ten of its threshold.
    pub marginal: bool,
    pub evidence: Vec<EvidenceJson>,
}

pub fn analysis_report(sys: &SystemTriple, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<AnalysisReport> {
    let report = property_report(sys, f, tol)?;
    Ok(AnalysisReport {
        status: "ok".into(),
        dimensions: Dimensions {
            n: sys.states(),
            m: sys.inputs(),
            p: sys.outputs(),
            r: f.rows(),
        },
        verdicts: Verdicts::from(&report),
        marginal: report.any_marginal(),
        evidence: report.ranks_evidence.iter().map(EvidenceJson::from).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerJson {
    pub strategy: AugmentationStrategy,
    pub candidates: Vec<CandidateDiagnostic>,
    pub r1: JsonMatrix,
    pub fbar: JsonMatrix,
    pub z: JsonMatrix,
    pub reduced_a: JsonMatrix,
    pub reduced_b: JsonMatrix,
    pub reduced_closed_loop: JsonMatrix,
    pub assigned_poles: JsonSpectrum,
    pub containment_error: Num,
    pub warnings: Vec<String>,
}

impl ControllerJson {
    pub fn new(d: &ControllerDesign, strategy: AugmentationStrategy, candidates: Vec<CandidateDiagnostic>) -> Self {
        Self {
            strategy,
            candidates,
            r1: JsonMatrix(d.r1.clone()),
            fbar: JsonMatrix(d.fbar.clone()),
            z: JsonMatrix(d.z.clone()),
            reduced_a: JsonMatrix(d.reduced_a.clone()),
            reduced_b: JsonMatrix(d.reduced_b.clone()),
            reduced_closed_loop: JsonMatrix(d.reduced_closed_loop()),
            assigned_poles: JsonSpectrum(d.assigned_poles.clone()),
            containment_error: Num(d.containment_error),
            warnings: d.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationJson {
    pub constraint_residual: Num,
    pub h_residual: Num,
    pub j_residual: Num,
    pub spectrum: JsonSpectrum,
    pub passes: bool,
}

impl From<&ObserverVerification> for VerificationJson {
    fn from(v: &ObserverVerification) -> Self {
        Self {
            constraint_residual: Num(v.constraint_residual),
            h_residual: Num(v.h_residual),
            j_residual: Num(v.j_residual),
            spectrum: JsonSpectrum(v.spectrum.clone()),
            passes: v.passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverJson {
    pub strategy: AugmentationStrategy,
    pub candidates: Vec<CandidateDiagnostic>,
    pub r: JsonMatrix,
    pub fbar: JsonMatrix,
    pub n: JsonMatrix,
    pub e: JsonMatrix,
    pub k: JsonMatrix,
    pub j: JsonMatrix,
    pub h: JsonMatrix,
    pub assigned_poles: JsonSpectrum,
    pub verification: VerificationJson,
    pub warnings: Vec<String>,
}

impl ObserverJson {
    pub fn new(
        d: &ObserverDesign,
        verification: &ObserverVerification,
        strategy: AugmentationStrategy,
        candidates: Vec<CandidateDiagnostic>,
    ) -> Self {
        Self {
            strategy,
            candidates,
            r: JsonMatrix(d.r.clone()),
            fbar: JsonMatrix(d.fbar.clone()),
            n: JsonMatrix(d.n.clone()),
            e: JsonMatrix(d.e.clone()),
            k: JsonMatrix(d.k.clone()),
            j: JsonMatrix(d.j.clone()),
            h: JsonMatrix(d.h.clone()),
            assigned_poles: JsonSpectrum(d.assigned_poles.clone()),
            verification: verification.into(),
            warnings: d.warnings.clone(),
        }
    }

    /// Rebuild the design from the written matrices, `f` being the leading rows of `fbar`.
    pub fn to_design(&self) -> ObserverDesign {
        let q = self.fbar.0.nrows() - self.r.0.nrows();
        let f = self.fbar.0.rows(0, q).into_owned();
        let mut d = ObserverDesign::from_parameters(
            &f,
            &self.r.0,
            self.n.0.clone(),
            self.e.0.clone(),
            self.k.0.clone(),
            self.j.0.clone(),
            self.h.0.clone(),
        );
        d.assigned_poles = self.assigned_poles.0.clone();
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationJson {
    pub psi: JsonMatrix,
    pub controller_spectrum: JsonSpectrum,
    pub observer_spectrum: JsonSpectrum,
    pub psi_spectrum: JsonSpectrum,
    pub full_spectrum: JsonSpectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub status: String,
    pub controller: ControllerJson,
    pub observer: ObserverJson,
    pub separation: SeparationJson,
}

pub fn design_report(sys: &SystemTriple, d: &PipelineDesign, tol: &TolerancePolicy) -> Result<DesignReport> {
    let verification = verify_observer(sys, &d.observer, tol)?;
    let s = &d.separation;
    Ok(DesignReport {
        status: "ok".into(),
        controller: ControllerJson::new(&d.controller, d.controller_strategy, d.controller_candidates.clone()),
        observer: ObserverJson::new(&d.observer, &verification, d.observer_strategy, d.observer_candidates.clone()),
        separation: SeparationJson {
            psi: JsonMatrix(s.psi.clone()),
            controller_spectrum: JsonSpectrum(s.controller_spectrum.clone()),
            observer_spectrum: JsonSpectrum(s.observer_spectrum.clone()),
            psi_spectrum: JsonSpectrum(s.psi_spectrum.clone()),
            full_spectrum: JsonSpectrum(s.full_spectrum.clone()),
        },
    })
}

/// Machine-readable failure, written before a non-zero exit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub status: String,
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub candidates: Vec<CandidateDiagnostic>,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        let kind = format!("{e:?}");
        let kind = kind.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string();
        let candidates = match e {
            Error::NoAugmentationFound(c) => c.clone(),
            _ => Vec::new(),
        };
        Self {
            status: "error".into(),
            kind,
            message: e.to_string(),
            candidates,
        }
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.replace(char::is_whitespace, ""))
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Error::Parse(format!("{what}: cannot parse {s:?}"))))
        .collect()
}

/// Comma-separated poles, complex entries written `a+bi`.
pub fn parse_poles(text: &str, what: &str) -> Result<Spectrum> {
    let values: Vec<Complex> = parse_list(text, what)?;
    if values.is_empty() {
        return Err(Error::Parse(format!("{what}: empty pole list")));
    }
    Ok(Spectrum::new(values))
}

/// Comma-separated real vector of length `len`.
pub fn parse_vector(text: &str, len: usize, what: &str) -> Result<Vector> {
    let values: Vec<f64> = parse_list(text, what)?;
    if values.len() != len {
        return Err(Error::DimensionMismatch(format!("{what} has {} entries, expected {len}", values.len())));
    }
    Ok(Vector::from_vec(values))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}
