//! Browser bindings: every entry point takes a system file as JSON text and returns JSON text.
//! Failures come back as the same error report the command line prints.

use funcctl::catalog;
use funcctl::io::{analysis_report, design_report, parse_poles, parse_vector, to_json, ErrorReport, SystemFile};
use funcctl::numlin::{Matrix, TolerancePolicy, Vector};
use funcctl::sim::{simulate_observer_closed_loop, SimConfig};
use funcctl::synthesis::{design_pipeline, AugmentMode, DesignOptions, PipelineDesign};
use funcctl::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Plot traces are thinned to at most this many samples.
const MAX_POINTS: usize = 1500;

fn respond<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => to_json(&v),
        Err(e) => to_json(&ErrorReport::from(&e)),
    }
}

fn load(system: &str) -> Result<(SystemFile, TolerancePolicy)> {
    let file = SystemFile::parse(system)?;
    let tol = file.tolerance(TolerancePolicy::default())?;
    Ok((file, tol))
}

fn optional(text: &str) -> Option<&str> {
    Some(text.trim()).filter(|t| !t.is_empty())
}

fn design(file: &SystemFile, tol: &TolerancePolicy, controller_poles: &str, observer_poles: &str, augment: &str) -> Result<PipelineDesign> {
    let augment = match augment {
        "none" => AugmentMode::None,
        "auto" => AugmentMode::Auto,
        "file" => AugmentMode::Given {
            r1: file.r1.clone().ok_or_else(|| Error::Parse("augment \"file\" needs \"R1\" in the system".into()))?,
            r: file.r.clone(),
        },
        other => return Err(Error::Parse(format!("unknown augment mode {other:?}"))),
    };
    let cp = optional(controller_poles).map(|t| parse_poles(t, "controller poles")).transpose()?;
    let op = optional(observer_poles).map(|t| parse_poles(t, "observer poles")).transpose()?;
    design_pipeline(&file.system(tol)?, &file.functional(tol)?, &augment, cp.as_ref(), op.as_ref(), DesignOptions::default(), tol)
}

pub fn analyze(system: &str) -> String {
    respond(load(system).and_then(|(file, tol)| analysis_report(&file.system(&tol)?, &file.functional(&tol)?, &tol)))
}

pub fn design_json(system: &str, controller_poles: &str, observer_poles: &str, augment: &str) -> String {
    respond(load(system).and_then(|(file, tol)| {
        let d = design(&file, &tol, controller_poles, observer_poles, augment)?;
        design_report(&file.system(&tol)?, &d, &tol)
    }))
}

#[derive(Serialize)]
struct Series {
    status: &'static str,
    t: Vec<f64>,
    /// one row per component
    z: Vec<Vec<f64>>,
    zhat: Vec<Vec<f64>>,
    e: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

fn components(samples: &[Vector], keep: &[usize]) -> Vec<Vec<f64>> {
    let width = samples.first().map_or(0, |v| v.len());
    (0..width).map(|i| keep.iter().map(|&k| samples[k][i]).collect()).collect()
}

pub fn simulate(system: &str, controller_poles: &str, observer_poles: &str, augment: &str, x0: &str, t_final: f64, dt: f64) -> String {
    respond(load(system).and_then(|(file, tol)| {
        let cfg = SimConfig { dt, t_final };
        cfg.steps()?;
        let d = design(&file, &tol, controller_poles, observer_poles, augment)?;
        let sys = file.system(&tol)?;
        let x0 = match optional(x0) {
            Some(t) => parse_vector(t, sys.states(), "x0")?,
            None => Vector::from_element(sys.states(), 1.0),
        };
        let trace = simulate_observer_closed_loop(&sys, &d.controller, &d.observer, &x0, None, &cfg)?;
        let stride = trace.len().div_ceil(MAX_POINTS).max(1);
        let mut keep: Vec<usize> = (0..trace.len()).step_by(stride).collect();
        if keep.last() != Some(&(trace.len() - 1)) {
            keep.push(trace.len() - 1);
        }
        let channel = |name: &str| components(trace.channel(name).expect("recorded channel"), &keep);
        Ok(Series {
            status: "ok",
            t: keep.iter().map(|&k| trace.times[k]).collect(),
            z: channel("z"),
            zhat: channel("zhat"),
            e: channel("err"),
            u: channel("u"),
        })
    }))
}

/// A bundled system file: `example1_f1` .. `example1_f4`, `example2`, `example3` or `remark8`.
pub fn example(name: &str) -> String {
    let ex = match name {
        "example2" => catalog::example2(),
        "example3" => catalog::example3(),
        "remark8" => catalog::remark8(),
        _ => match name.strip_prefix("example1_f").and_then(|i| i.parse::<usize>().ok()) {
            Some(i @ 1..=4) => catalog::example1(i - 1),
            _ => return respond::<()>(Err(Error::Parse(format!("unknown example {name:?}")))),
        },
    };
    let file = SystemFile {
        a: ex.system.a().clone(),
        b: ex.system.b().clone(),
        c: ex.system.c().clone(),
        f: ex.f.clone(),
        r1: None::<Matrix>,
        r: None,
        tolerances: Default::default(),
    };
    file.to_json()
}

#[wasm_bindgen]
pub fn analyze_system(system: &str) -> String {
    analyze(system)
}

#[wasm_bindgen]
pub fn design_system(system: &str, controller_poles: &str, observer_poles: &str, augment: &str) -> String {
    design_json(system, controller_poles, observer_poles, augment)
}

#[wasm_bindgen]
pub fn simulate_system(system: &str, controller_poles: &str, observer_poles: &str, augment: &str, x0: &str, t_final: f64, dt: f64) -> String {
    simulate(system, controller_poles, observer_poles, augment, x0, t_final, dt)
}

#[wasm_bindgen]
pub fn example_system(name: &str) -> String {
    example(name)
}
