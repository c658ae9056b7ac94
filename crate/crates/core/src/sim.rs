//! Fixed-step RK4 simulation of autonomous linear closed loops.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::criteria::SystemTriple;
use crate::error::{Error, Result};
use crate::numlin::{ensure_finite, Matrix, Vector};
use crate::synthesis::{assemble_separation, selector, ControllerDesign, ObserverDesign};

pub const STEP_BUDGET: u64 = 10_000_000;
pub const UNDERFLOW_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_final: 10.0 }
    }
}

impl SimConfig {
    /// Number of RK4 steps, `ceil(t_final / dt)`.
    pub fn steps(&self) -> Result<u64> {
        if !(self.dt.is_finite() && self.t_final.is_finite() && self.dt > 0.0 && self.dt <= self.t_final) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < dt <= t_final, got dt = {}, t_final = {}",
                self.dt, self.t_final
            )));
        }
        let ratio = self.t_final / self.dt;
        // 10 / 1e-3 is 10000.000000000002 in binary
        let steps = (ratio - 1e-9 * ratio.max(1.0)).ceil();
        if steps > STEP_BUDGET as f64 {
            return Err(Error::StepBudgetExceeded {
                steps: steps.min(u64::MAX as f64) as u64,
                budget: STEP_BUDGET,
            });
        }
        Ok(steps.max(1.0) as u64)
    }
}

/// Sampled trajectory. `states` holds the plant state `x`; derived signals
/// live in `channels` and share the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub channels: BTreeMap<String, Vec<Vector>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Named signal; `"x"` is the state itself.
    pub fn channel(&self, name: &str) -> Option<&[Vector]> {
        if name == "x" {
            Some(&self.states)
        } else {
            self.channels.get(name).map(Vec::as_slice)
        }
    }

    pub fn last(&self, name: &str) -> Option<&Vector> {
        self.channel(name).and_then(|c| c.last())
    }
}

fn rk4_step(a: &Matrix, x: &Vector, dt: f64) -> Vector {
    let k1 = a * x;
    let k2 = a * (x + &k1 * (dt / 2.0));
    let k3 = a * (x + &k2 * (dt / 2.0));
    let k4 = a * (x + &k3 * dt);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn integrate(a: &Matrix, x0: &Vector, cfg: &SimConfig) -> Result<(Vec<f64>, Vec<Vector>)> {
    let steps = cfg.steps()? as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    times.push(0.0);
    xs.push(x.clone());
    for k in 1..=steps {
        x = rk4_step(a, &x, cfg.dt);
        times.push(k as f64 * cfg.dt);
        xs.push(x.clone());
    }
    Ok((times, xs))
}

/// Integrate `x' = Acl x` from `x0`.
pub fn simulate_lti(acl: &Matrix, x0: &Vector, cfg: &SimConfig) -> Result<Trace> {
    if acl.nrows() != acl.ncols() || acl.nrows() != x0.len() {
        return Err(Error::DimensionMismatch(format!(
            "Acl is {}x{}, x0 has length {}",
            acl.nrows(),
            acl.ncols(),
            x0.len()
        )));
    }
    ensure_finite(acl, "Acl")?;
    ensure_finite(&Matrix::from_column_slice(x0.len(), 1, x0.as_slice()), "x0")?;
    let (times, states) = integrate(acl, x0, cfg)?;
    Ok(Trace { times, states, channels: BTreeMap::new() })
}

/// Plant plus functional observer under `u = -Z P (w + E y)`.
///
/// `w0` defaults to zero. Channels: `w`, `z = F x`, `zhat` (first `r` entries of
/// `w + E y`), `err = F̄ x - (w + E y)` and `u`.
pub fn simulate_observer_closed_loop(
    sys: &SystemTriple,
    ctrl: &ControllerDesign,
    obs: &ObserverDesign,
    x0: &Vector,
    w0: Option<&Vector>,
    cfg: &SimConfig,
) -> Result<Trace> {
    let n = sys.states();
    let q = obs.order();
    let f_rows = obs.fbar.nrows() - obs.r.nrows();
    let loop_ = assemble_separation(sys, ctrl, obs, &Default::default())?;
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!("x0 has length {}, expected {n}", x0.len())));
    }
    let w0 = match w0 {
        Some(w) if w.len() != q => {
            return Err(Error::DimensionMismatch(format!("w0 has length {}, expected {q}", w.len())));
        }
        Some(w) => w.clone(),
        None => Vector::zeros(q),
    };
    // integrate over (x, ε), ε = (F̄ - EC) x - w; the (x, w) form carries gains that cancel
    let g = &obs.fbar - &obs.e * sys.c();
    let mut xi0 = Vector::zeros(n + q);
    xi0.rows_mut(0, n).copy_from(x0);
    xi0.rows_mut(n, q).copy_from(&(&g * x0 - &w0));
    let trace = simulate_lti(&loop_.a_error, &xi0, cfg)?;

    let zp = &ctrl.z * selector(ctrl.order(), q);
    let f = obs.fbar.rows(0, f_rows);
    let names = ["w", "z", "zhat", "err", "u"];
    let mut channels: BTreeMap<String, Vec<Vector>> =
        names.iter().map(|s| (s.to_string(), Vec::with_capacity(trace.len()))).collect();
    let mut states = Vec::with_capacity(trace.len());
    for xi in &trace.states {
        let x = xi.rows(0, n).into_owned();
        let eps = xi.rows(n, q).into_owned();
        // ẑ_aug = w + E y = F̄ x - ε
        let zhat_aug = &obs.fbar * &x - &eps;
        let values = [
            &g * &x - &eps,
            f * &x,
            zhat_aug.rows(0, f_rows).into_owned(),
            eps,
            -(&zp * &zhat_aug),
        ];
        for (name, v) in names.iter().zip(values) {
            channels.get_mut(*name).expect("channel exists").push(v);
        }
        states.push(x);
    }
    Ok(Trace { times: trace.times, states, channels })
}

/// Least-squares slope of `ln ||channel(t)||` over `t0 <= t <= t1`.
pub fn decay_rate(trace: &Trace, channel: &str, window: (f64, f64)) -> Result<f64> {
    let signal = trace
        .channel(channel)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown channel {channel:?}")))?;
    let (t0, t1) = window;
    let slack = 1e-9 * t1.abs().max(1.0);
    let mut pts = Vec::new();
    for (t, v) in trace.times.iter().zip(signal) {
        if *t < t0 - slack || *t > t1 + slack {
            continue;
        }
        let norm = v.norm();
        if !(norm >= UNDERFLOW_FLOOR) {
            return Err(Error::SignalUnderflow { floor: UNDERFLOW_FLOOR });
        }
        pts.push((*t, norm.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidConfig(format!("window [{t0}, {t1}] holds fewer than two samples")));
    }
    let len = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::numlin::TolerancePolicy;
    use crate::synthesis::{design_functional_controller, design_functional_observer, DesignOptions};

    fn scalar(a: f64) -> Matrix {
        Matrix::from_element(1, 1, a)
    }

    #[test]
    fn step_count() {
        assert_eq!(SimConfig::default().steps().unwrap(), 10_000);
        assert_eq!(SimConfig { dt: 0.3, t_final: 1.0 }.steps().unwrap(), 4);
        assert!(matches!(SimConfig { dt: 0.0, t_final: 1.0 }.steps(), Err(Error::InvalidConfig(_))));
        assert!(matches!(SimConfig { dt: 2.0, t_final: 1.0 }.steps(), Err(Error::InvalidConfig(_))));
        assert!(matches!(
            SimConfig { dt: 1e-9, t_final: 1.0 }.steps(),
            Err(Error::StepBudgetExceeded { .. })
        ));
    }

    #[test]
    fn scalar_exponential() {
        let cfg = SimConfig { dt: 1e-3, t_final: 1.0 };
        let tr = simulate_lti(&scalar(-3.0), &Vector::from_element(1, 1.0), &cfg).unwrap();
        assert_eq!(tr.len(), 1001);
        assert!((tr.states[1000][0] - (-3.0f64).exp()).abs() < 1e-6);
        assert!((tr.times[1000] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_dynamics_is_constant() {
        let x0 = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let tr = simulate_lti(&Matrix::zeros(3, 3), &x0, &SimConfig { dt: 0.1, t_final: 1.0 }).unwrap();
        assert!(tr.states.iter().all(|x| x == &x0));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |dt: f64| {
            let tr = simulate_lti(&scalar(-1.0), &Vector::from_element(1, 1.0), &SimConfig { dt, t_final: 1.0 }).unwrap();
            (tr.states.last().unwrap()[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio >= 16.0 * 0.9, "ratio {ratio}");
    }

    #[test]
    fn skew_symmetric_preserves_norm() {
        let a = Matrix::from_row_slice(3, 3, &[0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0]);
        let x0 = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let tr = simulate_lti(&a, &x0, &SimConfig::default()).unwrap();
        let drift = tr.states.iter().map(|x| (x.norm() - x0.norm()).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-6, "drift {drift:e}");
    }

    #[test]
    fn triangular_psi_closed_form() {
        let psi = Matrix::from_row_slice(2, 2, &[-3.0, 6.0, 0.0, -6.0]);
        let tr = simulate_lti(&psi, &Vector::from_vec(vec![1.0, 1.0]), &SimConfig::default()).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states).step_by(250) {
            let exact = 3.0 * (-3.0 * t).exp() - 2.0 * (-6.0 * t).exp();
            assert!((x[0] - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn decay_of_pure_exponentials() {
        for rate in [-3.0, -6.0] {
            let tr = simulate_lti(&scalar(rate), &Vector::from_element(1, 1.0), &SimConfig { dt: 1e-3, t_final: 5.0 }).unwrap();
            assert!((decay_rate(&tr, "x", (0.0, 5.0)).unwrap() - rate).abs() < 0.01);
        }
        let tr = simulate_lti(&scalar(-40.0), &Vector::from_element(1, 1.0), &SimConfig { dt: 1e-3, t_final: 5.0 }).unwrap();
        assert!(matches!(decay_rate(&tr, "x", (0.0, 5.0)), Err(Error::SignalUnderflow { .. })));
    }

    fn example2_designs() -> (crate::catalog::Example, ControllerDesign, ObserverDesign) {
        let tol = TolerancePolicy::default();
        let ex = catalog::example2();
        let f = ex.functional();
        let none = Matrix::zeros(0, 5);
        let c = design_functional_controller(&ex.system, &f, &none, &ex.controller_poles, DesignOptions::default(), &tol).unwrap();
        let o = design_functional_observer(&ex.system, &f, &none, &ex.observer_poles, DesignOptions::default(), &tol).unwrap();
        (ex, c, o)
    }

    #[test]
    fn example2_closed_loop_decay() {
        let (ex, c, o) = example2_designs();
        let x0 = Vector::from_element(5, 1.0);
        let tr = simulate_observer_closed_loop(&ex.system, &c, &o, &x0, None, &SimConfig::default()).unwrap();
        assert!(tr.last("z").unwrap().norm() <= 1e-6);
        assert!(tr.last("err").unwrap().norm() <= 1e-9);
        assert!((decay_rate(&tr, "err", (0.5, 4.0)).unwrap() + 6.0).abs() < 0.05);
        assert!((decay_rate(&tr, "z", (5.0, 10.0)).unwrap() + 3.0).abs() < 0.15);
        assert_eq!(tr.channel("u").unwrap()[0].len(), 1);
    }

    #[test]
    fn equilibrium_stays_at_rest() {
        let (ex, c, o) = example2_designs();
        let tr = simulate_observer_closed_loop(&ex.system, &c, &o, &Vector::zeros(5), None, &SimConfig { dt: 0.01, t_final: 1.0 })
            .unwrap();
        assert!(tr.channel("z").unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn wrong_initial_lengths() {
        let (ex, c, o) = example2_designs();
        let cfg = SimConfig::default();
        assert!(simulate_observer_closed_loop(&ex.system, &c, &o, &Vector::zeros(4), None, &cfg).is_err());
        assert!(simulate_observer_closed_loop(&ex.system, &c, &o, &Vector::zeros(5), Some(&Vector::zeros(2)), &cfg).is_err());
    }
}
