//! Spatially homogeneous `(C, H)` subsystem
//!
//! ```text
//! C' = C(1 − C) + sCH
//! H' = bH(1 − H − gC)
//! ```
//!
//! and, for `g < 1`, its strict Lyapunov function
//! `Φ = bg[(C − C*) − C* ln(C/C*)] + s[(H − H*) − H* ln(H/H*)]`.

use serde::{Deserialize, Serialize};

use crate::model::{CoexistenceState, ModelParams};
use crate::{Error, Result};

/// Exit bounds of the divergence guard.
pub const GUARD_LOW: f64 = -1e-8;
pub const GUARD_HIGH: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub c: f64,
    pub h: f64,
}

impl OdeState {
    pub fn new(c: f64, h: f64) -> Self {
        Self { c, h }
    }

    /// Strictly inside `Σ = (0, 1+s) × (0, 1)`.
    pub fn in_sigma(&self, m: &ModelParams) -> bool {
        self.c > 0.0 && self.c < 1.0 + m.s && self.h > 0.0 && self.h < 1.0
    }

    pub fn distance(&self, other: &OdeState) -> f64 {
        (self.c - other.c).hypot(self.h - other.h)
    }
}

impl From<CoexistenceState> for OdeState {
    fn from(cs: CoexistenceState) -> Self {
        Self { c: cs.c, h: cs.h }
    }
}

pub fn ode_rhs(x: OdeState, m: &ModelParams) -> [f64; 2] {
    let OdeState { c, h } = x;
    [c * (1.0 - c) + m.s * c * h, m.b * h * (1.0 - h - m.g * c)]
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step(x: OdeState, m: &ModelParams, dt: f64) -> OdeState {
    let shift = |k: [f64; 2], w: f64| OdeState::new(x.c + w * k[0], x.h + w * k[1]);
    let k1 = ode_rhs(x, m);
    let k2 = ode_rhs(shift(k1, 0.5 * dt), m);
    let k3 = ode_rhs(shift(k2, 0.5 * dt), m);
    let k4 = ode_rhs(shift(k3, dt), m);
    OdeState::new(
        x.c + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x.h + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    )
}

/// Largest admissible step `0.01 / max{1+s, b(1 + g(1+s))}`.
pub fn max_ode_dt(m: &ModelParams) -> f64 {
    0.01 / (1.0 + m.s).max(m.b * (1.0 + m.g * (1.0 + m.s)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<OdeState>,
}

impl Trajectory {
    pub fn last(&self) -> OdeState {
        *self.states.last().expect("trajectory holds at least the initial state")
    }
}

/// Integrates from `x0` to `t_end`, sampling every step. The final step is
/// shortened so the trajectory ends exactly at `t_end`.
pub fn integrate_ode(x0: OdeState, m: &ModelParams, dt: f64, t_end: f64) -> Result<Trajectory> {
    let dt_max = max_ode_dt(m);
    if !(dt > 0.0 && dt <= dt_max * (1.0 + 1e-12)) {
        return Err(Error::Config(format!("ODE step {dt} outside (0, {dt_max}]")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("ODE horizon must be nonnegative, got {t_end}")));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0);
    let mut x = x0;
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * dt;
        let t = (k as f64 * dt).min(t_end);
        x = rk4_step(x, m, t - t_prev);
        let inside = |v: f64| (GUARD_LOW..=GUARD_HIGH).contains(&v);
        if !(inside(x.c) && inside(x.h)) {
            return Err(Error::Divergence { t, c: x.c, h: x.h });
        }
        times.push(t);
        states.push(x);
    }
    Ok(Trajectory { times, states })
}

fn lyapunov_target(x: OdeState, m: &ModelParams) -> Result<CoexistenceState> {
    let cs = m
        .coexistence_state()
        .ok_or_else(|| Error::Domain(format!("Lyapunov function needs g < 1, got g = {}", m.g)))?;
    if !(x.c > 0.0 && x.h > 0.0) {
        return Err(Error::Domain(format!("Lyapunov function needs C > 0 and H > 0, got ({}, {})", x.c, x.h)));
    }
    Ok(cs)
}

pub fn lyapunov(x: OdeState, m: &ModelParams) -> Result<f64> {
    let cs = lyapunov_target(x, m)?;
    let part = |v: f64, star: f64| (v - star) - star * (v / star).ln();
    Ok(m.b * m.g * part(x.c, cs.c) + m.s * part(x.h, cs.h))
}

/// `∇Φ = (bg(1 − C*/C), s(1 − H*/H))`.
pub fn lyapunov_gradient(x: OdeState, m: &ModelParams) -> Result<[f64; 2]> {
    let cs = lyapunov_target(x, m)?;
    Ok([m.b * m.g * (1.0 - cs.c / x.c), m.s * (1.0 - cs.h / x.h)])
}

/// `dΦ/dt = −bg(C − C*)² − bs(H − H*)²` along the flow.
pub fn lyapunov_dissipation(x: OdeState, m: &ModelParams) -> Result<f64> {
    let cs = lyapunov_target(x, m)?;
    Ok(-m.b * m.g * (x.c - cs.c).powi(2) - m.b * m.s * (x.h - cs.h).powi(2))
}
