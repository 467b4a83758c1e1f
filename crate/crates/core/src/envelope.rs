//! Closed-form exponential super/sub-solutions and pointwise audits of
//! simulated fields against them.
//!
//! Radial audits evaluate the planar envelopes at `x·e = r`, the infimum over
//! directions `e`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::radial::{FieldState, RadialGrid, SimulationResult};
use crate::{Error, Result};

/// Lower bound on every returned amplitude.
pub const AMPLITUDE_FLOOR: f64 = 1e-6;
/// Factor applied to each minimal amplitude.
pub const SAFETY_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub a1: f64,
    pub a2: f64,
    pub a_star: f64,
    pub c_audit: f64,
}

/// `A1 e^{−c*(r − c* t)/2}`.
pub fn super_f(t: f64, r: f64, a1: f64, c_star: f64) -> f64 {
    a1 * (-0.5 * c_star * (r - c_star * t)).exp()
}

/// `A* e^{−√a (r − 2√a t)}`.
pub fn super_f_star(t: f64, r: f64, a_star: f64, a: f64) -> f64 {
    let k = a.sqrt();
    a_star * (-k * (r - 2.0 * k * t)).exp()
}

/// `A2 e^{−(c*/2)(r − c_audit t)}`.
pub fn super_c(t: f64, r: f64, a2: f64, c_star: f64, c_audit: f64) -> f64 {
    a2 * (-0.5 * c_star * (r - c_audit * t)).exp()
}

/// `max(0, 1 − g(A1 + A2) e^{−c*(r − c_audit t)/(2d)})`.
pub fn sub_h(t: f64, r: f64, k: &EnvelopeConstants, c_star: f64, g: f64, d: f64) -> f64 {
    let decay = (-c_star * (r - k.c_audit * t) / (2.0 * d)).exp();
    (1.0 - g * (k.a1 + k.a2) * decay).max(0.0)
}

/// Smallest `A` with `A e^{−κ r} ≥ u(r)` on the grid: `max_r u(r) e^{κ r}`.
fn minimal_amplitude(u: &[f64], grid: &RadialGrid, kappa: f64) -> f64 {
    u.iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| v * (kappa * grid.r(i)).exp())
        .fold(0.0, f64::max)
}

/// Smallest `A1` for which `super_f(0, ·) ≥ F₀` on the grid.
pub fn minimal_a1(state0: &FieldState, grid: &RadialGrid, c_star: f64) -> f64 {
    minimal_amplitude(&state0.f, grid, 0.5 * c_star)
}

/// Amplitudes dominating the initial state, each twice its minimal value.
///
/// `A2` must also absorb the `sF` source in the `C` equation:
/// `A2 (c_audit λ − λ² − 1 − s) ≥ s A1` with `λ = c*/2`, and it keeps
/// `g(A1 + A2) > 1` so that the `H` sub-envelope vanishes behind the front.
pub fn choose_constants(state0: &FieldState, grid: &RadialGrid, m: &ModelParams, c_audit: f64) -> Result<EnvelopeConstants> {
    let c_star = m.spreading_speeds().c_star;
    if !(c_audit > c_star) {
        return Err(Error::ParamDomain(format!("c_audit = {c_audit} must exceed c* = {c_star}")));
    }
    let lambda = 0.5 * c_star;
    let a1 = (SAFETY_FACTOR * minimal_a1(state0, grid, c_star)).max(AMPLITUDE_FLOOR);
    let margin = c_audit * lambda - lambda * lambda - 1.0 - m.s;
    let source = if margin > 0.0 { SAFETY_FACTOR * m.s * a1 / margin } else { 0.0 };
    let initial_c = SAFETY_FACTOR * minimal_amplitude(&state0.c, grid, lambda);
    let a2 = source
        .max(initial_c)
        .max(SAFETY_FACTOR / m.g - a1)
        .max(AMPLITUDE_FLOOR);
    let a_star = (SAFETY_FACTOR * minimal_amplitude(&state0.f, grid, m.a.sqrt())).max(AMPLITUDE_FLOOR);
    Ok(EnvelopeConstants { a1, a2, a_star, c_audit })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EnvelopeField {
    F,
    #[serde(rename = "F*")]
    FStar,
    C,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub r: f64,
    pub field: EnvelopeField,
    /// Envelope slack minus the excursion; negative by definition.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HAudit {
    /// Every node, `d = 1`.
    Full,
    /// Only `r ≥ c_audit·t`; used when `d > 1`.
    LeadingEdgeOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub constants: EnvelopeConstants,
    pub c_audit: f64,
    pub h_audit: HAudit,
    pub f_star_audited: bool,
    pub snapshots: usize,
    pub violations: Vec<Violation>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Absolute plus relative slack on an envelope value.
pub fn tolerance(value: f64) -> f64 {
    1e-8 + 1e-6 * value.abs()
}

fn audit_snapshot(
    state: &FieldState,
    grid: &RadialGrid,
    m: &ModelParams,
    k: &EnvelopeConstants,
    h_audit: HAudit,
    f_star: bool,
) -> Vec<Violation> {
    let c_star = m.spreading_speeds().c_star;
    let t = state.t;
    let mut out = Vec::new();
    let mut check = |r: f64, field, excess: f64| {
        if excess < 0.0 {
            out.push(Violation { t, r, field, margin: excess });
        }
    };
    for i in 0..state.len() {
        let r = grid.r(i);
        let fb = super_f(t, r, k.a1, c_star);
        check(r, EnvelopeField::F, fb + tolerance(fb) - state.f[i]);
        if f_star {
            let fs = super_f_star(t, r, k.a_star, m.a);
            check(r, EnvelopeField::FStar, fs + tolerance(fs) - state.f[i]);
        }
        let cb = super_c(t, r, k.a2, c_star, k.c_audit);
        check(r, EnvelopeField::C, cb + tolerance(cb) - state.c[i]);
        let h_checked = match h_audit {
            HAudit::Full => true,
            HAudit::LeadingEdgeOnly => r >= k.c_audit * t,
        };
        if h_checked {
            let hb = sub_h(t, r, k, c_star, m.g, m.d);
            check(r, EnvelopeField::H, state.h[i] - (hb - tolerance(hb)));
        }
    }
    out
}

/// Audits every snapshot; violations are ordered by `t`, then `r`, then field.
pub fn audit_states(states: &[FieldState], grid: &RadialGrid, m: &ModelParams, k: &EnvelopeConstants) -> EnvelopeReport {
    let h_audit = if m.d == 1.0 { HAudit::Full } else { HAudit::LeadingEdgeOnly };
    let f_star = m.a < 1.0 + m.s;
    let mut violations: Vec<Violation> = states
        .par_iter()
        .flat_map_iter(|s| audit_snapshot(s, grid, m, k, h_audit, f_star))
        .collect();
    violations.sort_by(|x, y| {
        x.t.total_cmp(&y.t)
            .then(x.r.total_cmp(&y.r))
            .then(x.field.cmp(&y.field))
    });
    EnvelopeReport {
        constants: *k,
        c_audit: k.c_audit,
        h_audit,
        f_star_audited: f_star,
        snapshots: states.len(),
        violations,
    }
}

pub fn audit_envelopes(sim: &SimulationResult, k: &EnvelopeConstants) -> EnvelopeReport {
    audit_states(&sim.snapshots, sim.grid(), &sim.config.params, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{init_state, InitSpec};
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn high_slow() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0, 2.0, 1.0, 1).unwrap()
    }

    #[test]
    fn super_f_examples() {
        let c = 2.0 * SQRT2;
        assert_eq!(super_f(10.0, c * 10.0, 5.0, c), 5.0);
        let v = super_f(10.0, c * 10.0 + 2.0, 5.0, c);
        assert!((v - 5.0 * (-2.0 * SQRT2).exp()).abs() < 1e-15);
        assert!((v - 0.2958).abs() < 1e-3);
        assert!(super_f(1.0, 3.0, 5.0, c) > super_f(1.0, 3.1, 5.0, c));
    }

    #[test]
    fn super_f_star_examples() {
        assert_eq!(super_f_star(5.0, 10.0, 3.0, 1.0), 3.0);
        assert!((super_f_star(5.0, 11.0, 3.0, 1.0) - 3.0 * (-1f64).exp()).abs() < 1e-12);
        assert!(super_f_star(5.0, 11.0, 3.0, 1.0) > super_f_star(5.0, 12.0, 3.0, 1.0));
    }

    #[test]
    fn super_c_and_sub_h_examples() {
        let c = 2.0 * SQRT2;
        let ca = 1.05 * c;
        assert_eq!(super_c(4.0, ca * 4.0, 7.0, c, ca), 7.0);
        assert!((super_c(4.0, ca * 4.0 + 1.0, 7.0, c, ca) - 7.0 * (-SQRT2).exp()).abs() < 1e-12);
        let k = EnvelopeConstants { a1: 1.0, a2: 1.0, a_star: 1.0, c_audit: ca };
        assert_eq!(sub_h(4.0, ca * 4.0, &k, c, 2.0, 1.0), 0.0);
        assert!(sub_h(4.0, 1e4, &k, c, 2.0, 1.0) > 1.0 - 1e-12);
        let v = sub_h(4.0, ca * 4.0 + 3.0, &k, c, 0.25, 2.0);
        assert!((v - (1.0 - 0.5 * (-c * 3.0 / 4.0).exp())).abs() < 1e-12);
    }

    #[test]
    fn zero_farmers_give_the_floor() {
        let grid = RadialGrid::new(0.1, 500, 1).unwrap();
        let s = FieldState::constant(&grid, 0.0, 0.0, 0.0, 1.0);
        let k = choose_constants(&s, &grid, &high_slow(), 1.05 * 2.0 * SQRT2).unwrap();
        assert_eq!(k.a1, AMPLITUDE_FLOOR);
        assert_eq!(k.a_star, AMPLITUDE_FLOOR);
    }

    #[test]
    fn plateau_minimal_amplitude() {
        let grid = RadialGrid::new(0.1, 500, 1).unwrap();
        let mut s = FieldState::constant(&grid, 0.0, 0.0, 0.0, 1.0);
        for (i, r) in grid.nodes().enumerate() {
            if r < 5.0 - 1e-9 {
                s.f[i] = 1.0;
            }
        }
        let c = 2.0 * SQRT2;
        // grid maximization: the last plateau node, r = 4.9
        let oracle = grid
            .nodes()
            .filter(|&r| r < 5.0 - 1e-9)
            .map(|r| (SQRT2 * r).exp())
            .fold(0.0, f64::max);
        assert!((minimal_a1(&s, &grid, c) - oracle).abs() < 1e-9 * oracle);
        // the continuum supremum e^{√2·5} ≈ 1177.4 lies one cell beyond the last plateau node
        let continuum = (SQRT2 * 5.0).exp();
        assert!((continuum - 1174.5).abs() / continuum < 5e-3);
        assert!(oracle < continuum && oracle * (SQRT2 * 0.1).exp() > continuum * (1.0 - 1e-12));
        let k = choose_constants(&s, &grid, &high_slow(), 1.05 * c).unwrap();
        assert!((k.a1 - 2.0 * oracle).abs() < 1e-9 * oracle);
    }

    #[test]
    fn c_audit_must_exceed_c_star() {
        let grid = RadialGrid::new(0.1, 500, 1).unwrap();
        let s = FieldState::constant(&grid, 0.0, 0.0, 0.0, 1.0);
        assert!(choose_constants(&s, &grid, &high_slow(), 2.0).is_err());
    }

    #[test]
    fn zero_farmer_run_has_no_violations() {
        let grid = RadialGrid::new(0.1, 500, 1).unwrap();
        let m = high_slow();
        let states: Vec<FieldState> = (0..5)
            .map(|k| FieldState::constant(&grid, 10.0 * k as f64, 0.0, 0.0, 1.0))
            .collect();
        let k = choose_constants(&states[0], &grid, &m, 1.05 * 2.0 * SQRT2).unwrap();
        let report = audit_states(&states, &grid, &m, &k);
        assert!(report.passed());
        assert_eq!(report.h_audit, HAudit::Full);
    }

    #[test]
    fn halved_minimal_amplitude_is_caught() {
        let grid = RadialGrid::new(0.1, 1000, 1).unwrap();
        let m = high_slow();
        let s = init_state(&grid, &InitSpec::default()).unwrap();
        let c = 2.0 * SQRT2;
        let mut k = choose_constants(&s, &grid, &m, 1.05 * c).unwrap();
        assert!(audit_states(std::slice::from_ref(&s), &grid, &m, &k).passed());
        k.a1 = 0.5 * minimal_a1(&s, &grid, c);
        let report = audit_states(std::slice::from_ref(&s), &grid, &m, &k);
        assert!(report.violations.iter().any(|v| v.field == EnvelopeField::F && v.t == 0.0));
    }

    #[test]
    fn wide_diffusion_limits_h_audit() {
        let grid = RadialGrid::new(0.1, 200, 1).unwrap();
        let m = ModelParams::new(1.0, 1.0, 1.0, 2.0, 3.0, 1).unwrap();
        // H badly below the envelope behind r = c_audit t only
        let mut s = FieldState::constant(&grid, 2.0, 0.0, 0.0, 1.0);
        s.h[0] = 0.0;
        let k = EnvelopeConstants { a1: 1e-6, a2: 1e-6, a_star: 1e-6, c_audit: 3.0 };
        let report = audit_states(&[s], &grid, &m, &k);
        assert_eq!(report.h_audit, HAudit::LeadingEdgeOnly);
        assert!(report.passed());
    }

    proptest! {
        #[test]
        fn envelopes_are_monotone_in_amplitudes(
            t in 0.0..50.0f64, r in 0.0..200.0f64, a in 0.01..10.0f64, bump in 0.0..5.0f64
        ) {
            let c = 2.0 * SQRT2;
            prop_assert!(super_f(t, r, a + bump, c) >= super_f(t, r, a, c));
            prop_assert!(super_c(t, r, a + bump, c, 1.05 * c) >= super_c(t, r, a, c, 1.05 * c));
            prop_assert!(super_f_star(t, r, a + bump, 1.0) >= super_f_star(t, r, a, 1.0));
            let lo = EnvelopeConstants { a1: a, a2: a, a_star: a, c_audit: 1.05 * c };
            let hi = EnvelopeConstants { a1: a + bump, ..lo };
            prop_assert!(sub_h(t, r, &hi, c, 2.0, 1.0) <= sub_h(t, r, &lo, c, 2.0, 1.0));
        }

        #[test]
        fn chosen_constants_dominate_initial_data(amp in 0.1..5.0f64, support in 1.0..20.0f64) {
            let grid = RadialGrid::new(0.1, 1000, 1).unwrap();
            let m = ModelParams::new(4.0, 1.0, 0.5, 0.4, 1.0, 1).unwrap();
            let s = init_state(&grid, &InitSpec { amplitude: amp, support_radius: support }).unwrap();
            let k = choose_constants(&s, &grid, &m, 1.05 * 4.0).unwrap();
            prop_assert!(audit_states(&[s], &grid, &m, &k).passed());
            prop_assert!(m.g * (k.a1 + k.a2) > 1.0);
        }
    }
}
