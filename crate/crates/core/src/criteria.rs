//! Reference verification suite: twelve numbered checks built on the
//! reference simulations, the ODE subsystem and the spectral kernels.
//!
//! Every check returns a [`CriterionOutcome`] with its measured values, so
//! the same suite backs the acceptance tests and the `verify` command.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{audit_envelopes, audit_states, choose_constants, minimal_a1, EnvelopeReport};
use crate::fronts::{drift_fit, level_set_position, peak_detect, speed_estimate, zone_stats, Field, Zone};
use crate::model::ModelParams;
use crate::ode::{integrate_ode, lyapunov, lyapunov_dissipation, lyapunov_gradient, max_ode_dt, ode_rhs, OdeState};
use crate::radial::{diffusion, simulate, FieldState, InitSpec, RadialGrid, SimConfig, SimulationResult};
use crate::spectral::{
    asymptotic_error_at_tau, default_zeta0, eigen_residual, eigenfunction, operator_l, poincare_pair,
    principal_zeta0, random_dirichlet_function, self_adjoint_defect, weighted_inner, DirichletParams, RhoGrid,
    SpectralProfile, RHO_MAX,
};
use crate::Result;

/// Default seed for randomized test functions and ODE starts.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub measurements: BTreeMap<String, f64>,
}

impl CriterionOutcome {
    fn new(id: u8, name: &str) -> Self {
        Self {
            id,
            name: name.to_string(),
            passed: true,
            summary: String::new(),
            measurements: BTreeMap::new(),
        }
    }

    fn record(&mut self, key: impl Into<String>, value: f64) {
        self.measurements.insert(key.into(), value);
    }

    /// Records `value` and folds `ok` into the verdict.
    fn check(&mut self, key: impl Into<String>, value: f64, ok: bool) {
        self.record(key, value);
        self.passed &= ok;
    }

    fn fail(&mut self, why: impl Into<String>) {
        self.passed = false;
        let why = why.into();
        if self.summary.is_empty() {
            self.summary = why;
        } else {
            self.summary = format!("{}; {why}", self.summary);
        }
    }

    fn with_summary(mut self, text: String) -> Self {
        if self.summary.is_empty() {
            self.summary = text;
        } else {
            self.summary = format!("{text}; {}", self.summary);
        }
        self
    }

    /// One line: `PASS [n] name: summary`.
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.summary
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub all_passed: bool,
    pub criteria: Vec<CriterionOutcome>,
}

/// Parameter sets `(a, b, s, g, d)` of the reference runs, all with `N = 1`.
pub const HIGH_SLOW: [f64; 5] = [1.0, 1.0, 1.0, 2.0, 1.0];
pub const HIGH_FAST: [f64; 5] = [4.0, 1.0, 0.5, 2.0, 1.0];
pub const LOW_SLOW: [f64; 5] = [1.0, 1.0, 0.5, 0.4, 1.0];
pub const LOW_FAST: [f64; 5] = [4.0, 1.0, 0.5, 0.4, 1.0];

/// Configuration used for every reference run: `r_max = 1.3·c*·t_end + 50`.
pub fn reference_config(p: [f64; 5], t_end: f64, dr: f64) -> Result<SimConfig> {
    let params = ModelParams::new(p[0], p[1], p[2], p[3], p[4], 1)?;
    let r_max = 1.3 * params.spreading_speeds().c_star * t_end + 50.0;
    Ok(SimConfig {
        params,
        grid: RadialGrid::covering(dr, r_max, 1)?,
        init: InitSpec::default(),
        t_end,
        snapshot_dt: 5.0,
        cfl_factor: 0.8,
        levels: vec![0.05, 0.5],
    })
}

/// The four shared simulations behind criteria 1–8.
#[derive(Debug, Clone)]
pub struct ReferenceRuns {
    /// `(1,1,1,2,1)` to `t = 300`, the high-conversion `a < 1+s` regime.
    pub high_slow: SimulationResult,
    /// `(4,1,0.5,2,1)` to `t = 200`, the high-conversion `a > 1+s` regime.
    pub high_fast: SimulationResult,
    /// `(1,1,0.5,0.4,1)` to `t = 200`, low-conversion coexistence.
    pub low_slow: SimulationResult,
    /// `(4,1,0.5,0.4,1)` to `t = 200`, low conversion with a trailing farmer peak.
    pub low_fast: SimulationResult,
}

impl ReferenceRuns {
    /// Runs the four simulations concurrently.
    pub fn compute(dr: f64) -> Result<Self> {
        let specs = [(HIGH_SLOW, 300.0), (HIGH_FAST, 200.0), (LOW_SLOW, 200.0), (LOW_FAST, 200.0)];
        let mut runs: Vec<SimulationResult> = specs
            .par_iter()
            .map(|&(p, t_end)| simulate(&reference_config(p, t_end, dr)?))
            .collect::<Result<_>>()?;
        let low_fast = runs.pop().unwrap();
        let low_slow = runs.pop().unwrap();
        let high_fast = runs.pop().unwrap();
        let high_slow = runs.pop().unwrap();
        Ok(Self {
            high_slow,
            high_fast,
            low_slow,
            low_fast,
        })
    }

    pub fn all(&self) -> [(&'static str, &SimulationResult); 4] {
        [
            ("high_slow", &self.high_slow),
            ("high_fast", &self.high_fast),
            ("low_slow", &self.low_slow),
            ("low_fast", &self.low_fast),
        ]
    }
}

fn c_star(sim: &SimulationResult) -> f64 {
    sim.config.params.spreading_speeds().c_star
}

fn snapshot(sim: &SimulationResult, t: f64) -> &FieldState {
    sim.snapshot_at(t)
        .unwrap_or_else(|| panic!("reference run has no snapshot at t = {t}"))
}

/// Linear interpolation of a nodal profile at radius `r`.
fn value_at(profile: &[f64], dr: f64, r: f64) -> f64 {
    let x = r / dr;
    let i = (x.floor() as usize).min(profile.len() - 2);
    let frac = x - i as f64;
    profile[i] * (1.0 - frac) + profile[i + 1] * frac
}

pub fn spreading_speed(runs: &ReferenceRuns) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(1, "spreading speed");
    let mut parts = Vec::new();
    for (name, sim) in [("high_slow", &runs.high_slow), ("high_fast", &runs.high_fast)] {
        let c = c_star(sim);
        match speed_estimate(&sim.fronts, Field::FC, 0.5, (75.0, 150.0)) {
            Ok(e) => {
                let rel = (e.c_hat - c).abs() / c;
                out.record(format!("{name}.c_hat"), e.c_hat);
                out.check(format!("{name}.rel_error"), rel, rel < 0.03);
                parts.push(format!("{name} c_hat={:.4} vs c*={c:.4} ({:.2}%)", e.c_hat, 100.0 * rel));
            }
            Err(e) => out.fail(format!("{name}: {e}")),
        }
    }
    out.with_summary(parts.join(", "))
}

pub fn leading_edge(runs: &ReferenceRuns) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(2, "leading edge");
    let mut parts = Vec::new();
    for (name, sim) in [("high_slow", &runs.high_slow), ("high_fast", &runs.high_fast)] {
        let zone = Zone::Exterior { c: 1.2 * c_star(sim) };
        match zone_stats(snapshot(sim, 150.0), sim.grid(), zone) {
            Ok(z) => {
                out.check(format!("{name}.sup_FC"), z.fc.sup, z.fc.sup < 1e-3);
                out.check(format!("{name}.inf_H"), z.h.inf, z.h.inf > 0.99);
                parts.push(format!("{name} sup(F+C)={:.2e} inf H={:.6}", z.fc.sup, z.h.inf));
            }
            Err(e) => out.fail(format!("{name}: {e}")),
        }
    }
    out.with_summary(parts.join(", "))
}

pub fn high_conversion_final_zone(runs: &ReferenceRuns) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(3, "high-conversion final zone");
    let mut parts = Vec::new();
    for (name, sim) in [("high_fast", &runs.high_fast), ("high_slow", &runs.high_slow)] {
        let zone = Zone::Ball { c: 0.5 * c_star(sim) };
        match zone_stats(snapshot(sim, 200.0), sim.grid(), zone) {
            Ok(z) => {
                let dev = z.fc.max_deviation(1.0);
                out.check(format!("{name}.ball.sup_H"), z.h.sup, z.h.sup < 1e-2);
                out.check(format!("{name}.ball.dev_FC"), dev, dev < 2e-2);
                parts.push(format!("{name} ball sup H={:.2e} |1-(F+C)|={:.2e}", z.h.sup, dev));
            }
            Err(e) => out.fail(format!("{name}: {e}")),
        }
    }
    let sim = &runs.high_slow;
    let speeds = sim.config.params.spreading_speeds();
    let zone = Zone::Annulus {
        c1: 1.1 * speeds.c_star_star,
        c2: 0.9 * speeds.c_star,
    };
    match zone_stats(snapshot(sim, 200.0), sim.grid(), zone) {
        Ok(z) => {
            let dev = z.c.max_deviation(1.0);
            out.check("high_slow.annulus.sup_F", z.f.sup, z.f.sup < 1e-2);
            out.check("high_slow.annulus.dev_C", dev, dev < 2e-2);
            parts.push(format!("high_slow annulus sup F={:.2e} |1-C|={:.2e}", z.f.sup, dev));
        }
        Err(e) => out.fail(format!("annulus: {e}")),
    }
    out.with_summary(parts.join(", "))
}

pub fn low_conversion_coexistence(runs: &ReferenceRuns) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(4, "low-conversion coexistence");
    let sim = &runs.low_slow;
    let m = sim.config.params;
    let branch = m
        .coexistence_sufficient_condition()
        .map(|c| c.small_conversion)
        .unwrap_or(false);
    out.check("first_branch", branch as u8 as f64, branch);
    let cs = m.coexistence_state().expect("g < 1");
    let zone = Zone::Ball { c: 0.5 * c_star(sim) };
    let summary = match zone_stats(snapshot(sim, 200.0), sim.grid(), zone) {
        Ok(z) => {
            let dc = z.c.max_deviation(cs.c);
            let dh = z.h.max_deviation(cs.h);
            out.check("dev_C", dc, dc < 2e-2);
            out.check("dev_H", dh, dh < 2e-2);
            out.check("sup_F", z.f.sup, z.f.sup < 1e-2);
            format!(
                "first branch {branch}, |C-{:.2}|={dc:.2e} |H-{:.2}|={dh:.2e} sup F={:.2e}",
                cs.c, cs.h, z.f.sup
            )
        }
        Err(e) => {
            out.fail(e.to_string());
            String::new()
        }
    };
    out.with_summary(summary)
}

pub fn small_peak(runs: &ReferenceRuns) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(5, "small farmer peak");
    let sim = &runs.low_fast;
    let dr = sim.grid().dr;
    let c = c_star(sim);
    let mut min_peak = f64::INFINITY;
    let mut max_behind = 0f64;
    for s in sim.snapshots.iter().filter(|s| s.t >= 100.0 - 1e-9 && s.t <= 200.0 + 1e-9) {
        let Some(front) = level_set_position(&s.total_farmers(), dr, 0.05) else {
            out.fail(format!("no F+C level-0.05 front at t = {}", s.t));
            continue;
        };
        min_peak = min_peak.min(peak_detect(&s.f, dr, front).value);
        max_behind = max_behind.max(value_at(&s.f, dr, 0.5 * c * s.t));
    }
    out.check("min_peak", min_peak, min_peak > 0.05);
    out.check("max_F_at_half_speed", max_behind, max_behind < 1e-2);
    out.with_summary(format!(
        "t in [100,200]: min peak F={min_peak:.4}, max F(0.5 c* t)={max_behind:.2e}"
    ))
}

pub fn log_drift(runs: &ReferenceRuns) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(6, "logarithmic drift");
    let sim = &runs.high_slow;
    let c = c_star(sim);
    let target = 3.0 / c;
    match drift_fit(&sim.fronts, Field::FC, 0.5, c, Some((50.0, 300.0))) {
        Ok(fit) => {
            let ratio = fit.k_hat / target;
            out.record("k_hat", fit.k_hat);
            out.record("b_hat", fit.b_hat);
            out.record("residual_rms", fit.residual_rms);
            out.check("k_hat_over_3_div_c", ratio, (0.5..=2.0).contains(&ratio));
            out.with_summary(format!(
                "k_hat={:.4} = {ratio:.3}·(3/c*), b_hat={:.3}, rms={:.2e}",
                fit.k_hat, fit.b_hat, fit.residual_rms
            ))
        }
        Err(e) => {
            out.fail(e.to_string());
            out
        }
    }
}

/// Envelope reports for each reference run with `c_audit = 1.05·c*`.
pub fn envelope_reports(runs: &ReferenceRuns) -> Result<Vec<(&'static str, EnvelopeReport)>> {
    runs.all()
        .par_iter()
        .map(|&(name, sim)| {
            let c_audit = 1.05 * c_star(sim);
            let k = choose_constants(&sim.snapshots[0], sim.grid(), &sim.config.params, c_audit)?;
            Ok((name, audit_envelopes(sim, &k)))
        })
        .collect()
}

pub fn envelope_audits(runs: &ReferenceRuns) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(7, "envelope audits");
    let reports = match envelope_reports(runs) {
        Ok(r) => r,
        Err(e) => {
            out.fail(e.to_string());
            return out;
        }
    };
    let mut parts = Vec::new();
    for (name, report) in &reports {
        let n = report.violations.len();
        out.check(format!("{name}.violations"), n as f64, n == 0);
        parts.push(format!("{name} {n}"));
    }
    // negative control: A1 at half its minimal value must be caught at t = 0
    let mut control_hits = 0usize;
    for ((name, sim), (_, report)) in runs.all().iter().zip(&reports) {
        let mut k = report.constants;
        k.a1 = 0.5 * minimal_a1(&sim.snapshots[0], sim.grid(), c_star(sim));
        let ctrl = audit_states(&sim.snapshots[..1], sim.grid(), &sim.config.params, &k);
        let hits = ctrl.violations.len();
        out.check(format!("{name}.control_violations"), hits as f64, hits >= 1);
        control_hits += hits;
    }
    out.with_summary(format!(
        "violations: {}; negative control violations at t=0: {control_hits}",
        parts.join(", ")
    ))
}

pub fn solver_invariants(runs: &ReferenceRuns) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(8, "solver invariants");
    let mut parts = Vec::new();
    for (name, sim) in runs.all() {
        let worst = sim.audits.iter().map(|a| a.margin).fold(f64::INFINITY, f64::min);
        let failures = sim.audit_failures().len();
        out.record(format!("{name}.min_margin"), worst);
        out.check(format!("{name}.failures"), failures as f64, failures == 0);
        parts.push(format!("{name} {failures} failures / {} records", sim.audits.len()));
    }
    out.with_summary(parts.join(", "))
}

/// Largest violations observed along one ODE trajectory.
#[derive(Debug, Clone, Copy, Default)]
struct TrajectoryAudit {
    phi_increase: f64,
    identity_error: f64,
    sigma_exit: f64,
    final_distance: f64,
}

fn audit_trajectory(x0: OdeState, m: &ModelParams, dt: f64, t_end: f64) -> Result<TrajectoryAudit> {
    let tr = integrate_ode(x0, m, dt, t_end)?;
    let target: OdeState = m.coexistence_state().expect("g < 1").into();
    let mut audit = TrajectoryAudit::default();
    let mut prev = lyapunov(x0, m)?;
    for (k, x) in tr.states.iter().enumerate() {
        let exit = (-x.c).max(x.c - (1.0 + m.s)).max(-x.h).max(x.h - 1.0);
        audit.sigma_exit = audit.sigma_exit.max(exit);
        if k > 0 {
            let phi = lyapunov(*x, m)?;
            let step = tr.times[k] - tr.times[k - 1];
            audit.phi_increase = audit.phi_increase.max((phi - prev) / step);
            prev = phi;
        }
        if k % 100 == 0 {
            let grad = lyapunov_gradient(*x, m)?;
            let f = ode_rhs(*x, m);
            let err = (lyapunov_dissipation(*x, m)? - (grad[0] * f[0] + grad[1] * f[1])).abs();
            audit.identity_error = audit.identity_error.max(err);
        }
    }
    audit.final_distance = tr.last().distance(&target);
    Ok(audit)
}

pub fn ode_lyapunov(seed: u64) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(9, "ODE Lyapunov function");
    let m = ModelParams::new(1.0, 1.0, 0.5, 0.4, 1.0, 1).expect("valid parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<OdeState> = (0..1000)
        .map(|_| {
            let c = rng.gen_range(0.0..1.0 + m.s).max(1e-9);
            let h = rng.gen_range(0.0..1.0f64).max(1e-9);
            OdeState::new(c, h)
        })
        .collect();
    let dt = max_ode_dt(&m);
    let audits: Result<Vec<TrajectoryAudit>> = starts.par_iter().map(|&x| audit_trajectory(x, &m, dt, 500.0)).collect();
    let audits = match audits {
        Ok(a) => a,
        Err(e) => {
            out.fail(e.to_string());
            return out;
        }
    };
    let worst = |f: fn(&TrajectoryAudit) -> f64| audits.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    // Φ may rise by at most 1e-8·dt per step, i.e. 1e-8 per unit time
    let phi_rate = worst(|a| a.phi_increase);
    let identity = worst(|a| a.identity_error);
    let exit = worst(|a| a.sigma_exit);
    let dist = worst(|a| a.final_distance);
    out.check("max_phi_increase_per_time", phi_rate, phi_rate <= 1e-8);
    out.check("max_identity_error", identity, identity < 1e-10);
    out.check("max_sigma_exit", exit, exit <= 1e-8);
    out.check("max_final_distance", dist, dist < 1e-6);
    out.with_summary(format!(
        "1000 starts: max dPhi/step/dt={phi_rate:.2e}, identity err={identity:.2e}, Sigma exit={exit:.2e}, dist at T=500={dist:.2e}"
    ))
}

pub fn spectral_suite(seed: u64) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(10, "spectral suite");
    let coarse = RhoGrid::new(0.01, RHO_MAX).expect("valid grid");
    let fine = RhoGrid::new(0.005, RHO_MAX).expect("valid grid");

    let phi1 = eigenfunction(1, coarse);
    let l_phi1 = operator_l(&phi1).values.iter().fold(0f64, |m, v| m.max(v.abs()));
    // the same check on the π^{-1/4} scaling, which is 2^{1/4} times larger
    let scaled = SpectralProfile::sample(coarse, |r| PI.powf(-0.25) * r * (-0.25 * r * r).exp());
    let l_scaled = operator_l(&scaled).values.iter().fold(0f64, |m, v| m.max(v.abs()));
    out.check("L_phi1_max", l_phi1, l_phi1 < 1e-4);
    out.check("L_phi1_pi_quarter_max", l_scaled, l_scaled < 1e-4);

    let r2 = eigen_residual(2, fine);
    let r3 = eigen_residual(3, fine);
    out.check("eigen_residual_2", r2, r2 < 1e-3);
    out.check("eigen_residual_3", r3, r3 < 1e-3);

    let norm = weighted_inner(&phi1, &phi1).expect("same grid");
    out.check("phi1_norm_sq", norm, (norm - 1.0).abs() < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut defect = 0f64;
    for _ in 0..100 {
        let f = random_dirichlet_function(&mut rng, coarse);
        let g = random_dirichlet_function(&mut rng, coarse);
        defect = defect.max(self_adjoint_defect(&f, &g).expect("same grid"));
    }
    out.check("self_adjoint_defect", defect, defect < 1e-4);

    let mut worst_ratio = 0f64;
    for _ in 0..200 {
        let f = random_dirichlet_function(&mut rng, coarse);
        let (n0, n1) = poincare_pair(&f);
        worst_ratio = worst_ratio.max(n0 / n1);
    }
    out.check("poincare_max_ratio", worst_ratio, worst_ratio <= 1.0);

    out.with_summary(format!(
        "max|L phi1|={l_phi1:.2e} (pi^-1/4 scaling {l_scaled:.2e}), residuals k=2 {r2:.2e} k=3 {r3:.2e}, \
         self-adjoint defect {defect:.2e}, max ||f||/||f'|| {worst_ratio:.4}, <phi1,phi1>={norm:.9}"
    ))
}

/// Sup relative errors at `τ = 1` for `t0 ∈ {100, 400, 1600}`.
pub fn asymptotic_errors(zeta0: &SpectralProfile) -> Result<Vec<(f64, f64)>> {
    let c = 2.0 * 2f64.sqrt();
    [100.0, 400.0, 1600.0]
        .par_iter()
        .map(|&t0| {
            let p = DirichletParams::critical(t0, c, 1)?;
            Ok((t0, asymptotic_error_at_tau(&p, zeta0, 1.0, 80.0)?))
        })
        .collect()
}

pub fn asymptotic_vs_numeric() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(11, "asymptotic vs numeric");
    let grid = RhoGrid::new(0.005, RHO_MAX).expect("valid grid");
    let errors = match asymptotic_errors(&principal_zeta0(grid)) {
        Ok(e) => e,
        Err(e) => {
            out.fail(e.to_string());
            return out;
        }
    };
    for &(t0, err) in &errors {
        out.record(format!("rel_error_t0_{t0}"), err);
    }
    let monotone = errors.windows(2).all(|w| w[1].1 <= w[0].1);
    let last = errors.last().map(|e| e.1).unwrap_or(f64::INFINITY);
    out.check("monotone", monotone as u8 as f64, monotone);
    out.check("rel_error_at_1600", last, last < 0.25);
    let mut summary = format!(
        "sup rel error at tau=1: {}",
        errors
            .iter()
            .map(|(t0, e)| format!("t0={t0}: {:.4}", e))
            .collect::<Vec<_>>()
            .join(", ")
    );
    // informational: the compact bump on (0,2)
    if let Ok(bump) = asymptotic_errors(&default_zeta0(grid)) {
        for &(t0, err) in &bump {
            out.record(format!("bump_rel_error_t0_{t0}"), err);
        }
        summary.push_str(&format!(
            " (bump data: {})",
            bump.iter().map(|(_, e)| format!("{e:.3}")).collect::<Vec<_>>().join(", ")
        ));
    }
    out.with_summary(summary)
}

/// Max nodal error of the discrete radial diffusion on `cos(πr/L)`, `L = 10`.
pub fn stencil_error(dr: f64, dim: usize) -> f64 {
    let length = 10.0;
    let n = (length / dr).round() as usize + 1;
    let grid = RadialGrid::new(dr, n, dim).expect("valid grid");
    let k = PI / length;
    let u: Vec<f64> = grid.nodes().map(|r| (k * r).cos()).collect();
    let lap = diffusion(&u, &grid, 1.0);
    (0..n - 1)
        .map(|i| {
            let r = grid.r(i);
            let second = -k * k * (k * r).cos();
            let exact = if i == 0 {
                dim as f64 * second
            } else {
                second - (dim as f64 - 1.0) / r * k * (k * r).sin()
            };
            (lap[i] - exact).abs()
        })
        .fold(0.0, f64::max)
}

/// Richardson ratio of the ODE integrator from `(0.1, 0.9)` over `t ∈ [0, 5]`.
pub fn ode_step_ratio() -> Result<f64> {
    let m = ModelParams::new(1.0, 1.0, 0.5, 0.4, 1.0, 1)?;
    let x0 = OdeState::new(0.1, 0.9);
    let dt = max_ode_dt(&m);
    let run = |h: f64| integrate_ode(x0, &m, h, 5.0).map(|t| t.last());
    let (a, b, c) = (run(dt)?, run(dt / 2.0)?, run(dt / 4.0)?);
    Ok(a.distance(&b) / b.distance(&c))
}

pub fn order_of_accuracy() -> CriterionOutcome {
    let mut out = CriterionOutcome::new(12, "order of accuracy");
    let mut worst = f64::INFINITY;
    for dim in [1usize, 2, 3] {
        let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&dr| stencil_error(dr, dim)).collect();
        for (i, w) in errs.windows(2).enumerate() {
            let order = (w[0] / w[1]).log2();
            out.record(format!("radial_order_N{dim}_{i}"), order);
            worst = worst.min(order);
        }
    }
    out.check("radial_min_order", worst, worst >= 1.9);
    match ode_step_ratio() {
        Ok(ratio) => out.check("ode_ratio", ratio, (14.0..=18.0).contains(&ratio)),
        Err(e) => out.fail(e.to_string()),
    }
    let ratio = out.measurements.get("ode_ratio").copied().unwrap_or(f64::NAN);
    out.with_summary(format!("radial min order {worst:.3}, ODE step-halving ratio {ratio:.3}"))
}

/// Runs the whole suite on precomputed reference runs.
pub fn run_all(runs: &ReferenceRuns, seed: u64) -> VerifyReport {
    let criteria = vec![
        spreading_speed(runs),
        leading_edge(runs),
        high_conversion_final_zone(runs),
        low_conversion_coexistence(runs),
        small_peak(runs),
        log_drift(runs),
        envelope_audits(runs),
        solver_invariants(runs),
        ode_lyapunov(seed),
        spectral_suite(seed),
        asymptotic_vs_numeric(),
        order_of_accuracy(),
    ];
    VerifyReport {
        seed,
        all_passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}
