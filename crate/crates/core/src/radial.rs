//! Explicit finite-difference solver for the radially-symmetric system
//!
//! ```text
//! ∂t u = D (∂r² u + (N−1)/r ∂r u) + reaction(u)
//! ```
//!
//! on the uniform grid `r_i = i·dr`, `i = 0..n`. At the origin the
//! singular term is replaced by its symmetric limit `(N−1) ∂r² u`, so the
//! diffusion operator there is `N ∂r² u` with the ghost value `u_{-1} = u_1`.
//! The last node is frozen at its initial value, which for the standard
//! initial data is the leading-edge state `(0, 0, 1)`.
//!
//! Time integration is Heun's method (explicit trapezoid). No clipping is
//! applied: small negative values are left for the invariant audits to find.

use serde::{Deserialize, Serialize};

use crate::fronts::{level_set_position, Field, FrontSeries};
use crate::model::{reaction, ModelParams};
use crate::{Error, Result};

/// Tolerance on nonnegativity (and on `H <= 1`).
pub const TOL_NEG: f64 = 1e-10;
/// Absolute slack on the `F + C` bound and on the `F + C + H` lower barrier.
pub const TOL_BOUND: f64 = 1e-6;
/// Level used to detect fronts approaching the far boundary.
pub const BOUNDARY_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub dr: f64,
    pub n_points: usize,
    pub dim: usize,
}

impl RadialGrid {
    pub fn new(dr: f64, n_points: usize, dim: usize) -> Result<Self> {
        if !(dr > 0.0 && dr.is_finite()) {
            return Err(Error::Config(format!("dr must be positive, got {dr}")));
        }
        if n_points < 16 {
            return Err(Error::Config(format!("grid needs at least 16 nodes, got {n_points}")));
        }
        if dim == 0 {
            return Err(Error::Config("spatial dimension must be at least 1".into()));
        }
        Ok(Self { dr, n_points, dim })
    }

    /// Grid whose last node sits at or just beyond `r_max`.
    pub fn covering(dr: f64, r_max: f64, dim: usize) -> Result<Self> {
        let n = (r_max / dr - 1e-9).ceil() as usize + 1;
        Self::new(dr, n, dim)
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    pub fn r_max(&self) -> f64 {
        self.dr * (self.n_points - 1) as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.r(i))
    }
}

/// Densities `(F, C, H)` on the grid nodes at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub f: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl FieldState {
    pub fn constant(grid: &RadialGrid, t: f64, f: f64, c: f64, h: f64) -> Self {
        let n = grid.n_points;
        Self {
            t,
            f: vec![f; n],
            c: vec![c; n],
            h: vec![h; n],
        }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn field(&self, field: Field) -> Vec<f64> {
        match field {
            Field::F => self.f.clone(),
            Field::C => self.c.clone(),
            Field::H => self.h.clone(),
            Field::FC => self.total_farmers(),
        }
    }

    pub fn total_farmers(&self) -> Vec<f64> {
        self.f.iter().zip(&self.c).map(|(f, c)| f + c).collect()
    }
}

/// Time derivatives of the three fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub f: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Compactly supported initial farmer density `amplitude · bump(r / support_radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub amplitude: f64,
    pub support_radius: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            support_radius: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub grid: RadialGrid,
    pub init: InitSpec,
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub cfl_factor: f64,
    /// Levels tracked in the front series.
    pub levels: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.grid.dim != self.params.dim {
            return Err(Error::Config(format!(
                "grid dimension {} differs from model dimension {}",
                self.grid.dim, self.params.dim
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !(self.snapshot_dt > 0.0) || (self.t_end > 0.0 && self.snapshot_dt > self.t_end) {
            return Err(Error::Config(format!(
                "snapshot_dt must lie in (0, t_end], got {}",
                self.snapshot_dt
            )));
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor < 1.0) {
            return Err(Error::Config(format!("cfl_factor must lie in (0, 1), got {}", self.cfl_factor)));
        }
        if let Some(m) = self.levels.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Config(format!("front levels must be positive, got {m}")));
        }
        let c_star = self.params.spreading_speeds().c_star;
        let needed = c_star * self.t_end + 20.0;
        if self.grid.r_max() <= needed {
            return Err(Error::Config(format!(
                "r_max = {} must exceed c*·t_end + 20 = {needed}",
                self.grid.r_max()
            )));
        }
        validate_init(&self.grid, &self.init)
    }
}

fn validate_init(grid: &RadialGrid, init: &InitSpec) -> Result<()> {
    if !(init.amplitude > 0.0 && init.amplitude.is_finite()) {
        return Err(Error::Config(format!("amplitude must be positive, got {}", init.amplitude)));
    }
    if !(init.support_radius > 0.0) || init.support_radius >= grid.r_max() / 4.0 {
        return Err(Error::Config(format!(
            "support_radius must lie in (0, r_max/4) = (0, {}), got {}",
            grid.r_max() / 4.0,
            init.support_radius
        )));
    }
    Ok(())
}

/// The C∞ cutoff `exp(1 − 1/(1 − x²))` on `|x| < 1`, zero outside; `bump(0) = 1`.
pub fn bump(x: f64) -> f64 {
    let q = 1.0 - x * x;
    if q > 0.0 {
        (1.0 - 1.0 / q).exp()
    } else {
        0.0
    }
}

pub fn init_state(grid: &RadialGrid, init: &InitSpec) -> Result<FieldState> {
    validate_init(grid, init)?;
    let n = grid.n_points;
    let f = grid
        .nodes()
        .map(|r| init.amplitude * bump(r / init.support_radius))
        .collect();
    Ok(FieldState {
        t: 0.0,
        f,
        c: vec![0.0; n],
        h: vec![1.0; n],
    })
}

/// Largest explicit step: the diffusion limit `cfl·dr²/(2N·max{1,d})`, capped
/// at `0.1/ρ` with `ρ = max{a, 1+s, b}·(1 + M)` and `M` the `F + C` bound.
pub fn max_stable_dt(grid: &RadialGrid, params: &ModelParams, cfl_factor: f64) -> f64 {
    let diffusion = cfl_factor * grid.dr * grid.dr / (2.0 * grid.dim as f64 * params.d.max(1.0));
    let bound = params.total_farmer_bound().max(1.0);
    let rate = params.a.max(1.0 + params.s).max(params.b) * (1.0 + bound);
    diffusion.min(0.1 / rate)
}

/// Radial Laplacian with diffusion `coef`; zero at the frozen last node.
fn laplacian_into(u: &[f64], out: &mut [f64], grid: &RadialGrid, coef: f64) {
    let n = u.len();
    let inv_dr2 = coef / (grid.dr * grid.dr);
    let n_dim = grid.dim as f64;
    out[0] = inv_dr2 * n_dim * 2.0 * (u[1] - u[0]);
    let curvature = n_dim - 1.0;
    for i in 1..n - 1 {
        let (left, mid, right) = (u[i - 1], u[i], u[i + 1]);
        let radial = curvature / (2.0 * i as f64);
        out[i] = inv_dr2 * ((right - 2.0 * mid + left) + radial * (right - left));
    }
    out[n - 1] = 0.0;
}

/// Radial diffusion operator `coef·(∂r² + (N−1)/r ∂r)` applied to `u`
/// (zero at the frozen last node).
pub fn diffusion(u: &[f64], grid: &RadialGrid, coef: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    laplacian_into(u, &mut out, grid, coef);
    out
}

fn rhs_into(
    f: &[f64],
    c: &[f64],
    h: &[f64],
    params: &ModelParams,
    grid: &RadialGrid,
    out: &mut Derivatives,
) {
    laplacian_into(f, &mut out.f, grid, 1.0);
    laplacian_into(c, &mut out.c, grid, 1.0);
    laplacian_into(h, &mut out.h, grid, params.d);
    let last = f.len() - 1;
    for i in 0..last {
        let [rf, rc, rh] = reaction(params, f[i], c[i], h[i]);
        out.f[i] += rf;
        out.c[i] += rc;
        out.h[i] += rh;
    }
}

pub fn rhs(state: &FieldState, params: &ModelParams, grid: &RadialGrid) -> Derivatives {
    let n = state.len();
    let mut out = Derivatives {
        f: vec![0.0; n],
        c: vec![0.0; n],
        h: vec![0.0; n],
    };
    rhs_into(&state.f, &state.c, &state.h, params, grid, &mut out);
    out
}

/// Heun stepper owning its scratch buffers.
pub struct RadialSolver {
    grid: RadialGrid,
    params: ModelParams,
    k1: Derivatives,
    k2: Derivatives,
    stage: FieldState,
}

impl RadialSolver {
    pub fn new(grid: RadialGrid, params: ModelParams) -> Self {
        let n = grid.n_points;
        let zeros = || Derivatives {
            f: vec![0.0; n],
            c: vec![0.0; n],
            h: vec![0.0; n],
        };
        Self {
            grid,
            params,
            k1: zeros(),
            k2: zeros(),
            stage: FieldState::constant(&grid, 0.0, 0.0, 0.0, 0.0),
        }
    }

    pub fn step(&mut self, state: &mut FieldState, dt: f64) -> Result<()> {
        if state.len() != self.grid.n_points {
            return Err(Error::GridMismatch(format!(
                "state has {} nodes, grid has {}",
                state.len(),
                self.grid.n_points
            )));
        }
        rhs_into(&state.f, &state.c, &state.h, &self.params, &self.grid, &mut self.k1);
        for (stage, (u, k)) in [
            (&mut self.stage.f, (&state.f, &self.k1.f)),
            (&mut self.stage.c, (&state.c, &self.k1.c)),
            (&mut self.stage.h, (&state.h, &self.k1.h)),
        ] {
            for ((s, &ui), &ki) in stage.iter_mut().zip(u.iter()).zip(k.iter()) {
                *s = ui + dt * ki;
            }
        }
        rhs_into(&self.stage.f, &self.stage.c, &self.stage.h, &self.params, &self.grid, &mut self.k2);
        let half = 0.5 * dt;
        for (u, (k1, k2)) in [
            (&mut state.f, (&self.k1.f, &self.k2.f)),
            (&mut state.c, (&self.k1.c, &self.k2.c)),
            (&mut state.h, (&self.k1.h, &self.k2.h)),
        ] {
            for ((ui, &a), &b) in u.iter_mut().zip(k1.iter()).zip(k2.iter()) {
                *ui += half * (a + b);
            }
        }
        state.t += dt;
        check_finite(state)
    }
}

fn check_finite(state: &FieldState) -> Result<()> {
    for (name, values) in [("F", &state.f), ("C", &state.c), ("H", &state.h)] {
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Instability {
                t: state.t,
                node,
                field: name,
            });
        }
    }
    Ok(())
}

/// One Heun step returning the new state.
pub fn step(state: &FieldState, params: &ModelParams, grid: &RadialGrid, dt: f64) -> Result<FieldState> {
    let mut next = state.clone();
    RadialSolver::new(*grid, *params).step(&mut next, dt)?;
    Ok(next)
}

/// Solution of `m' = ε₂ m − ε₃ m²`, written so that large `t` cannot overflow.
pub fn logistic_barrier(m0: f64, eps2: f64, eps3: f64, t: f64) -> f64 {
    let decay = (-eps2 * t).exp();
    m0 * eps2 / (eps2 * decay + eps3 * m0 * (1.0 - decay))
}

/// Growth and saturation rates `(ε₂, ε₃)` of the `F + C + H` lower barrier.
pub fn barrier_rates(params: &ModelParams) -> (f64, f64) {
    let eps1 = 1f64.max(params.a).max(params.s).max(params.g);
    let eps2 = 1f64.min(params.a).min(params.b);
    let eps3 = 1f64.max(eps1).max(eps1 * params.b);
    (eps2, eps3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Invariant {
    #[serde(rename = "nonneg_F")]
    NonNegF,
    #[serde(rename = "nonneg_C")]
    NonNegC,
    #[serde(rename = "nonneg_H")]
    NonNegH,
    #[serde(rename = "upper_H")]
    UpperH,
    #[serde(rename = "bound_FC")]
    BoundFC,
    #[serde(rename = "barrier_FCH")]
    BarrierFCH,
}

impl Invariant {
    pub fn id(&self) -> &'static str {
        match self {
            Invariant::NonNegF => "nonneg_F",
            Invariant::NonNegC => "nonneg_C",
            Invariant::NonNegH => "nonneg_H",
            Invariant::UpperH => "upper_H",
            Invariant::BoundFC => "bound_FC",
            Invariant::BarrierFCH => "barrier_FCH",
        }
    }
}

/// One audit line; a negative margin is a violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub t: f64,
    pub invariant_id: Invariant,
    pub margin: f64,
}

impl AuditRecord {
    pub fn passed(&self) -> bool {
        self.margin >= 0.0
    }
}

/// Per-run reference values for the state invariants.
#[derive(Debug, Clone, Copy)]
struct InvariantAuditor {
    bound: f64,
    barrier: Option<(f64, f64, f64)>,
}

impl InvariantAuditor {
    fn new(params: &ModelParams, initial: &FieldState) -> Self {
        let sup0 = initial
            .f
            .iter()
            .zip(&initial.c)
            .map(|(f, c)| f + c)
            .fold(f64::NEG_INFINITY, f64::max);
        let bound = sup0.max(params.total_farmer_bound()) + TOL_BOUND;
        let barrier = (params.d == 1.0).then(|| {
            let m0 = min_total(initial);
            let (eps2, eps3) = barrier_rates(params);
            (m0, eps2, eps3)
        });
        Self { bound, barrier }
    }

    fn audit(&self, state: &FieldState, out: &mut Vec<AuditRecord>) {
        let t = state.t;
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut push = |invariant_id, margin| out.push(AuditRecord { t, invariant_id, margin });
        push(Invariant::NonNegF, min(&state.f) + TOL_NEG);
        push(Invariant::NonNegC, min(&state.c) + TOL_NEG);
        push(Invariant::NonNegH, min(&state.h) + TOL_NEG);
        push(Invariant::UpperH, 1.0 + TOL_NEG - max(&state.h));
        let sup_total = state
            .f
            .iter()
            .zip(&state.c)
            .map(|(f, c)| f + c)
            .fold(f64::NEG_INFINITY, f64::max);
        push(Invariant::BoundFC, self.bound - sup_total);
        if let Some((m0, eps2, eps3)) = self.barrier {
            let lower = logistic_barrier(m0, eps2, eps3, t) - TOL_BOUND;
            push(Invariant::BarrierFCH, min_total(state) - lower);
        }
    }
}

fn min_total(state: &FieldState) -> f64 {
    (0..state.len())
        .map(|i| state.f[i] + state.c[i] + state.h[i])
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    pub config: SimConfig,
    /// Time step used for every interval.
    pub dt_max: f64,
    pub snapshots: Vec<FieldState>,
    pub fronts: FrontSeries,
    pub audits: Vec<AuditRecord>,
}

impl SimulationResult {
    pub fn audit_failures(&self) -> Vec<AuditRecord> {
        self.audits.iter().filter(|a| !a.passed()).copied().collect()
    }

    /// Snapshot whose time is within `1e-9` of `t`.
    pub fn snapshot_at(&self, t: f64) -> Option<&FieldState> {
        self.snapshots.iter().find(|s| (s.t - t).abs() < 1e-9)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.config.grid
    }
}

/// Snapshot times `0, Δ, 2Δ, …` up to `t_end`, with `t_end` appended if it is not a multiple.
pub fn snapshot_times(t_end: f64, snapshot_dt: f64) -> Vec<f64> {
    if t_end <= 0.0 {
        return vec![0.0];
    }
    let count = (t_end / snapshot_dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=count).map(|k| k as f64 * snapshot_dt).collect();
    if t_end - times[times.len() - 1] > 1e-9 * t_end.max(1.0) {
        times.push(t_end);
    } else {
        let last = times.len() - 1;
        times[last] = t_end;
    }
    times
}

/// Fails once a level-0.01 front of `F`, `C` or `F + C` lies beyond `r_max − 10·dr`.
pub fn check_boundary(state: &FieldState, grid: &RadialGrid) -> Result<()> {
    let limit = grid.r_max() - 10.0 * grid.dr;
    for field in [Field::F, Field::C, Field::FC] {
        let profile = state.field(field);
        if let Some(position) = level_set_position(&profile, grid.dr, BOUNDARY_LEVEL) {
            if position > limit {
                return Err(Error::FrontReachedBoundary {
                    t: state.t,
                    position,
                    limit,
                });
            }
        }
    }
    Ok(())
}

pub fn simulate(config: &SimConfig) -> Result<SimulationResult> {
    config.validate()?;
    let grid = config.grid;
    let params = config.params;
    let mut state = init_state(&grid, &config.init)?;
    let auditor = InvariantAuditor::new(&params, &state);
    let dt_max = max_stable_dt(&grid, &params, config.cfl_factor);

    let mut solver = RadialSolver::new(grid, params);
    let mut snapshots = Vec::new();
    let mut audits = Vec::new();
    let mut fronts = FrontSeries::new(config.levels.clone());

    let times = snapshot_times(config.t_end, config.snapshot_dt);
    for (k, &target) in times.iter().enumerate() {
        if k > 0 {
            let span = target - state.t;
            let steps = (span / dt_max - 1e-9).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                solver.step(&mut state, dt)?;
            }
            state.t = target;
        }
        auditor.audit(&state, &mut audits);
        fronts.record(&state, &grid);
        check_boundary(&state, &grid)?;
        snapshots.push(state.clone());
    }

    Ok(SimulationResult {
        config: config.clone(),
        dt_max,
        snapshots,
        fronts,
        audits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(a: f64, b: f64, s: f64, g: f64, d: f64, dim: usize) -> ModelParams {
        ModelParams::new(a, b, s, g, d, dim).unwrap()
    }

    #[test]
    fn grid_rejects_tiny_or_invalid() {
        assert!(RadialGrid::new(0.1, 15, 1).is_err());
        assert!(RadialGrid::new(0.0, 100, 1).is_err());
        let g = RadialGrid::new(0.1, 101, 1).unwrap();
        assert!((g.r_max() - 10.0).abs() < 1e-12);
        assert_eq!(RadialGrid::covering(0.1, 10.0, 1).unwrap().n_points, 101);
    }

    #[test]
    fn init_state_shape() {
        let grid = RadialGrid::new(0.1, 1001, 1).unwrap();
        let init = InitSpec {
            amplitude: 1.0,
            support_radius: 5.0,
        };
        let s = init_state(&grid, &init).unwrap();
        assert_eq!(s.f[0], 1.0);
        assert!(grid.nodes().zip(&s.f).all(|(r, &f)| r < 5.0 - 1e-12 || f == 0.0));
        assert!(s.h.iter().all(|&h| h == 1.0) && s.c.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn init_state_is_continuous() {
        let grid = RadialGrid::new(0.1, 1001, 1).unwrap();
        let init = InitSpec {
            amplitude: 2.0,
            support_radius: 5.0,
        };
        let s = init_state(&grid, &init).unwrap();
        // sup |bump'| by dense sampling
        let h = 1e-6;
        let sup_slope = (1..100_000)
            .map(|k| {
                let x = k as f64 / 100_000.0;
                ((bump(x + h) - bump(x - h)) / (2.0 * h)).abs()
            })
            .fold(0.0, f64::max);
        let bound = init.amplitude * grid.dr * sup_slope / init.support_radius;
        let jump = s.f.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(jump < bound, "{jump} >= {bound}");
    }

    #[test]
    fn init_state_rejects_wide_support() {
        let grid = RadialGrid::new(0.1, 101, 1).unwrap();
        let init = InitSpec {
            amplitude: 1.0,
            support_radius: 2.5,
        };
        assert!(matches!(init_state(&grid, &init), Err(Error::Config(_))));
    }

    /// Composite Simpson on a fine mesh of the closed-form bump.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut sum = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(a + k as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn initial_mass_matches_quadrature() {
        for dim in [1usize, 2, 3] {
            let grid = RadialGrid::new(0.005, 4201, dim).unwrap();
            let init = InitSpec {
                amplitude: 1.0,
                support_radius: 5.0,
            };
            let s = init_state(&grid, &init).unwrap();
            let w = |r: f64| r.powi(dim as i32 - 1);
            // trapezoid on the solver grid
            let grid_mass: f64 = s
                .f
                .windows(2)
                .enumerate()
                .map(|(i, p)| 0.5 * grid.dr * (p[0] * w(grid.r(i)) + p[1] * w(grid.r(i + 1))))
                .sum();
            let exact = simpson(|r| bump(r / 5.0) * w(r), 0.0, 5.0, 200_000);
            assert!(((grid_mass - exact) / exact).abs() < 1e-6, "dim {dim}: {grid_mass} vs {exact}");
        }
    }

    #[test]
    fn constant_states_are_steady() {
        let grid = RadialGrid::new(0.1, 200, 2).unwrap();
        let m = params(1.0, 1.0, 0.5, 0.4, 2.0, 2);
        let d = rhs(&FieldState::constant(&grid, 0.0, 0.0, 0.0, 1.0), &m, &grid);
        assert!(d.f.iter().chain(&d.c).chain(&d.h).all(|&v| v == 0.0));
        let cs = m.coexistence_state().unwrap();
        let d = rhs(&FieldState::constant(&grid, 0.0, 0.0, cs.c, cs.h), &m, &grid);
        assert!(d.f.iter().chain(&d.c).chain(&d.h).all(|&v| v.abs() < 1e-14));
    }

    /// Exact radial Laplacian of `cos(k r)`, including the origin limit.
    fn laplacian_cos(k: f64, r: f64, dim: usize) -> f64 {
        let second = -k * k * (k * r).cos();
        if r == 0.0 {
            dim as f64 * second
        } else {
            second + (dim as f64 - 1.0) / r * (-k * (k * r).sin())
        }
    }

    fn laplacian_error(dr: f64, dim: usize) -> f64 {
        let length = 10.0;
        let n = (length / dr).round() as usize + 1;
        let grid = RadialGrid::new(dr, n, dim).unwrap();
        let k = PI / length;
        let u: Vec<f64> = grid.nodes().map(|r| (k * r).cos()).collect();
        let mut out = vec![0.0; n];
        laplacian_into(&u, &mut out, &grid, 1.0);
        (0..n - 1)
            .map(|i| (out[i] - laplacian_cos(k, grid.r(i), dim)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn diffusion_stencil_is_second_order() {
        for dim in [1usize, 2, 3] {
            let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&dr| laplacian_error(dr, dim)).collect();
            for w in errs.windows(2) {
                let order = (w[0] / w[1]).log2();
                assert!(order >= 1.9, "dim {dim}: order {order} from {errs:?}");
            }
        }
    }

    #[test]
    fn max_stable_dt_examples() {
        let grid = RadialGrid::new(0.1, 100, 1).unwrap();
        let m = params(1.0, 1.0, 1.0, 2.0, 1.0, 1);
        assert!((max_stable_dt(&grid, &m, 0.8) - 0.004).abs() < 1e-15);
        let m4 = params(1.0, 1.0, 1.0, 2.0, 4.0, 1);
        let m2 = params(1.0, 1.0, 1.0, 2.0, 2.0, 1);
        assert!((max_stable_dt(&grid, &m4, 0.8) * 2.0 - max_stable_dt(&grid, &m2, 0.8)).abs() < 1e-15);

        // reaction cap binds exactly when dr² > 0.2·N·max{1,d}/ρ (cfl = 1 limit)
        let m = params(1.0, 1.0, 1.0, 2.0, 1.0, 1);
        let rho = 2.0 * (1.0 + m.total_farmer_bound());
        let critical = (0.2 / rho).sqrt();
        let below = RadialGrid::new(critical * 0.99, 100, 1).unwrap();
        let above = RadialGrid::new(critical * 1.01, 100, 1).unwrap();
        let cfl = 1.0 - 1e-12;
        assert!(max_stable_dt(&below, &m, cfl) < 0.1 / rho);
        assert_eq!(max_stable_dt(&above, &m, cfl), 0.1 / rho);
    }

    #[test]
    fn step_preserves_equilibria() {
        let grid = RadialGrid::new(0.1, 300, 1).unwrap();
        let m = params(1.0, 1.0, 0.5, 0.4, 1.0, 1);
        let s = FieldState::constant(&grid, 0.0, 0.0, 0.0, 1.0);
        let next = step(&s, &m, &grid, 0.004).unwrap();
        assert_eq!(next.f, s.f);
        assert_eq!(next.c, s.c);
        assert_eq!(next.h, s.h);
        let cs = m.coexistence_state().unwrap();
        let s = FieldState::constant(&grid, 0.0, 0.0, cs.c, cs.h);
        let next = step(&s, &m, &grid, 0.004).unwrap();
        let drift = next
            .c
            .iter()
            .zip(&s.c)
            .chain(next.h.iter().zip(&s.h))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-14);
    }

    #[test]
    fn step_reports_instability() {
        let grid = RadialGrid::new(0.1, 100, 1).unwrap();
        let m = params(1.0, 1.0, 1.0, 2.0, 1.0, 1);
        let mut s = FieldState::constant(&grid, 0.0, 0.0, 0.0, 1.0);
        s.f[7] = f64::NAN;
        match step(&s, &m, &grid, 0.001) {
            Err(Error::Instability { node, field, .. }) => {
                assert_eq!(field, "F");
                // two stages spread the NaN by one node each
                assert!((5..=9).contains(&node));
            }
            other => panic!("expected instability, got {other:?}"),
        }
    }

    fn generic_state(grid: &RadialGrid) -> FieldState {
        let mut s = init_state(grid, &InitSpec { amplitude: 0.8, support_radius: 4.0 }).unwrap();
        for (i, r) in grid.nodes().enumerate() {
            s.c[i] = 0.3 * bump(r / 6.0);
            s.h[i] = 1.0 - 0.5 * bump(r / 5.0);
        }
        s
    }

    fn max_diff(a: &FieldState, b: &FieldState) -> f64 {
        a.f.iter()
            .zip(&b.f)
            .chain(a.c.iter().zip(&b.c))
            .chain(a.h.iter().zip(&b.h))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn advance(s: &FieldState, m: &ModelParams, grid: &RadialGrid, dt: f64, steps: usize) -> FieldState {
        let mut solver = RadialSolver::new(*grid, *m);
        let mut out = s.clone();
        for _ in 0..steps {
            solver.step(&mut out, dt).unwrap();
        }
        out
    }

    /// Step-doubling: the one-step discrepancy scales like dt³ (ratio 8),
    /// the error accumulated over a fixed horizon like dt² (ratio 4).
    #[test]
    fn heun_step_doubling() {
        let grid = RadialGrid::new(0.1, 200, 1).unwrap();
        let m = params(1.5, 1.0, 1.0, 2.0, 1.0, 1);
        let s = generic_state(&grid);

        let local = |dt: f64| max_diff(&advance(&s, &m, &grid, dt, 1), &advance(&s, &m, &grid, dt / 2.0, 2));
        let ratio = local(1e-3) / local(5e-4);
        assert!((ratio - 8.0).abs() < 0.8, "local ratio {ratio}");

        let horizon = 0.2;
        let run = |dt: f64| advance(&s, &m, &grid, dt, (horizon / dt).round() as usize);
        let coarse = run(2e-3);
        let mid = run(1e-3);
        let fine = run(5e-4);
        let ratio = max_diff(&coarse, &mid) / max_diff(&mid, &fine);
        assert!((ratio - 4.0).abs() < 0.4, "global ratio {ratio}");
    }

    #[test]
    fn logistic_barrier_solves_its_ode() {
        let (m0, e2, e3) = (1.0, 0.7, 2.0);
        let h = 1e-5;
        for t in [0.0, 0.5, 3.0, 20.0] {
            let m = logistic_barrier(m0, e2, e3, t);
            let dm = (logistic_barrier(m0, e2, e3, t + h) - logistic_barrier(m0, e2, e3, (t - h).max(0.0)))
                / (if t == 0.0 { h } else { 2.0 * h });
            assert!((dm - (e2 * m - e3 * m * m)).abs() < 1e-4);
        }
        assert_eq!(logistic_barrier(m0, e2, e3, 0.0), 1.0);
        assert!((logistic_barrier(m0, e2, e3, 1e4) - e2 / e3).abs() < 1e-12);
    }

    #[test]
    fn snapshot_schedule() {
        assert_eq!(snapshot_times(0.0, 5.0), vec![0.0]);
        assert_eq!(snapshot_times(10.0, 5.0), vec![0.0, 5.0, 10.0]);
        assert_eq!(snapshot_times(12.0, 5.0), vec![0.0, 5.0, 10.0, 12.0]);
    }

    fn small_config(t_end: f64, r_max: f64) -> SimConfig {
        let m = params(1.0, 1.0, 1.0, 2.0, 1.0, 1);
        SimConfig {
            params: m,
            grid: RadialGrid::covering(0.1, r_max, 1).unwrap(),
            init: InitSpec::default(),
            t_end,
            snapshot_dt: 5.0,
            cfl_factor: 0.8,
            levels: vec![0.05, 0.5],
        }
    }

    #[test]
    fn zero_length_run_returns_initial_state() {
        let mut cfg = small_config(0.0, 100.0);
        cfg.snapshot_dt = 5.0;
        let res = simulate(&cfg).unwrap();
        assert_eq!(res.snapshots.len(), 1);
        assert_eq!(res.snapshots[0], init_state(&cfg.grid, &cfg.init).unwrap());
    }

    #[test]
    fn simulate_enforces_domain_size() {
        let cfg = small_config(50.0, 120.0);
        assert!(matches!(simulate(&cfg), Err(Error::Config(msg)) if msg.contains("r_max")));
    }

    #[test]
    fn boundary_contact_is_reported() {
        let grid = RadialGrid::new(0.1, 501, 1).unwrap();
        let mut s = FieldState::constant(&grid, 3.0, 0.0, 0.0, 1.0);
        assert!(check_boundary(&s, &grid).is_ok());
        for i in 0..495 {
            s.c[i] = 0.5;
        }
        match check_boundary(&s, &grid) {
            Err(Error::FrontReachedBoundary { position, limit, .. }) => {
                assert!(position > limit && (limit - 49.0).abs() < 1e-9)
            }
            other => panic!("expected boundary contact, got {other:?}"),
        }
    }

    #[test]
    fn domain_extension_leaves_interior_unchanged() {
        let cfg = small_config(20.0, 200.0);
        let mut wide = cfg.clone();
        wide.grid = RadialGrid::new(cfg.grid.dr, 2 * cfg.grid.n_points, 1).unwrap();
        let a = simulate(&cfg).unwrap();
        let b = simulate(&wide).unwrap();
        let sa = a.snapshots.last().unwrap();
        let sb = b.snapshots.last().unwrap();
        // nodes well inside the short domain
        let interior = cfg.grid.n_points / 2;
        for i in 0..interior {
            assert!((sa.f[i] - sb.f[i]).abs() < 1e-12);
            assert!((sa.c[i] - sb.c[i]).abs() < 1e-12);
            assert!((sa.h[i] - sb.h[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn short_run_passes_invariant_audits() {
        let res = simulate(&small_config(30.0, 200.0)).unwrap();
        assert!(res.audit_failures().is_empty(), "{:?}", res.audit_failures());
        assert_eq!(res.snapshots.len(), 7);
        // d = 1 adds the barrier audit: six invariants per snapshot
        assert_eq!(res.audits.len(), 7 * 6);
    }

    #[test]
    fn higher_dimension_run_stays_bounded() {
        let mut cfg = small_config(20.0, 150.0);
        cfg.params = params(1.0, 1.0, 1.0, 2.0, 1.0, 3);
        cfg.grid = RadialGrid::covering(0.1, 150.0, 3).unwrap();
        let res = simulate(&cfg).unwrap();
        assert!(res.audit_failures().is_empty(), "{:?}", res.audit_failures());
    }
}
