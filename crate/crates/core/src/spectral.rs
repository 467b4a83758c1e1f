//! Linear drift equation in the logarithmically corrected moving frame and
//! the weighted-Hermite operator that governs its self-similar limit.
//!
//! In the frame `ξ = r − X(t)`, `X(t) = c*(t+t0) − δ ln((t+t0)/t0)`, the
//! linearized leading-edge equation for `z = e^{−λ*ξ} w` reads
//!
//! ```text
//! w_t = w_ξξ + η w_ξ − λ* η w,    η = −δ/(t+t0) + (N−1)/(ξ + X(t))
//! ```
//!
//! With `τ = ln((t+t0)/t0)`, `ρ = ξ/√(t+t0)` and `ζ = e^{−γτ} w`,
//! `γ = δλ* − (N+1)/2`, this becomes `ζ_τ = 𝓛ζ + O((t+t0)^{−1/2})` with
//! `𝓛f = f'' + (ρ/2) f' + f`, self-adjoint for the weight `m(ρ) = e^{ρ²/4}`.
//! Its Dirichlet eigenfunctions are the odd Hermite functions
//! `φ_k ∝ H_{2k−1}(ρ/2) e^{−ρ²/4}` with eigenvalues `−(k−1)`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::radial::bump;
use crate::{Error, Result};

/// Default extent of the self-similar grid.
pub const RHO_MAX: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    pub delta: f64,
    pub t0: f64,
    pub lambda_star: f64,
    pub dim: usize,
    pub gamma: f64,
}

impl DirichletParams {
    pub fn new(delta: f64, t0: f64, c_star: f64, dim: usize) -> Result<Self> {
        if !(c_star > 0.0 && c_star.is_finite()) {
            return Err(Error::ParamDomain(format!("c* must be positive, got {c_star}")));
        }
        if dim == 0 {
            return Err(Error::ParamDomain("spatial dimension must be at least 1".into()));
        }
        let lambda_star = 0.5 * c_star;
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::ParamDomain(format!("delta must be nonnegative, got {delta}")));
        }
        if !(t0 > 0.0 && t0 >= delta / (2.0 * lambda_star)) {
            return Err(Error::ParamDomain(format!(
                "t0 = {t0} must be positive and at least delta/(2 lambda*) = {}",
                delta / (2.0 * lambda_star)
            )));
        }
        let gamma = delta * lambda_star - (dim as f64 + 1.0) / 2.0;
        Ok(Self {
            delta,
            t0,
            lambda_star,
            dim,
            gamma,
        })
    }

    /// The critical drift `δ = (N+2)/(2λ*)`, for which `γ = 1/2`.
    pub fn critical(t0: f64, c_star: f64, dim: usize) -> Result<Self> {
        Self::new((dim as f64 + 2.0) / c_star, t0, c_star, dim)
    }

    pub fn c_star(&self) -> f64 {
        2.0 * self.lambda_star
    }

    /// `τ = ln((t+t0)/t0)`.
    pub fn tau(&self, t: f64) -> f64 {
        ((t + self.t0) / self.t0).ln()
    }

    /// Inverse of [`Self::tau`].
    pub fn time_at_tau(&self, tau: f64) -> f64 {
        self.t0 * tau.exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingFrame {
    pub t: f64,
    pub t0: f64,
    pub delta: f64,
    pub tau: f64,
    pub xi_front: f64,
}

pub fn frame_position(t: f64, p: &DirichletParams) -> MovingFrame {
    let tau = p.tau(t);
    MovingFrame {
        t,
        t0: p.t0,
        delta: p.delta,
        tau,
        xi_front: p.c_star() * (t + p.t0) - p.delta * tau,
    }
}

/// Uniform grid `ρ_j = j·dρ` on `[0, ρ_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoGrid {
    pub d_rho: f64,
    pub n_points: usize,
}

impl RhoGrid {
    pub fn new(d_rho: f64, rho_max: f64) -> Result<Self> {
        if !(d_rho > 0.0 && rho_max > 4.0 * d_rho) {
            return Err(Error::Config(format!("invalid rho grid: d_rho = {d_rho}, rho_max = {rho_max}")));
        }
        let n_points = (rho_max / d_rho).round() as usize + 1;
        Ok(Self { d_rho, n_points })
    }

    pub fn rho(&self, j: usize) -> f64 {
        j as f64 * self.d_rho
    }

    pub fn rho_max(&self) -> f64 {
        self.rho(self.n_points - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |j| self.rho(j))
    }
}

/// Samples of a function of `ρ` on a [`RhoGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub grid: RhoGrid,
    pub values: Vec<f64>,
}

impl SpectralProfile {
    pub fn sample(grid: RhoGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(f).collect(),
        }
    }

    pub fn zeros(grid: RhoGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_points],
        }
    }

    pub fn weighted_norm(&self) -> f64 {
        weighted_inner(self, self).map(f64::sqrt).unwrap_or(f64::NAN)
    }

    /// Rejects profiles whose tail on `[ρ_max − 2, ρ_max]` decays slower than
    /// `e^{−ρ²/8}` relative to the profile's own scale.
    pub fn check_decay(&self) -> Result<()> {
        let scale = self.values.iter().fold(0f64, |m, v| m.max(v.abs())).max(1e-300);
        let start = self.grid.rho_max() - 2.0;
        for (rho, v) in self.grid.nodes().zip(&self.values) {
            if rho >= start && v.abs() * (rho * rho / 8.0).exp() > scale {
                return Err(Error::Domain(format!(
                    "profile decays too slowly at rho = {rho} (value {v})"
                )));
            }
        }
        Ok(())
    }

    /// Linear interpolation; zero beyond `ρ_max`.
    pub fn eval(&self, rho: f64) -> f64 {
        if rho < 0.0 {
            return self.values[0];
        }
        let x = rho / self.grid.d_rho;
        let j = x.floor() as usize;
        if j + 1 >= self.grid.n_points {
            return if j + 1 == self.grid.n_points && x == j as f64 { self.values[j] } else { 0.0 };
        }
        let frac = x - j as f64;
        self.values[j] * (1.0 - frac) + self.values[j + 1] * frac
    }

    fn map_with(&self, other: &SpectralProfile, f: impl Fn(f64, f64) -> f64) -> SpectralProfile {
        SpectralProfile {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> SpectralProfile {
        SpectralProfile {
            grid: self.grid,
            values: self.values.iter().map(|v| k * v).collect(),
        }
    }
}

fn same_grid(f: &SpectralProfile, g: &SpectralProfile) -> Result<()> {
    if f.grid != g.grid || f.values.len() != g.values.len() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", f.grid, g.grid)));
    }
    Ok(())
}

/// Weight `m(ρ) = e^{ρ²/4}`.
pub fn weight(rho: f64) -> f64 {
    (0.25 * rho * rho).exp()
}

/// Trapezoidal `∫ f g e^{ρ²/4} dρ`.
pub fn weighted_inner(f: &SpectralProfile, g: &SpectralProfile) -> Result<f64> {
    same_grid(f, g)?;
    let n = f.values.len();
    let sum: f64 = (0..n)
        .map(|j| {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            w * f.values[j] * g.values[j] * weight(f.grid.rho(j))
        })
        .sum();
    Ok(sum * f.grid.d_rho)
}

/// Central first derivative with second-order one-sided endpoints.
pub fn derivative(f: &SpectralProfile) -> SpectralProfile {
    let u = &f.values;
    let n = u.len();
    let h = f.grid.d_rho;
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    for j in 1..n - 1 {
        out[j] = (u[j + 1] - u[j - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    SpectralProfile {
        grid: f.grid,
        values: out,
    }
}

/// Central second derivative with second-order one-sided endpoints.
fn second_derivative(f: &SpectralProfile) -> Vec<f64> {
    let u = &f.values;
    let n = u.len();
    let h2 = f.grid.d_rho * f.grid.d_rho;
    let mut out = vec![0.0; n];
    out[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
    for j in 1..n - 1 {
        out[j] = (u[j + 1] - 2.0 * u[j] + u[j - 1]) / h2;
    }
    out[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    out
}

/// `𝓛f = f'' + (ρ/2) f' + f` by finite differences.
pub fn operator_l(f: &SpectralProfile) -> SpectralProfile {
    let d1 = derivative(f);
    let d2 = second_derivative(f);
    let values = (0..f.values.len())
        .map(|j| d2[j] + 0.5 * f.grid.rho(j) * d1.values[j] + f.values[j])
        .collect();
    SpectralProfile { grid: f.grid, values }
}

/// Physicists' Hermite polynomial by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Unit-norm Dirichlet eigenfunction `φ_k`, `k ≥ 1`, with eigenvalue `−(k−1)`.
pub fn eigenfunction_value(k: usize, rho: f64) -> f64 {
    assert!(k >= 1, "eigenfunctions are indexed from 1");
    let n = 2 * k - 1;
    let factorial: f64 = (1..=n).map(|i| i as f64).product();
    let norm = (2f64.powi(n as i32) * factorial * PI.sqrt()).sqrt();
    hermite(n, 0.5 * rho) * (-0.25 * rho * rho).exp() / norm
}

pub fn eigenfunction(k: usize, grid: RhoGrid) -> SpectralProfile {
    SpectralProfile::sample(grid, |rho| eigenfunction_value(k, rho))
}

pub fn eigenvalue(k: usize) -> f64 {
    -(k as f64 - 1.0)
}

/// `Qf = f − ⟨f, φ₁⟩ φ₁`.
pub fn project_q(f: &SpectralProfile) -> Result<SpectralProfile> {
    let phi1 = eigenfunction(1, f.grid);
    let coef = weighted_inner(f, &phi1)?;
    Ok(f.map_with(&phi1, |a, b| a - coef * b))
}

/// `∫ f ρ dρ`, trapezoidal.
pub fn first_moment(f: &SpectralProfile) -> f64 {
    let n = f.values.len();
    let sum: f64 = (0..n)
        .map(|j| {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            w * f.values[j] * f.grid.rho(j)
        })
        .sum();
    sum * f.grid.d_rho
}

/// Leading-order `w = e^{λ*ξ} z` of the drift equation for initial data with
/// first moment `zeta0_moment`:
/// `(T^{γ−1/2}/t0^γ) · ξ · (moment/(2√π)) · e^{−ξ²/(4T)}`, `T = t + t0`.
pub fn asymptotic_weighted(t: f64, xi: f64, p: &DirichletParams, zeta0_moment: f64) -> f64 {
    let big_t = t + p.t0;
    let prefactor = (big_t.ln() * (p.gamma - 0.5) - p.t0.ln() * p.gamma).exp();
    prefactor * xi * zeta0_moment / (2.0 * PI.sqrt()) * (-xi * xi / (4.0 * big_t)).exp()
}

/// Leading-order `z(t, ξ)`; zero at `ξ = 0`.
pub fn asymptotic_leading(t: f64, xi: f64, p: &DirichletParams, zeta0_moment: f64) -> f64 {
    asymptotic_weighted(t, xi, p, zeta0_moment) * (-p.lambda_star * xi).exp()
}

/// Compactly supported `exp(1 − 1/(1 − (ρ−1)²))` on `(0, 2)`.
pub fn default_zeta0(grid: RhoGrid) -> SpectralProfile {
    SpectralProfile::sample(grid, |rho| bump(rho - 1.0))
}

/// Smooth step: 1 for `x ≤ 0`, 0 for `x ≥ 1`, C∞ in between.
pub fn smooth_step(x: f64) -> f64 {
    let f = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let (a, b) = (f(1.0 - x), f(x));
    a / (a + b)
}

/// `ρ e^{−ρ²/4}` cut off smoothly between `ρ = 6` and `ρ = 9`: compactly
/// supported and, up to a 10⁻⁴-level tail, aligned with `φ₁`.
pub fn principal_zeta0(grid: RhoGrid) -> SpectralProfile {
    SpectralProfile::sample(grid, |rho| rho * (-0.25 * rho * rho).exp() * smooth_step((rho - 6.0) / 3.0))
}

/// Random `Σ a_j bump((ρ − c_j)/w_j) e^{−ρ²/4}` supported inside `(0, 10)`.
pub fn random_dirichlet_function<R: Rng + ?Sized>(rng: &mut R, grid: RhoGrid) -> SpectralProfile {
    let terms = rng.gen_range(1..=4);
    let coeffs: Vec<(f64, f64, f64)> = (0..terms)
        .map(|_| {
            let width = rng.gen_range(0.5..2.0);
            let center = rng.gen_range(width + 0.1..8.0);
            (rng.gen_range(-1.0..1.0), center, width)
        })
        .collect();
    SpectralProfile::sample(grid, |rho| {
        let sum: f64 = coeffs.iter().map(|&(a, c, w)| a * bump((rho - c) / w)).sum();
        sum * (-0.25 * rho * rho).exp()
    })
}

/// `‖𝓛φ_k + (k−1)φ_k‖_m / ‖φ_k‖_m`.
pub fn eigen_residual(k: usize, grid: RhoGrid) -> f64 {
    let phi = eigenfunction(k, grid);
    let lphi = operator_l(&phi);
    let residual = lphi.map_with(&phi, |l, p| l - eigenvalue(k) * p);
    residual.weighted_norm() / phi.weighted_norm()
}

/// `|⟨𝓛f, g⟩_m − ⟨f, 𝓛g⟩_m|`.
pub fn self_adjoint_defect(f: &SpectralProfile, g: &SpectralProfile) -> Result<f64> {
    Ok((weighted_inner(&operator_l(f), g)? - weighted_inner(f, &operator_l(g))?).abs())
}

/// `(‖ζ‖_m, ‖∂_ρ ζ‖_m)`.
pub fn poincare_pair(f: &SpectralProfile) -> (f64, f64) {
    (f.weighted_norm(), derivative(f).weighted_norm())
}

/// Uniform grid `ξ_j = j·dξ` on `[0, ξ_max]` for the drift equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftGrid {
    pub d_xi: f64,
    pub n_points: usize,
}

impl DriftGrid {
    pub fn new(d_xi: f64, xi_max: f64) -> Result<Self> {
        if !(d_xi > 0.0 && xi_max > 4.0 * d_xi) {
            return Err(Error::Config(format!("invalid xi grid: d_xi = {d_xi}, xi_max = {xi_max}")));
        }
        Ok(Self {
            d_xi,
            n_points: (xi_max / d_xi).ceil() as usize + 1,
        })
    }

    /// `dξ = √t0 / per_unit_rho` on `[0, 10√(t_end + t0)]`.
    pub fn for_horizon(p: &DirichletParams, t_end: f64, per_unit_rho: f64) -> Result<Self> {
        Self::new(p.t0.sqrt() / per_unit_rho, 10.0 * (t_end + p.t0).sqrt())
    }

    pub fn xi(&self, j: usize) -> f64 {
        j as f64 * self.d_xi
    }

    pub fn xi_max(&self) -> f64 {
        self.xi(self.n_points - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFrame {
    pub t: f64,
    /// `w = e^{λ*ξ} z` on the drift grid.
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDriftSolution {
    pub params: DirichletParams,
    pub grid: DriftGrid,
    pub dt: f64,
    pub frames: Vec<DriftFrame>,
}

impl LinearDriftSolution {
    pub fn z(&self, frame: &DriftFrame) -> Vec<f64> {
        frame
            .w
            .iter()
            .enumerate()
            .map(|(j, w)| w * (-self.params.lambda_star * self.grid.xi(j)).exp())
            .collect()
    }

    /// `ζ(τ, ρ) = e^{−γτ} w(t, ρ√(t+t0))`, linearly interpolated onto `rho`.
    pub fn zeta(&self, frame: &DriftFrame, rho: RhoGrid) -> SpectralProfile {
        let scale = (frame.t + self.params.t0).sqrt();
        let damping = (-self.params.gamma * self.params.tau(frame.t)).exp();
        let n = self.grid.n_points;
        SpectralProfile::sample(rho, |r| {
            let x = r * scale / self.grid.d_xi;
            let j = x.floor() as usize;
            if j + 1 >= n {
                return 0.0;
            }
            let frac = x - j as f64;
            damping * (frame.w[j] * (1.0 - frac) + frame.w[j + 1] * frac)
        })
    }
}

/// Explicit solve of the drift equation in the variable `w = e^{λ*ξ} z`:
/// upwind for the drift, central for diffusion, `w = 0` at both ends.
///
/// The initial state is `z(0, ξ) = e^{−λ*ξ} ζ₀(ξ/√t0)`. Frames are stored at
/// each of `output_times` (sorted, within `[0, t_end]`).
pub fn solve_linear_drift(
    p: &DirichletParams,
    zeta0: &SpectralProfile,
    t_end: f64,
    grid: DriftGrid,
    output_times: &[f64],
) -> Result<LinearDriftSolution> {
    let needed = 10.0 * (t_end + p.t0).sqrt();
    if grid.xi_max() < needed {
        return Err(Error::Config(format!(
            "xi_max = {} must be at least 10 sqrt(t_end + t0) = {needed}",
            grid.xi_max()
        )));
    }
    if output_times.windows(2).any(|w| w[1] < w[0]) || output_times.iter().any(|&t| t < 0.0 || t > t_end + 1e-9) {
        return Err(Error::Config("output times must be sorted and lie in [0, t_end]".into()));
    }
    let n = grid.n_points;
    let h = grid.d_xi;
    let dt_max = 0.4 * h * h;
    let sqrt_t0 = p.t0.sqrt();
    let mut w: Vec<f64> = (0..n).map(|j| zeta0.eval(grid.xi(j) / sqrt_t0)).collect();
    w[0] = 0.0;
    w[n - 1] = 0.0;
    let mut next = w.clone();
    let lambda = p.lambda_star;
    let curvature = p.dim as f64 - 1.0;

    let mut frames = Vec::with_capacity(output_times.len());
    let mut t = 0.0;
    let mut dt_used = dt_max;
    for &target in output_times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt_max - 1e-9).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            dt_used = dt;
            for k in 0..steps {
                let tk = t + k as f64 * dt;
                let big_t = tk + p.t0;
                let front = p.c_star() * big_t - p.delta * (big_t / p.t0).ln();
                for j in 1..n - 1 {
                    let eta = -p.delta / big_t + curvature / (grid.xi(j) + front);
                    let diffusion = (w[j + 1] - 2.0 * w[j] + w[j - 1]) / (h * h);
                    let drift = if eta >= 0.0 {
                        eta * (w[j + 1] - w[j]) / h
                    } else {
                        eta * (w[j] - w[j - 1]) / h
                    };
                    next[j] = w[j] + dt * (diffusion + drift - lambda * eta * w[j]);
                }
                std::mem::swap(&mut w, &mut next);
                if let Some(node) = w.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Instability {
                        t: tk + dt,
                        node,
                        field: "z",
                    });
                }
            }
            t = target;
        }
        frames.push(DriftFrame { t: target, w: w.clone() });
    }
    Ok(LinearDriftSolution {
        params: *p,
        grid,
        dt: dt_used,
        frames,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub t: f64,
    pub xi: f64,
    pub z_numeric: f64,
    pub z_asymptotic: f64,
    pub rel_error: f64,
}

/// Numeric against leading-order profile at one frame, for `ξ ∈ [xi_lo, xi_hi]`.
/// Relative errors are formed on `w`, which avoids underflow of `e^{−λ*ξ}`.
pub fn compare_with_asymptotic(
    sol: &LinearDriftSolution,
    frame: &DriftFrame,
    zeta0_moment: f64,
    xi_lo: f64,
    xi_hi: f64,
) -> Vec<ComparisonPoint> {
    let p = &sol.params;
    (0..sol.grid.n_points)
        .filter(|&j| {
            let xi = sol.grid.xi(j);
            xi >= xi_lo - 1e-12 && xi <= xi_hi + 1e-12
        })
        .map(|j| {
            let xi = sol.grid.xi(j);
            let w_asym = asymptotic_weighted(frame.t, xi, p, zeta0_moment);
            let decay = (-p.lambda_star * xi).exp();
            ComparisonPoint {
                t: frame.t,
                xi,
                z_numeric: frame.w[j] * decay,
                z_asymptotic: w_asym * decay,
                rel_error: ((frame.w[j] - w_asym) / w_asym).abs(),
            }
        })
        .collect()
}

/// Sup relative error over `ξ ∈ [1, √(t+t0)]` at `τ = tau` for initial data `zeta0`.
pub fn asymptotic_error_at_tau(
    p: &DirichletParams,
    zeta0: &SpectralProfile,
    tau: f64,
    per_unit_rho: f64,
) -> Result<f64> {
    let t = p.time_at_tau(tau);
    let grid = DriftGrid::for_horizon(p, t, per_unit_rho)?;
    let sol = solve_linear_drift(p, zeta0, t, grid, &[t])?;
    let moment = first_moment(zeta0);
    let hi = (t + p.t0).sqrt();
    Ok(compare_with_asymptotic(&sol, &sol.frames[0], moment, 1.0, hi)
        .iter()
        .map(|c| c.rel_error)
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDecay {
    pub t0: f64,
    /// Fitted `−d ln‖Qζ‖²_m / dτ` over the fit window.
    pub rate: f64,
    pub fit_window: (f64, f64),
    pub zeta0_norm: f64,
    /// Largest `|⟨ζ(τ), φ₁⟩_m|` over the sampled `τ`.
    pub max_phi1_projection: f64,
    pub samples: Vec<(f64, f64, f64)>,
}

/// Evolves `Q ζ₀` and measures how fast `‖Qζ(τ)‖²_m` decays on `τ ∈ [1, 3]`.
pub fn spectral_gap_decay(p: &DirichletParams, zeta0: &SpectralProfile, per_unit_rho: f64) -> Result<GapDecay> {
    let start = project_q(zeta0)?;
    let taus: Vec<f64> = (0..=12).map(|k| 0.25 * k as f64).collect();
    let times: Vec<f64> = taus.iter().map(|&tau| p.time_at_tau(tau)).collect();
    let t_end = *times.last().unwrap();
    let grid = DriftGrid::for_horizon(p, t_end, per_unit_rho)?;
    let sol = solve_linear_drift(p, &start, t_end, grid, &times)?;
    let phi1 = eigenfunction(1, start.grid);
    let mut samples = Vec::new();
    for (frame, &tau) in sol.frames.iter().zip(&taus) {
        let zeta = sol.zeta(frame, start.grid);
        let proj = weighted_inner(&zeta, &phi1)?;
        let q_norm_sq = weighted_inner(&project_q(&zeta)?, &project_q(&zeta)?)?;
        samples.push((tau, proj, q_norm_sq));
    }
    let fit: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.0 >= 1.0 - 1e-12 && s.0 <= 3.0 + 1e-12)
        .map(|s| (s.0, s.2.ln()))
        .collect();
    let n = fit.len() as f64;
    let mx = fit.iter().map(|p| p.0).sum::<f64>() / n;
    let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / fit.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    Ok(GapDecay {
        t0: p.t0,
        rate: -slope,
        fit_window: (1.0, 3.0),
        zeta0_norm: start.weighted_norm(),
        max_phi1_projection: samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(d: f64) -> RhoGrid {
        RhoGrid::new(d, RHO_MAX).unwrap()
    }

    #[test]
    fn frame_examples() {
        let p = DirichletParams::new(1.5, 100.0, 2.0, 1).unwrap();
        assert!((frame_position(0.0, &p).xi_front - 200.0).abs() < 1e-12);
        let x = frame_position(100.0, &p).xi_front;
        assert!((x - (400.0 - 1.5 * 2f64.ln())).abs() < 1e-12);
        assert!((x - 398.9604).abs() < 5e-4);
        let flat = DirichletParams::new(0.0, 100.0, 2.0, 1).unwrap();
        assert!((frame_position(37.0, &flat).xi_front - 2.0 * 137.0).abs() < 1e-12);
    }

    #[test]
    fn params_validate_t0() {
        assert!(DirichletParams::new(3.0, 0.5, 2.0, 1).is_err());
        let p = DirichletParams::critical(400.0, 2.0 * 2f64.sqrt(), 1).unwrap();
        assert!((p.gamma - 0.5).abs() < 1e-15);
        let p3 = DirichletParams::critical(400.0, 3.0, 3).unwrap();
        assert!((p3.gamma - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hermite_matches_closed_forms() {
        for x in [-1.3, 0.0, 0.7, 2.5] {
            assert_eq!(hermite(0, x), 1.0);
            assert!((hermite(3, x) - (8.0 * x.powi(3) - 12.0 * x)).abs() < 1e-12);
            assert!((hermite(5, x) - (32.0 * x.powi(5) - 160.0 * x.powi(3) + 120.0 * x)).abs() < 1e-9);
        }
    }

    #[test]
    fn phi1_closed_form_and_norm() {
        let g = grid(0.01);
        let phi1 = eigenfunction(1, g);
        let closed = SpectralProfile::sample(g, |r| (4.0 * PI).powf(-0.25) * r * (-r * r / 4.0).exp());
        assert!(phi1.values.iter().zip(&closed.values).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!((weighted_inner(&phi1, &phi1).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pi_quarter_scaling_has_norm_two() {
        // Gaussian moment: ∫ π^{-1/2} ρ² e^{-ρ²/4} dρ over (0,∞) equals 2
        let g = grid(0.01);
        let f = SpectralProfile::sample(g, |r| PI.powf(-0.25) * r * (-r * r / 4.0).exp());
        assert!((weighted_inner(&f, &f).unwrap() - 2.0).abs() < 1e-6);
        assert!(operator_l(&f).values.iter().all(|v| v.abs() < 1e-4));
    }

    #[test]
    fn operator_on_zero_and_linearity() {
        let g = grid(0.01);
        assert!(operator_l(&SpectralProfile::zeros(g)).values.iter().all(|&v| v == 0.0));
        let zero = SpectralProfile::zeros(g);
        assert_eq!(weighted_inner(&default_zeta0(g), &zero).unwrap(), 0.0);
    }

    #[test]
    fn third_derivative_oracle_is_second_eigenfunction() {
        let g = grid(0.01);
        // d³/dρ³ e^{−ρ²/4} = (3ρ/4 − ρ³/8) e^{−ρ²/4}
        let f = SpectralProfile::sample(g, |r| (0.75 * r - r.powi(3) / 8.0) * (-r * r / 4.0).exp());
        let lf = operator_l(&f);
        let res = lf.map_with(&f, |l, v| l + v);
        assert!(res.weighted_norm() / f.weighted_norm() < 1e-3);
        // proportional to φ₂
        let phi2 = eigenfunction(2, g);
        let cos = weighted_inner(&f, &phi2).unwrap() / (f.weighted_norm() * phi2.weighted_norm());
        assert!((cos.abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eigen_residuals_small() {
        let g = grid(0.005);
        for k in 1..=3 {
            let r = eigen_residual(k, g);
            assert!(r < 1e-3, "k = {k}: {r}");
        }
    }

    #[test]
    fn eigenfunctions_are_orthonormal() {
        let g = grid(0.005);
        for i in 1..=3 {
            for j in 1..=3 {
                let v = weighted_inner(&eigenfunction(i, g), &eigenfunction(j, g)).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-6, "<phi{i}, phi{j}> = {v}");
            }
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = default_zeta0(grid(0.01));
        let b = default_zeta0(grid(0.02));
        assert!(matches!(weighted_inner(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn projection_properties() {
        let g = grid(0.01);
        let phi1 = eigenfunction(1, g);
        assert!(project_q(&phi1).unwrap().weighted_norm() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = random_dirichlet_function(&mut rng, g);
            let q = project_q(&f).unwrap();
            let qq = project_q(&q).unwrap();
            let diff = qq.map_with(&q, |a, b| a - b);
            assert!(diff.weighted_norm() < 1e-8);
            assert!(weighted_inner(&q, &phi1).unwrap().abs() < 1e-8);
            let h = random_dirichlet_function(&mut rng, g);
            assert_eq!(weighted_inner(&f, &h).unwrap(), weighted_inner(&h, &f).unwrap());
        }
    }

    #[test]
    fn self_adjoint_and_poincare_on_random_functions() {
        let g = grid(0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let f = random_dirichlet_function(&mut rng, g);
            let h = random_dirichlet_function(&mut rng, g);
            let d = self_adjoint_defect(&f, &h).unwrap();
            assert!(d < 1e-4, "defect {d}");
            let (n0, n1) = poincare_pair(&f);
            assert!(n0 <= n1, "{n0} > {n1}");
        }
    }

    #[test]
    fn asymptotic_examples() {
        let p = DirichletParams::critical(400.0, 2.0 * 2f64.sqrt(), 1).unwrap();
        assert_eq!(asymptotic_leading(50.0, 0.0, &p, 1.0), 0.0);
        let a = asymptotic_leading(50.0, 3.0, &p, 1.0);
        assert!((asymptotic_leading(50.0, 3.0, &p, 2.5) - 2.5 * a).abs() < 1e-15 * a.abs().max(1.0));
        // γ = 1/2: the time prefactor is t0^{-1/2}
        let pref = |t: f64| asymptotic_weighted(t, 1.0, &p, 1.0) / (-1.0 / (4.0 * (t + 400.0))).exp();
        assert!((pref(0.0) - pref(1000.0)).abs() < 1e-15);
        assert!((pref(0.0) - 1.0 / (20.0 * 2.0 * PI.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-0.5), 1.0);
        assert_eq!(smooth_step(1.5), 0.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let g = grid(0.01);
        principal_zeta0(g).check_decay().unwrap();
        default_zeta0(g).check_decay().unwrap();
        assert!(SpectralProfile::sample(g, |r| (-r).exp()).check_decay().is_err());
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let p = DirichletParams::critical(100.0, 2.0 * 2f64.sqrt(), 1).unwrap();
        let z0 = SpectralProfile::zeros(grid(0.01));
        let gr = DriftGrid::for_horizon(&p, 20.0, 20.0).unwrap();
        let sol = solve_linear_drift(&p, &z0, 20.0, gr, &[10.0, 20.0]).unwrap();
        assert!(sol.frames.iter().all(|f| f.w.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn drift_solution_stays_nonnegative() {
        let p = DirichletParams::critical(100.0, 2.0 * 2f64.sqrt(), 1).unwrap();
        let z0 = default_zeta0(grid(0.01));
        let t_end = p.time_at_tau(1.0);
        let gr = DriftGrid::for_horizon(&p, t_end, 40.0).unwrap();
        let sol = solve_linear_drift(&p, &z0, t_end, gr, &[t_end / 2.0, t_end]).unwrap();
        for f in &sol.frames {
            assert!(sol.z(f).iter().all(|&v| v >= -1e-10));
        }
    }

    #[test]
    fn drift_solver_rejects_short_domain() {
        let p = DirichletParams::critical(100.0, 2.0 * 2f64.sqrt(), 1).unwrap();
        let gr = DriftGrid::new(0.5, 50.0).unwrap();
        let z0 = default_zeta0(grid(0.01));
        assert!(matches!(solve_linear_drift(&p, &z0, 100.0, gr, &[100.0]), Err(Error::Config(_))));
    }

    #[test]
    fn principal_data_tracks_asymptotics() {
        let p = DirichletParams::critical(100.0, 2.0 * 2f64.sqrt(), 1).unwrap();
        let err = asymptotic_error_at_tau(&p, &principal_zeta0(grid(0.005)), 1.0, 40.0).unwrap();
        assert!(err < 0.1, "{err}");
    }
}
