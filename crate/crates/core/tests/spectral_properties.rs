use frontwave::spectral::{
    default_zeta0, eigenfunction, first_moment, principal_zeta0, project_q, solve_linear_drift, spectral_gap_decay,
    weighted_inner, DirichletParams, DriftGrid, RhoGrid, RHO_MAX,
};
use proptest::prelude::*;

const C_STAR: f64 = 2.0 * std::f64::consts::SQRT_2;

fn rho_grid() -> RhoGrid {
    RhoGrid::new(0.01, RHO_MAX).unwrap()
}

/// Starting from `Qζ₀`, the `φ₁` component stays `O(t0^{-1/2})` and
/// `‖Qζ‖²_m` decays at rate at least `2 − 1/√t0` on `τ ∈ [1, 3]`.
#[test]
fn spectral_gap_decay_of_orthogonal_data() {
    let mut scaled = Vec::new();
    for t0 in [100.0, 400.0, 1600.0] {
        let p = DirichletParams::critical(t0, C_STAR, 1).unwrap();
        let d = spectral_gap_decay(&p, &default_zeta0(rho_grid()), 80.0).unwrap();
        assert!(d.rate >= 2.0 - 1.0 / t0.sqrt(), "t0 = {t0}: rate {}", d.rate);
        let bound = 0.5 * d.zeta0_norm / t0.sqrt();
        assert!(d.max_phi1_projection <= bound, "t0 = {t0}: {} > {bound}", d.max_phi1_projection);
        scaled.push(d.max_phi1_projection * t0.sqrt());
    }
    // the leak into φ₁ shrinks like t0^{-1/2}
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.25, "{scaled:?}");
}

#[test]
fn asymptotic_error_shrinks_with_t0() {
    let g = RhoGrid::new(0.005, RHO_MAX).unwrap();
    let errs: Vec<f64> = [100.0, 400.0]
        .iter()
        .map(|&t0| {
            let p = DirichletParams::critical(t0, C_STAR, 1).unwrap();
            frontwave::spectral::asymptotic_error_at_tau(&p, &principal_zeta0(g), 1.0, 40.0).unwrap()
        })
        .collect();
    assert!(errs[1] < errs[0], "{errs:?}");
}

/// Evolving pure `φ₁` data keeps the shape: the `Q` part of `ζ(τ)` stays small.
#[test]
fn principal_mode_is_nearly_invariant() {
    let g = rho_grid();
    let p = DirichletParams::critical(1600.0, C_STAR, 1).unwrap();
    let zeta0 = principal_zeta0(g);
    let t_end = p.time_at_tau(1.0);
    let grid = DriftGrid::for_horizon(&p, t_end, 80.0).unwrap();
    let sol = solve_linear_drift(&p, &zeta0, t_end, grid, &[t_end]).unwrap();
    let zeta = sol.zeta(&sol.frames[0], g);
    let q = project_q(&zeta).unwrap();
    assert!(q.weighted_norm() < 0.05 * zeta.weighted_norm());
    // the φ₁ coefficient is carried by the first moment
    let coef = weighted_inner(&zeta0, &eigenfunction(1, g)).unwrap();
    let from_moment = first_moment(&zeta0) * (4.0 * std::f64::consts::PI).powf(-0.25);
    assert!((coef - from_moment).abs() < 1e-3 * coef.abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Parabolic positivity and linearity of the drift solver.
    #[test]
    fn drift_solver_is_positive_and_linear(scale in 0.1..10.0f64, t0 in 50.0..200.0f64) {
        let g = rho_grid();
        let p = DirichletParams::critical(t0, C_STAR, 1).unwrap();
        let t_end = 0.5 * t0;
        let grid = DriftGrid::for_horizon(&p, t_end, 20.0).unwrap();
        let base = solve_linear_drift(&p, &default_zeta0(g), t_end, grid, &[t_end]).unwrap();
        let big = solve_linear_drift(&p, &default_zeta0(g).scaled(scale), t_end, grid, &[t_end]).unwrap();
        for (a, b) in base.frames[0].w.iter().zip(&big.frames[0].w) {
            prop_assert!(*a >= -1e-10);
            prop_assert!((b - scale * a).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
