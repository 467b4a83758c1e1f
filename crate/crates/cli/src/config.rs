//! TOML experiment configuration.
//!
//! Model and grid keys live at the top level; mode-specific settings go in
//! `[sweep]`, `[ode]`, `[dirichlet]` and `[fit]` tables. Unknown keys are
//! rejected.
//!
//! ```toml
//! a = 1.0
//! b = 1.0
//! s = 1.0
//! g = 2.0
//! t_end = 150.0
//! # dr = 0.1, cfl = 0.8, snapshot_dt = 5.0, levels = [0.05, 0.5]
//! # r_max defaults to 1.3·c*·t_end + 50
//!
//! [sweep]
//! g = [0.4, 1.0, 2.0]
//! ```

use std::path::PathBuf;

use frontwave::criteria::DEFAULT_SEED;
use frontwave::fronts::Field;
use frontwave::radial::InitSpec;
use frontwave::{ModelParams, RadialGrid, SimConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_DR: f64 = 0.1;
pub const DEFAULT_CFL: f64 = 0.8;
pub const DEFAULT_SNAPSHOT_DT: f64 = 5.0;
pub const DEFAULT_LEVELS: [f64; 2] = [0.05, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Sweep,
    Verify,
    Ode,
    Dirichlet,
    Fit,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
            Mode::Verify => "verify",
            Mode::Ode => "ode",
            Mode::Dirichlet => "dirichlet",
            Mode::Fit => "fit",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    a: Option<f64>,
    b: Option<f64>,
    s: Option<f64>,
    g: Option<f64>,
    d: Option<f64>,
    dim: Option<usize>,
    t_end: Option<f64>,
    dr: Option<f64>,
    r_max: Option<f64>,
    cfl: Option<f64>,
    snapshot_dt: Option<f64>,
    levels: Option<Vec<f64>>,
    seed: Option<u64>,
    amplitude: Option<f64>,
    support_radius: Option<f64>,
    sweep: Option<RawSweep>,
    ode: Option<RawOde>,
    dirichlet: Option<RawDirichlet>,
    fit: Option<RawFit>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
    s: Option<Vec<f64>>,
    g: Option<Vec<f64>>,
    d: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawOde {
    c0: f64,
    h0: f64,
    t_end: f64,
    dt: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawDirichlet {
    t0: Vec<f64>,
    delta: Option<f64>,
    tau: Option<f64>,
    c_star: Option<f64>,
    d_rho: Option<f64>,
    per_unit_rho: Option<f64>,
    zeta0: Option<Zeta0Kind>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    fronts_csv: PathBuf,
    c_star: Option<f64>,
    field: Option<String>,
    level: Option<f64>,
    window: Option<[f64; 2]>,
}

/// One sweep axis: parameter name and its values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAxis {
    pub name: &'static str,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zeta0Kind {
    /// `ρ e^{−ρ²/4}` with a smooth cutoff on `[6, 9]`.
    Principal,
    /// `exp(1 − 1/(1 − (ρ−1)²))` on `(0, 2)`.
    Bump,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSettings {
    pub params: ModelParams,
    pub c0: f64,
    pub h0: f64,
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirichletSettings {
    pub t0: Vec<f64>,
    /// `None` selects the critical drift `(N+2)/c*`.
    pub delta: Option<f64>,
    pub tau: f64,
    pub c_star: f64,
    pub dim: usize,
    pub d_rho: f64,
    pub per_unit_rho: f64,
    pub zeta0: Zeta0Kind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSettings {
    pub fronts_csv: PathBuf,
    pub c_star: f64,
    pub field: Field,
    pub level: f64,
    pub window: Option<(f64, f64)>,
}

/// Fully validated configuration for one mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub sim: Option<SimConfig>,
    /// `true` when `r_max` was derived from `c*·t_end` rather than given.
    pub auto_r_max: bool,
    pub sweep_axes: Vec<SweepAxis>,
    pub ode: Option<OdeSettings>,
    pub dirichlet: Option<DirichletSettings>,
    pub fit: Option<FitSettings>,
    /// Grid spacing for the verification reference runs.
    pub verify_dr: f64,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require(value: Option<f64>, key: &str, mode: Mode) -> Result<f64, CliError> {
    value.ok_or_else(|| config_err(format!("missing key `{key}` (required by {} mode)", mode.name())))
}

/// `1.3·c*·t_end + 50`.
pub fn auto_r_max(params: &ModelParams, t_end: f64) -> f64 {
    1.3 * params.spreading_speeds().c_star * t_end + 50.0
}

fn model_params(raw: &RawConfig, mode: Mode, a_default: Option<f64>) -> Result<ModelParams, CliError> {
    let a = match a_default {
        Some(v) => raw.a.unwrap_or(v),
        None => require(raw.a, "a", mode)?,
    };
    let b = require(raw.b, "b", mode)?;
    let s = require(raw.s, "s", mode)?;
    let g = require(raw.g, "g", mode)?;
    let d = raw.d.unwrap_or(1.0);
    let dim = raw.dim.unwrap_or(1);
    check_params(a, b, s, g, d, dim)
}

fn check_params(a: f64, b: f64, s: f64, g: f64, d: f64, dim: usize) -> Result<ModelParams, CliError> {
    if d < 1.0 {
        return Err(config_err(format!("key `d`: d = {d} violates d≥1 (hunter-gatherers diffuse at least as fast as farmers)")));
    }
    for (key, v) in [("a", a), ("b", b), ("s", s), ("g", g)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(config_err(format!("key `{key}` must be positive, got {v}")));
        }
    }
    ModelParams::new(a, b, s, g, d, dim).map_err(|e| config_err(e.to_string()))
}

fn sim_config(raw: &RawConfig, params: ModelParams, mode: Mode) -> Result<(SimConfig, bool), CliError> {
    let t_end = require(raw.t_end, "t_end", mode)?;
    let dr = raw.dr.unwrap_or(DEFAULT_DR);
    let auto = raw.r_max.is_none();
    let r_max = raw.r_max.unwrap_or_else(|| auto_r_max(&params, t_end));
    let grid = RadialGrid::covering(dr, r_max, params.dim).map_err(|e| config_err(e.to_string()))?;
    let init = InitSpec {
        amplitude: raw.amplitude.unwrap_or(1.0),
        support_radius: raw.support_radius.unwrap_or(5.0),
    };
    let cfg = SimConfig {
        params,
        grid,
        init,
        t_end,
        snapshot_dt: raw.snapshot_dt.unwrap_or(DEFAULT_SNAPSHOT_DT),
        cfl_factor: raw.cfl.unwrap_or(DEFAULT_CFL),
        levels: raw.levels.clone().unwrap_or_else(|| DEFAULT_LEVELS.to_vec()),
    };
    if !(t_end > 0.0) {
        return Err(config_err(format!("key `t_end` must be positive, got {t_end}")));
    }
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    Ok((cfg, auto))
}

fn sweep_axes(raw: &RawConfig) -> Result<Vec<SweepAxis>, CliError> {
    let sweep = raw
        .sweep
        .as_ref()
        .ok_or_else(|| config_err("missing table `[sweep]` (required by sweep mode)"))?;
    let axes: Vec<SweepAxis> = [
        ("a", &sweep.a),
        ("b", &sweep.b),
        ("s", &sweep.s),
        ("g", &sweep.g),
        ("d", &sweep.d),
    ]
    .into_iter()
    .filter_map(|(name, values)| values.clone().map(|values| SweepAxis { name, values }))
    .collect();
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(config_err("`[sweep]` needs at least one nonempty axis among a, b, s, g, d"));
    }
    Ok(axes)
}

/// Parses and validates `text` for `mode`, filling documented defaults.
pub fn parse_config(text: &str, mode: Mode) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
    let mut cfg = ExperimentConfig {
        mode,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        sim: None,
        auto_r_max: false,
        sweep_axes: Vec::new(),
        ode: None,
        dirichlet: None,
        fit: None,
        verify_dr: raw.dr.unwrap_or(DEFAULT_DR),
    };
    match mode {
        Mode::Simulate => {
            let params = model_params(&raw, mode, None)?;
            let (sim, auto) = sim_config(&raw, params, mode)?;
            cfg.sim = Some(sim);
            cfg.auto_r_max = auto;
        }
        Mode::Sweep => {
            cfg.sweep_axes = sweep_axes(&raw)?;
            // base values may be omitted for swept parameters
            let mut base = raw.clone();
            for axis in &cfg.sweep_axes {
                let first = Some(axis.values[0]);
                match axis.name {
                    "a" => base.a = base.a.or(first),
                    "b" => base.b = base.b.or(first),
                    "s" => base.s = base.s.or(first),
                    "g" => base.g = base.g.or(first),
                    _ => base.d = base.d.or(first),
                }
            }
            let params = model_params(&base, mode, None)?;
            let (sim, auto) = sim_config(&base, params, mode)?;
            cfg.sim = Some(sim);
            cfg.auto_r_max = auto;
            // every entry must be valid on its own
            for entry in sweep_entries(&cfg) {
                entry?;
            }
        }
        Mode::Verify => {
            if !(cfg.verify_dr > 0.0) {
                return Err(config_err("key `dr` must be positive"));
            }
        }
        Mode::Ode => {
            let params = model_params(&raw, mode, Some(1.0))?;
            let ode = raw
                .ode
                .as_ref()
                .ok_or_else(|| config_err("missing table `[ode]` (required by ode mode)"))?;
            let dt_max = frontwave::ode::max_ode_dt(&params);
            let dt = ode.dt.unwrap_or(dt_max);
            if !(dt > 0.0 && dt <= dt_max) {
                return Err(config_err(format!("key `ode.dt` must lie in (0, {dt_max}], got {dt}")));
            }
            if !(ode.t_end >= 0.0) {
                return Err(config_err(format!("key `ode.t_end` must be nonnegative, got {}", ode.t_end)));
            }
            cfg.ode = Some(OdeSettings {
                params,
                c0: ode.c0,
                h0: ode.h0,
                t_end: ode.t_end,
                dt,
            });
        }
        Mode::Dirichlet => {
            let table = raw
                .dirichlet
                .as_ref()
                .ok_or_else(|| config_err("missing table `[dirichlet]` (required by dirichlet mode)"))?;
            let c_star = match (table.c_star, raw.a, raw.s) {
                (Some(c), _, _) => c,
                (None, Some(a), Some(s)) => 2.0 * a.sqrt().max((1.0 + s).sqrt()),
                _ => return Err(config_err("dirichlet mode needs `dirichlet.c_star` or both `a` and `s`")),
            };
            if table.t0.is_empty() {
                return Err(config_err("key `dirichlet.t0` needs at least one value"));
            }
            let settings = DirichletSettings {
                t0: table.t0.clone(),
                delta: table.delta,
                tau: table.tau.unwrap_or(1.0),
                c_star,
                dim: raw.dim.unwrap_or(1),
                d_rho: table.d_rho.unwrap_or(0.005),
                per_unit_rho: table.per_unit_rho.unwrap_or(80.0),
                zeta0: table.zeta0.unwrap_or(Zeta0Kind::Principal),
            };
            for &t0 in &settings.t0 {
                dirichlet_params(&settings, t0)?;
            }
            if !(settings.tau > 0.0 && settings.d_rho > 0.0 && settings.per_unit_rho > 0.0) {
                return Err(config_err("`dirichlet.tau`, `d_rho` and `per_unit_rho` must be positive"));
            }
            cfg.dirichlet = Some(settings);
        }
        Mode::Fit => {
            let table = raw
                .fit
                .as_ref()
                .ok_or_else(|| config_err("missing table `[fit]` (required by fit mode)"))?;
            let c_star = match (table.c_star, raw.a, raw.s) {
                (Some(c), _, _) => c,
                (None, Some(a), Some(s)) => 2.0 * a.sqrt().max((1.0 + s).sqrt()),
                _ => return Err(config_err("fit mode needs `fit.c_star` or both `a` and `s`")),
            };
            let field = match &table.field {
                Some(name) => name.parse::<Field>().map_err(|e| config_err(format!("key `fit.field`: {e}")))?,
                None => Field::FC,
            };
            cfg.fit = Some(FitSettings {
                fronts_csv: table.fronts_csv.clone(),
                c_star,
                field,
                level: table.level.unwrap_or(0.5),
                window: table.window.map(|w| (w[0], w[1])),
            });
        }
    }
    Ok(cfg)
}

pub fn dirichlet_params(s: &DirichletSettings, t0: f64) -> Result<frontwave::spectral::DirichletParams, CliError> {
    let p = match s.delta {
        Some(delta) => frontwave::spectral::DirichletParams::new(delta, t0, s.c_star, s.dim),
        None => frontwave::spectral::DirichletParams::critical(t0, s.c_star, s.dim),
    };
    p.map_err(|e| config_err(e.to_string()))
}

/// Stable directory name such as `g=0.4` or `a=4,g=0.4`.
pub fn entry_name(values: &[(&'static str, f64)]) -> String {
    values
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Cartesian product of the sweep axes applied to the base simulation.
pub fn sweep_entries(cfg: &ExperimentConfig) -> Vec<Result<(String, SimConfig), CliError>> {
    let base = cfg.sim.as_ref().expect("sweep has a base simulation");
    let mut combos: Vec<Vec<(&'static str, f64)>> = vec![Vec::new()];
    for axis in &cfg.sweep_axes {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                axis.values.iter().map(move |&v| {
                    let mut next = c.clone();
                    next.push((axis.name, v));
                    next
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|combo| {
            let p = base.params;
            let (mut a, mut b, mut s, mut g, mut d) = (p.a, p.b, p.s, p.g, p.d);
            for &(name, v) in &combo {
                match name {
                    "a" => a = v,
                    "b" => b = v,
                    "s" => s = v,
                    "g" => g = v,
                    _ => d = v,
                }
            }
            let name = entry_name(&combo);
            let params = check_params(a, b, s, g, d, p.dim).map_err(|e| config_err(format!("sweep entry {name}: {e}")))?;
            let mut sim = base.clone();
            sim.params = params;
            if cfg.auto_r_max {
                sim.grid = RadialGrid::covering(sim.grid.dr, auto_r_max(&params, sim.t_end), params.dim)
                    .map_err(|e| config_err(e.to_string()))?;
            }
            sim.validate().map_err(|e| config_err(format!("sweep entry {name}: {e}")))?;
            Ok((name, sim))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("a = 1\nb = 1\ns = 1\ng = 2\nt_end = 150\n", Mode::Simulate).unwrap();
        let sim = cfg.sim.unwrap();
        assert_eq!(sim.grid.dr, 0.1);
        assert_eq!(sim.cfl_factor, 0.8);
        assert_eq!(sim.snapshot_dt, 5.0);
        assert_eq!(sim.levels, vec![0.05, 0.5]);
        let want = 2.0 * 2f64.sqrt() * 150.0 * 1.3 + 50.0;
        assert!(sim.grid.r_max() >= want && sim.grid.r_max() < want + 0.1);
        assert!(cfg.auto_r_max);
    }

    #[test]
    fn slow_hunters_are_rejected() {
        let err = parse_config("a = 1\nb = 1\ns = 1\ng = 2\nd = 0.5\nt_end = 10\n", Mode::Simulate).unwrap_err();
        assert!(err.to_string().contains("d≥1"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn duplicate_key_is_named() {
        let err = parse_config("a = 1\na = 2\nb = 1\ns = 1\ng = 2\nt_end = 10\n", Mode::Simulate).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`a`") || msg.contains("key `a`") || msg.contains("a"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = parse_config("a = 1\nbogus = 3\n", Mode::Simulate).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn type_mismatch_is_rejected() {
        let err = parse_config("a = \"one\"\n", Mode::Simulate).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn missing_key_names_mode() {
        let err = parse_config("a = 1\nb = 1\ns = 1\ng = 2\n", Mode::Simulate).unwrap_err();
        assert!(err.to_string().contains("t_end"), "{err}");
    }

    #[test]
    fn sweep_entries_have_stable_names() {
        let text = "a = 1\nb = 1\ns = 1\nt_end = 20\n[sweep]\ng = [0.4, 1.0, 2.0]\n";
        let cfg = parse_config(text, Mode::Sweep).unwrap();
        let names: Vec<String> = sweep_entries(&cfg).into_iter().map(|e| e.unwrap().0).collect();
        assert_eq!(names, ["g=0.4", "g=1", "g=2"]);
    }

    #[test]
    fn sweep_resizes_the_domain_per_entry() {
        let text = "b = 1\ns = 0.5\ng = 2\nt_end = 20\n[sweep]\na = [1.0, 9.0]\n";
        let cfg = parse_config(text, Mode::Sweep).unwrap();
        let entries: Vec<_> = sweep_entries(&cfg).into_iter().map(|e| e.unwrap()).collect();
        assert!(entries[1].1.grid.r_max() > entries[0].1.grid.r_max());
    }

    #[test]
    fn ode_and_dirichlet_tables() {
        let cfg = parse_config("b = 1\ns = 0.5\ng = 0.4\n[ode]\nc0 = 0.1\nh0 = 0.9\nt_end = 10\n", Mode::Ode).unwrap();
        assert!((cfg.ode.unwrap().dt - 0.00625).abs() < 1e-15);
        let cfg = parse_config("a = 1\ns = 1\n[dirichlet]\nt0 = [100, 400]\n", Mode::Dirichlet).unwrap();
        let d = cfg.dirichlet.unwrap();
        assert!((d.c_star - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.zeta0, Zeta0Kind::Principal);
        assert!(parse_config("[dirichlet]\nt0 = [100]\nc_star = 2\ndelta = 1000\n", Mode::Dirichlet).is_err());
    }
}
