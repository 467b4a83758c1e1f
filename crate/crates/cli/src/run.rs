//! Mode execution, output files and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use frontwave::criteria::{self, ReferenceRuns};
use frontwave::envelope::{self, EnvelopeReport};
use frontwave::fronts::{self, DriftFit, Field, FrontRecord, FrontSeries, SpeedEstimate};
use frontwave::ode::{self, OdeState};
use frontwave::radial::simulate;
use frontwave::spectral::{self, DriftGrid, RhoGrid, RHO_MAX};
use frontwave::{ModelParams, SimConfig, SimulationResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{self, DirichletSettings, ExperimentConfig, FitSettings, Mode, OdeSettings, Zeta0Kind};
use crate::plots;
use crate::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const WORKERS_ENV: &str = "FRONTWAVE_WORKERS";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub passed: bool,
    pub invariant_failures: usize,
    pub envelope_violations: usize,
    pub notes: Vec<String>,
}

/// Per-simulation digest of the headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub params: ModelParams,
    pub c_star: f64,
    pub dt: f64,
    pub r_max: f64,
    pub snapshots: usize,
    pub invariant_failures: usize,
    pub envelope_violations: usize,
    pub front_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub mode: Mode,
    pub versions: BTreeMap<String, String>,
    pub seed: u64,
    pub workers: usize,
    pub config_text: String,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    pub audit: AuditSummary,
    pub runs: Vec<RunSummary>,
    pub files: Vec<FileDigest>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    /// Lines worth showing on the terminal.
    pub messages: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.audit.passed
    }
}

/// `FRONTWAVE_WORKERS` wins over `--workers`; otherwise all available cores.
pub fn resolve_workers(cli: Option<usize>) -> Result<usize> {
    let env = std::env::var(WORKERS_ENV).ok();
    resolve_workers_from(cli, env.as_deref())
}

pub fn resolve_workers_from(cli: Option<usize>, env: Option<&str>) -> Result<usize> {
    let n = match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(text) => text
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("{WORKERS_ENV}={text:?} is not a worker count")))?,
        None => match cli {
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(CliError::Config("worker count must be at least 1".into()));
    }
    Ok(n)
}

/// Runs `cfg` and writes every artifact plus `manifest.json` under `out`.
///
/// Relative input paths in the config resolve against `config_dir`.
pub fn execute(
    cfg: &ExperimentConfig,
    config_text: &str,
    config_dir: &Path,
    out: &Path,
    workers: usize,
) -> Result<RunOutcome> {
    let started = Instant::now();
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let (audit, runs, messages) = pool.install(|| match cfg.mode {
        Mode::Simulate => {
            let sim = cfg.sim.as_ref().expect("simulate config");
            let run = simulate_into(out, "run", sim)?;
            Ok((audit_from_runs(std::slice::from_ref(&run)), vec![run], Vec::new()))
        }
        Mode::Sweep => run_sweep(cfg, out),
        Mode::Verify => run_verify(cfg, out),
        Mode::Ode => run_ode(cfg.ode.as_ref().expect("ode settings"), out),
        Mode::Dirichlet => run_dirichlet(cfg.dirichlet.as_ref().expect("dirichlet settings"), cfg.seed, out),
        Mode::Fit => run_fit(cfg.fit.as_ref().expect("fit settings"), config_dir, out),
    })?;
    let files = digest_dir(out)?;
    let manifest = Manifest {
        tool: "frontwave".into(),
        mode: cfg.mode,
        versions: BTreeMap::from([
            ("frontwave-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("frontwave-core".to_string(), frontwave::VERSION.to_string()),
        ]),
        seed: cfg.seed,
        workers,
        config_text: config_text.to_string(),
        config: serde_json::to_value(cfg).map_err(|e| CliError::Input(e.to_string()))?,
        wall_time_s: started.elapsed().as_secs_f64(),
        audit,
        runs,
        files,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(RunOutcome { manifest, messages })
}

fn audit_from_runs(runs: &[RunSummary]) -> AuditSummary {
    let invariant_failures = runs.iter().map(|r| r.invariant_failures).sum();
    let envelope_violations = runs.iter().map(|r| r.envelope_violations).sum();
    let notes = runs
        .iter()
        .filter(|r| r.invariant_failures + r.envelope_violations > 0)
        .map(|r| {
            format!(
                "{}: {} invariant failures, {} envelope violations",
                r.name, r.invariant_failures, r.envelope_violations
            )
        })
        .collect();
    AuditSummary {
        passed: invariant_failures == 0 && envelope_violations == 0,
        invariant_failures,
        envelope_violations,
        notes,
    }
}

type ModeOutput = (AuditSummary, Vec<RunSummary>, Vec<String>);

fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<ModeOutput> {
    let entries = config::sweep_entries(cfg).into_iter().collect::<Result<Vec<_>>>()?;
    let runs = entries
        .par_iter()
        .map(|(name, sim)| simulate_into(&out.join(name), name, sim))
        .collect::<Result<Vec<_>>>()?;
    let messages = runs
        .iter()
        .map(|r| match r.front_speed {
            Some(c) => format!("{}: c* = {:.6}, measured F+C front speed {:.6}", r.name, r.c_star, c),
            None => format!("{}: c* = {:.6}, front speed unavailable", r.name, r.c_star),
        })
        .collect();
    Ok((audit_from_runs(&runs), runs, messages))
}

/// Simulation plus profiles, fronts, fits, audits, envelope report and plot script in `dir`.
pub fn simulate_into(dir: &Path, name: &str, sim: &SimConfig) -> Result<RunSummary> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let result = simulate(sim)?;
    let c_star = sim.params.spreading_speeds().c_star;

    write_text(&dir.join("profiles.csv"), &profiles_csv(&result))?;
    write_text(&dir.join("fronts.csv"), &fronts_csv(&result.fronts.records))?;
    let fits = front_fits(&result.fronts, c_star, None);
    write_json(&dir.join("fits.json"), &fits)?;

    let mut ndjson = String::new();
    for record in &result.audits {
        ndjson.push_str(&serde_json::to_string(record).map_err(|e| CliError::Input(e.to_string()))?);
        ndjson.push('\n');
    }
    write_text(&dir.join("audit.ndjson"), &ndjson)?;

    let k = envelope::choose_constants(&result.snapshots[0], result.grid(), &sim.params, 1.05 * c_star)?;
    let report: EnvelopeReport = envelope::audit_envelopes(&result, &k);
    write_json(&dir.join("envelope-report.json"), &report)?;

    plots::write_plot_script(dir)?;

    let front_speed = fits
        .iter()
        .find(|f| f.field == Field::FC && f.level == 0.5)
        .and_then(|f| f.speed.as_ref())
        .map(|s| s.c_hat);
    Ok(RunSummary {
        name: name.to_string(),
        params: sim.params,
        c_star,
        dt: result.dt_max,
        r_max: sim.grid.r_max(),
        snapshots: result.snapshots.len(),
        invariant_failures: result.audit_failures().len(),
        envelope_violations: report.violations.len(),
        front_speed,
    })
}

/// 15 significant digits.
fn num(v: f64) -> String {
    format!("{v:.14e}")
}

pub fn profiles_csv(result: &SimulationResult) -> String {
    let grid = result.grid();
    let mut out = String::from("t,r,F,C,H\n");
    for s in &result.snapshots {
        let t = num(s.t);
        for i in 0..s.len() {
            let _ = writeln!(out, "{t},{},{},{},{}", num(grid.r(i)), num(s.f[i]), num(s.c[i]), num(s.h[i]));
        }
    }
    out
}

pub fn fronts_csv(records: &[FrontRecord]) -> String {
    let mut out = String::from("t,field,level,position\n");
    for r in records {
        let position = r.position.map(num).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{position}", num(r.t), r.field, r.level);
    }
    out
}

/// Parses a `fronts.csv`; empty positions are absent fronts.
pub fn parse_fronts_csv(text: &str) -> Result<FrontSeries> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "t,field,level,position" => {}
        _ => return Err(CliError::Input("fronts csv must start with `t,field,level,position`".into())),
    }
    let mut records = Vec::new();
    let mut levels: Vec<f64> = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| CliError::Input(format!("fronts csv line {}: {what}", n + 1));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let t: f64 = cols[0].trim().parse().map_err(|_| bad("bad t"))?;
        let field: Field = cols[1].trim().parse().map_err(|_| bad("bad field"))?;
        let level: f64 = cols[2].trim().parse().map_err(|_| bad("bad level"))?;
        let position = match cols[3].trim() {
            "" => None,
            x => Some(x.parse::<f64>().map_err(|_| bad("bad position"))?),
        };
        if !levels.contains(&level) {
            levels.push(level);
        }
        records.push(FrontRecord { t, field, level, position });
    }
    Ok(FrontSeries { levels, records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontFit {
    pub field: Field,
    pub level: f64,
    pub speed: Option<SpeedEstimate>,
    pub drift: Option<DriftFit>,
    pub errors: Vec<String>,
}

/// Speed and log-drift fits for every front over the last half of the record.
fn front_fits(series: &FrontSeries, c_star: f64, only: Option<(Field, f64, Option<(f64, f64)>)>) -> Vec<FrontFit> {
    let t_last = series.t_last().unwrap_or(0.0);
    let targets: Vec<(Field, f64, Option<(f64, f64)>)> = match only {
        Some(target) => vec![target],
        None => Field::ALL
            .iter()
            .flat_map(|&f| series.levels.iter().map(move |&m| (f, m, None)))
            .collect(),
    };
    targets
        .into_iter()
        .map(|(field, level, window)| {
            let mut errors = Vec::new();
            let speed = fronts::speed_estimate(series, field, level, window.unwrap_or((0.5 * t_last, t_last)))
                .map_err(|e| errors.push(format!("speed: {e}")))
                .ok();
            let drift = fronts::drift_fit(series, field, level, c_star, window)
                .map_err(|e| errors.push(format!("drift: {e}")))
                .ok();
            FrontFit {
                field,
                level,
                speed,
                drift,
                errors,
            }
        })
        .collect()
}

fn run_fit(settings: &FitSettings, config_dir: &Path, out: &Path) -> Result<ModeOutput> {
    let path = if settings.fronts_csv.is_absolute() {
        settings.fronts_csv.clone()
    } else {
        config_dir.join(&settings.fronts_csv)
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let series = parse_fronts_csv(&text)?;
    let fits = front_fits(&series, settings.c_star, Some((settings.field, settings.level, settings.window)));
    write_json(&out.join("fits.json"), &fits)?;
    let fit = &fits[0];
    let mut messages = Vec::new();
    if let Some(s) = &fit.speed {
        messages.push(format!("{} front at {}: speed {:.6} ± {:.2e}", fit.field, fit.level, s.c_hat, s.stderr));
    }
    if let Some(d) = &fit.drift {
        messages.push(format!("log drift k = {:.6}, b = {:.6}", d.k_hat, d.b_hat));
    }
    if fit.speed.is_none() && fit.drift.is_none() {
        return Err(CliError::Input(fit.errors.join("; ")));
    }
    let audit = AuditSummary {
        passed: true,
        invariant_failures: 0,
        envelope_violations: 0,
        notes: fit.errors.clone(),
    };
    Ok((audit, Vec::new(), messages))
}

fn run_verify(cfg: &ExperimentConfig, out: &Path) -> Result<ModeOutput> {
    let runs = ReferenceRuns::compute(cfg.verify_dr)?;
    let report = criteria::run_all(&runs, cfg.seed);
    write_json(&out.join("verify-report.json"), &report)?;
    let messages: Vec<String> = report.criteria.iter().map(|c| c.line()).collect();
    let notes = report.criteria.iter().filter(|c| !c.passed).map(|c| c.line()).collect();
    let audit = AuditSummary {
        passed: report.all_passed,
        invariant_failures: 0,
        envelope_violations: 0,
        notes,
    };
    Ok((audit, Vec::new(), messages))
}

fn run_ode(s: &OdeSettings, out: &Path) -> Result<ModeOutput> {
    let traj = ode::integrate_ode(OdeState::new(s.c0, s.h0), &s.params, s.dt, s.t_end)?;
    let mut csv = String::from("t,C,H,Phi,dPhi_dt\n");
    let mut phis = Vec::with_capacity(traj.states.len());
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let phi = ode::lyapunov(*x, &s.params).ok();
        let dphi = ode::lyapunov_dissipation(*x, &s.params).ok();
        phis.push(phi);
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            num(*t),
            num(x.c),
            num(x.h),
            phi.map(num).unwrap_or_default(),
            dphi.map(num).unwrap_or_default()
        );
    }
    write_text(&out.join("ode.csv"), &csv)?;

    let mut notes = Vec::new();
    let mut passed = true;
    if let Some(phi) = phis.iter().copied().collect::<Option<Vec<f64>>>() {
        let worst = phi.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        if worst > 1e-12 * phi[0].abs().max(1.0) {
            passed = false;
            notes.push(format!("Lyapunov function increased by {worst:e} in one step"));
        }
    } else {
        notes.push("Lyapunov function undefined along the trajectory (needs g < 1 and C, H > 0)".into());
    }
    let last = traj.last();
    let mut messages = vec![format!("final state (C, H) = ({:.10}, {:.10})", last.c, last.h)];
    if let Some(star) = s.params.coexistence_state() {
        messages.push(format!(
            "distance to (C*, H*) = ({:.10}, {:.10}): {:.3e}",
            star.c,
            star.h,
            last.distance(&OdeState::from(star))
        ));
    }
    let audit = AuditSummary {
        passed,
        invariant_failures: usize::from(!passed),
        envelope_violations: 0,
        notes,
    };
    Ok((audit, Vec::new(), messages))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletRun {
    pub t0: f64,
    pub delta: f64,
    pub gamma: f64,
    pub t: f64,
    pub tau: f64,
    pub zeta0_moment: f64,
    pub sup_rel_error: f64,
    pub gap_decay_rate: f64,
    pub max_phi1_projection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub zeta0: Zeta0Kind,
    pub eigenvalues: Vec<f64>,
    pub eigen_residuals: Vec<f64>,
    pub suite: criteria::CriterionOutcome,
    pub runs: Vec<DirichletRun>,
}

fn run_dirichlet(s: &DirichletSettings, seed: u64, out: &Path) -> Result<ModeOutput> {
    let rho = RhoGrid::new(s.d_rho, RHO_MAX)?;
    let zeta0 = match s.zeta0 {
        Zeta0Kind::Principal => spectral::principal_zeta0(rho),
        Zeta0Kind::Bump => spectral::default_zeta0(rho),
    };
    let moment = spectral::first_moment(&zeta0);
    let mut csv = String::from("t0,t,xi,z_numeric,z_asymptotic,rel_error\n");
    let mut runs = Vec::new();
    for &t0 in &s.t0 {
        let p = config::dirichlet_params(s, t0)?;
        let t = p.time_at_tau(s.tau);
        let grid = DriftGrid::for_horizon(&p, t, s.per_unit_rho)?;
        let sol = spectral::solve_linear_drift(&p, &zeta0, t, grid, &[t])?;
        let points = spectral::compare_with_asymptotic(&sol, &sol.frames[0], moment, 1.0, (t + t0).sqrt());
        for c in &points {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                num(t0),
                num(c.t),
                num(c.xi),
                num(c.z_numeric),
                num(c.z_asymptotic),
                num(c.rel_error)
            );
        }
        let gap = spectral::spectral_gap_decay(&p, &zeta0, s.per_unit_rho)?;
        runs.push(DirichletRun {
            t0,
            delta: p.delta,
            gamma: p.gamma,
            t,
            tau: s.tau,
            zeta0_moment: moment,
            sup_rel_error: points.iter().map(|c| c.rel_error).fold(0.0, f64::max),
            gap_decay_rate: gap.rate,
            max_phi1_projection: gap.max_phi1_projection,
        });
    }
    write_text(&out.join("dirichlet.csv"), &csv)?;
    let report = SpectralReport {
        zeta0: s.zeta0,
        eigenvalues: (1..=3).map(spectral::eigenvalue).collect(),
        eigen_residuals: (1..=3).map(|k| spectral::eigen_residual(k, rho)).collect(),
        suite: criteria::spectral_suite(seed),
        runs,
    };
    write_json(&out.join("spectral-report.json"), &report)?;
    let mut messages: Vec<String> = report
        .runs
        .iter()
        .map(|r| {
            format!(
                "t0 = {}: sup relative error {:.4} at tau = {}, gap decay rate {:.4}",
                r.t0, r.sup_rel_error, r.tau, r.gap_decay_rate
            )
        })
        .collect();
    messages.push(report.suite.line());
    let audit = AuditSummary {
        passed: report.suite.passed,
        invariant_failures: 0,
        envelope_violations: 0,
        notes: if report.suite.passed { Vec::new() } else { vec![report.suite.line()] },
    };
    Ok((audit, Vec::new(), messages))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Every file under `root` except the top-level manifest, sorted by relative path.
pub fn digest_dir(root: &Path) -> Result<Vec<FileDigest>> {
    let mut paths = Vec::new();
    collect_files(root, &mut paths)?;
    let mut out = Vec::new();
    for path in paths {
        let rel = path.strip_prefix(root).expect("walked from root");
        let rel = rel.iter().map(|p| p.to_string_lossy()).collect::<Vec<_>>().join("/");
        if rel == MANIFEST {
            continue;
        }
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        out.push(FileDigest {
            path: rel,
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_cli_workers() {
        assert_eq!(resolve_workers_from(Some(3), Some("2")).unwrap(), 2);
        assert_eq!(resolve_workers_from(Some(3), None).unwrap(), 3);
        assert_eq!(resolve_workers_from(Some(3), Some("  ")).unwrap(), 3);
        assert!(resolve_workers_from(None, Some("many")).is_err());
        assert!(resolve_workers_from(Some(0), None).is_err());
    }

    #[test]
    fn fronts_csv_round_trips() {
        let records = vec![
            FrontRecord { t: 0.0, field: Field::FC, level: 0.5, position: Some(4.25) },
            FrontRecord { t: 5.0, field: Field::H, level: 0.05, position: None },
        ];
        let series = parse_fronts_csv(&fronts_csv(&records)).unwrap();
        assert_eq!(series.records, records);
        assert_eq!(series.levels, vec![0.5, 0.05]);
    }

    #[test]
    fn fronts_csv_errors_carry_line_numbers() {
        let err = parse_fronts_csv("t,field,level,position\n0,F,0.5,1\n1,Q,0.5,2\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn numbers_keep_fifteen_digits() {
        assert_eq!(num(std::f64::consts::PI), "3.14159265358979e0");
        assert_eq!(num(0.0), "0.00000000000000e0");
    }
}
