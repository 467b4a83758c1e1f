//! Gnuplot script for the profile snapshots of one run directory.
//!
//! The script only refers to files next to it, so a run directory can be
//! moved or archived and still be plotted with `gnuplot plot.gp`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::{CliError, Result};

pub const SCRIPT: &str = "plot.gp";
pub const IMAGE: &str = "profiles.png";
const MAX_PANELS: usize = 4;

struct Snapshot {
    t: f64,
    r_max: f64,
    peak: f64,
}

fn read_snapshots(dir: &Path) -> Result<Vec<Snapshot>> {
    let path = dir.join("profiles.csv");
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut snaps: Vec<Snapshot> = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CliError::Input(format!("profiles.csv line {}: not numeric", n + 1)))?;
        if cols.len() != 5 {
            return Err(CliError::Input(format!("profiles.csv line {}: expected 5 columns", n + 1)));
        }
        let peak = cols[2].max(cols[3]).max(cols[4]);
        match snaps.last_mut() {
            Some(s) if s.t == cols[0] => {
                s.r_max = s.r_max.max(cols[1]);
                s.peak = s.peak.max(peak);
            }
            _ => snaps.push(Snapshot {
                t: cols[0],
                r_max: cols[1],
                peak,
            }),
        }
    }
    if snaps.is_empty() {
        return Err(CliError::Input(format!("{} has no profile rows", path.display())));
    }
    Ok(snaps)
}

/// `F+C` level-0.5 front positions from `fronts.csv`, if present.
fn read_fronts(dir: &Path) -> Vec<(f64, f64)> {
    let Ok(text) = fs::read_to_string(dir.join("fronts.csv")) else {
        return Vec::new();
    };
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 || cols[1] != "F+C" || cols[2].parse::<f64>().ok()? != 0.5 {
                return None;
            }
            Some((cols[0].parse().ok()?, cols[3].parse().ok()?))
        })
        .collect()
}

/// Up to four snapshot indices, evenly spread and always including the last.
fn panel_indices(n: usize) -> Vec<usize> {
    if n <= MAX_PANELS {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (1..=MAX_PANELS).map(|k| k * (n - 1) / MAX_PANELS).collect();
    idx.dedup();
    idx
}

/// Builds the script text for `dir` without writing it.
pub fn plot_script(dir: &Path) -> Result<String> {
    let snaps = read_snapshots(dir)?;
    let fronts = read_fronts(dir);
    let panels = panel_indices(snaps.len());
    let r_max = snaps.iter().map(|s| s.r_max).fold(0.0, f64::max);
    let y_max = 1.05 * snaps.iter().map(|s| s.peak).fold(1.0, f64::max);

    let mut gp = String::new();
    let _ = writeln!(gp, "# profiles.csv columns: t,r,F,C,H");
    let _ = writeln!(gp, "# F solid, C heavy, H thin; dashed line marks the F+C = 0.5 front");
    let _ = writeln!(gp, "set datafile separator ','");
    let _ = writeln!(gp, "set terminal pngcairo size 1000,{}", 280 * panels.len());
    let _ = writeln!(gp, "set output '{IMAGE}'");
    let _ = writeln!(gp, "set multiplot layout {},1", panels.len());
    let _ = writeln!(gp, "set xrange [0:{r_max}]");
    let _ = writeln!(gp, "set yrange [0:{y_max:.4}]");
    let _ = writeln!(gp, "set xlabel 'r'");
    let _ = writeln!(gp, "set key top right");
    for &i in &panels {
        let t = snaps[i].t;
        let _ = writeln!(gp, "set title 't = {t}'");
        let _ = writeln!(gp, "unset arrow");
        let _ = writeln!(gp, "unset label");
        if let Some(&(_, x)) = fronts.iter().find(|(tf, _)| (tf - t).abs() < 1e-9) {
            let _ = writeln!(gp, "set arrow 1 from {x:.4},0 to {x:.4},{y_max:.4} nohead dashtype 2 lc rgb 'gray40'");
            let _ = writeln!(gp, "set label 1 'front r = {x:.1}' at {x:.4},{:.4} left offset 0.5,0", 0.9 * y_max);
            if x > 0.2 * r_max / MAX_PANELS as f64 {
                let _ = writeln!(gp, "set label 2 'final zone' at {:.4},{:.4} center", 0.5 * x, 0.97 * y_max);
                let _ = writeln!(
                    gp,
                    "set label 3 'leading edge' at {:.4},{:.4} left",
                    x + 0.02 * r_max,
                    0.6 * y_max
                );
            }
        }
        let sel = format!("(abs($1-({t:e}))<1e-9 ? $2 : 1/0)");
        let _ = writeln!(
            gp,
            "plot 'profiles.csv' skip 1 using {sel}:3 with lines lw 2 dt 1 lc rgb 'black' title 'F', \\"
        );
        let _ = writeln!(gp, "     '' skip 1 using {sel}:4 with lines lw 5 lc rgb 'black' title 'C', \\");
        let _ = writeln!(gp, "     '' skip 1 using {sel}:5 with lines lw 0.7 lc rgb 'black' title 'H'");
    }
    let _ = writeln!(gp, "unset multiplot");
    Ok(gp)
}

/// Writes `plot.gp` into `dir`; errors when `profiles.csv` is missing or empty.
pub fn write_plot_script(dir: &Path) -> Result<PathBuf> {
    let text = plot_script(dir)?;
    let path = dir.join(SCRIPT);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
