//! Level-set tracking and the statistics built on it: speed estimates,
//! logarithmic drift fits, zone extrema and the trailing farmer peak.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::radial::{FieldState, RadialGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    F,
    C,
    H,
    #[serde(rename = "F+C")]
    FC,
}

impl Field {
    pub const ALL: [Field; 4] = [Field::F, Field::C, Field::H, Field::FC];

    pub fn name(&self) -> &'static str {
        match self {
            Field::F => "F",
            Field::C => "C",
            Field::H => "H",
            Field::FC => "F+C",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(Field::F),
            "C" => Ok(Field::C),
            "H" => Ok(Field::H),
            "F+C" | "FC" => Ok(Field::FC),
            other => Err(Error::Config(format!("unknown field {other:?} (expected F, C, H or F+C)"))),
        }
    }
}

/// Rightmost crossing of level `m`, linearly interpolated between nodes.
///
/// A crossing is a cell where `u ≥ m` holds at one end only; for a profile
/// that decreases through `m` this is the last `i` with `u_i ≥ m > u_{i+1}`.
pub fn level_set_position(profile: &[f64], dr: f64, m: f64) -> Option<f64> {
    let i = profile
        .windows(2)
        .rposition(|w| (w[0] >= m) != (w[1] >= m))?;
    let (left, right) = (profile[i], profile[i + 1]);
    let frac = (left - m) / (left - right);
    Some((i as f64 + frac) * dr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontRecord {
    pub t: f64,
    pub field: Field,
    pub level: f64,
    pub position: Option<f64>,
}

/// Level-set positions of every field at every recorded snapshot.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrontSeries {
    pub levels: Vec<f64>,
    pub records: Vec<FrontRecord>,
}

impl FrontSeries {
    pub fn new(levels: Vec<f64>) -> Self {
        Self {
            levels,
            records: Vec::new(),
        }
    }

    pub fn from_states<'a>(
        levels: Vec<f64>,
        states: impl IntoIterator<Item = &'a FieldState>,
        grid: &RadialGrid,
    ) -> Self {
        let mut series = Self::new(levels);
        for s in states {
            series.record(s, grid);
        }
        series
    }

    pub fn record(&mut self, state: &FieldState, grid: &RadialGrid) {
        for field in Field::ALL {
            let profile = state.field(field);
            for &level in &self.levels {
                self.records.push(FrontRecord {
                    t: state.t,
                    field,
                    level,
                    position: level_set_position(&profile, grid.dr, level),
                });
            }
        }
    }

    /// Time series of one front, absent positions included.
    pub fn track(&self, field: Field, level: f64) -> Vec<(f64, Option<f64>)> {
        self.records
            .iter()
            .filter(|r| r.field == field && r.level == level)
            .map(|r| (r.t, r.position))
            .collect()
    }

    /// Present samples with `t` inside the closed window.
    pub fn samples(&self, field: Field, level: f64, window: (f64, f64)) -> Vec<(f64, f64)> {
        self.track(field, level)
            .into_iter()
            .filter(|&(t, _)| t >= window.0 - 1e-9 && t <= window.1 + 1e-9)
            .filter_map(|(t, x)| x.map(|x| (t, x)))
            .collect()
    }

    pub fn t_last(&self) -> Option<f64> {
        self.records.iter().map(|r| r.t).reduce(f64::max)
    }

    /// Synthetic series for a single front, mostly useful for fitting.
    pub fn from_samples(field: Field, level: f64, samples: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self {
            levels: vec![level],
            records: samples
                .into_iter()
                .map(|(t, x)| FrontRecord {
                    t,
                    field,
                    level,
                    position: Some(x),
                })
                .collect(),
        }
    }
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LineFit {
    slope: f64,
    intercept: f64,
    slope_stderr: f64,
    residual_rms: f64,
}

fn fit_line(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let slope_stderr = if points.len() > 2 && sxx > 0.0 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit {
        slope,
        intercept,
        slope_stderr,
        residual_rms: (ssr / n).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub c_hat: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

pub const MIN_SPEED_SAMPLES: usize = 10;
pub const MIN_DRIFT_SAMPLES: usize = 20;
/// Samples before this time are excluded from drift fits (`ln t` must be meaningful).
pub const DRIFT_T_MIN: f64 = 10.0;

/// Least-squares slope of `x_m(t)` over the window.
pub fn speed_estimate(series: &FrontSeries, field: Field, level: f64, window: (f64, f64)) -> Result<SpeedEstimate> {
    let pts = series.samples(field, level, window);
    if pts.len() < MIN_SPEED_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SPEED_SAMPLES,
            got: pts.len(),
        });
    }
    let fit = fit_line(&pts);
    Ok(SpeedEstimate {
        c_hat: fit.slope,
        stderr: fit.slope_stderr,
        intercept: fit.intercept,
        residual_rms: fit.residual_rms,
        samples: pts.len(),
        window,
    })
}

/// Front frame `x_m(t) ≈ c_hat·t − k_hat·ln t − b_hat` with `c_hat` held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub c_hat: f64,
    pub k_hat: f64,
    pub b_hat: f64,
    pub residual_rms: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

/// Fits `c_star·t − x_m(t) ≈ k·ln t + b` by least squares.
///
/// `window` defaults to the last half of the recorded run.
pub fn drift_fit(
    series: &FrontSeries,
    field: Field,
    level: f64,
    c_star: f64,
    window: Option<(f64, f64)>,
) -> Result<DriftFit> {
    let window = match window {
        Some(w) => w,
        None => {
            let t_last = series.t_last().unwrap_or(0.0);
            (0.5 * t_last, t_last)
        }
    };
    let pts: Vec<(f64, f64)> = series
        .samples(field, level, window)
        .into_iter()
        .filter(|&(t, _)| t >= DRIFT_T_MIN)
        .map(|(t, x)| (t.ln(), c_star * t - x))
        .collect();
    if pts.len() < MIN_DRIFT_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_DRIFT_SAMPLES,
            got: pts.len(),
        });
    }
    let fit = fit_line(&pts);
    Ok(DriftFit {
        c_hat: c_star,
        k_hat: fit.slope,
        b_hat: fit.intercept,
        residual_rms: fit.residual_rms,
        samples: pts.len(),
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Zone {
    /// `r ≤ c·t`
    Ball { c: f64 },
    /// `c1·t ≤ r ≤ c2·t`
    Annulus { c1: f64, c2: f64 },
    /// `r ≥ c·t`
    Exterior { c: f64 },
}

impl Zone {
    pub fn contains(&self, t: f64, r: f64) -> bool {
        const SLACK: f64 = 1e-9;
        match *self {
            Zone::Ball { c } => r <= c * t + SLACK,
            Zone::Annulus { c1, c2 } => r >= c1 * t - SLACK && r <= c2 * t + SLACK,
            Zone::Exterior { c } => r >= c * t - SLACK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub inf: f64,
    pub sup: f64,
}

impl Extrema {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        values.fold(
            Extrema {
                inf: f64::INFINITY,
                sup: f64::NEG_INFINITY,
            },
            |e, v| Extrema {
                inf: e.inf.min(v),
                sup: e.sup.max(v),
            },
        )
    }

    /// Largest distance of any value in the range from `target`.
    pub fn max_deviation(&self, target: f64) -> f64 {
        (self.sup - target).abs().max((self.inf - target).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneStats {
    pub t: f64,
    pub zone: Zone,
    pub nodes: usize,
    pub f: Extrema,
    pub c: Extrema,
    pub h: Extrema,
    pub fc: Extrema,
}

impl ZoneStats {
    pub fn get(&self, field: Field) -> Extrema {
        match field {
            Field::F => self.f,
            Field::C => self.c,
            Field::H => self.h,
            Field::FC => self.fc,
        }
    }
}

pub fn zone_stats(state: &FieldState, grid: &RadialGrid, zone: Zone) -> Result<ZoneStats> {
    let idx: Vec<usize> = (0..state.len()).filter(|&i| zone.contains(state.t, grid.r(i))).collect();
    if idx.is_empty() {
        return Err(Error::EmptyZone(format!("{zone:?} at t = {}", state.t)));
    }
    let pick = |v: &[f64]| Extrema::of(idx.iter().map(|&i| v[i]));
    Ok(ZoneStats {
        t: state.t,
        zone,
        nodes: idx.len(),
        f: pick(&state.f),
        c: pick(&state.c),
        h: pick(&state.h),
        fc: Extrema::of(idx.iter().map(|&i| state.f[i] + state.c[i])),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub value: f64,
    pub location: f64,
}

/// Maximum of `F` over `r ≥ 0.8·front_position`; the first maximizing node wins.
pub fn peak_detect(profile_f: &[f64], dr: f64, front_position: f64) -> Peak {
    let start = ((0.8 * front_position / dr) - 1e-9).ceil().max(0.0) as usize;
    let start = start.min(profile_f.len().saturating_sub(1));
    let mut best = Peak {
        value: profile_f[start],
        location: start as f64 * dr,
    };
    for (i, &v) in profile_f.iter().enumerate().skip(start + 1) {
        if v > best.value {
            best = Peak {
                value: v,
                location: i as f64 * dr,
            };
        }
    }
    best
}

/// True when the present positions never decrease for `t ≥ t_from`.
pub fn is_nondecreasing_after(track: &[(f64, Option<f64>)], t_from: f64) -> bool {
    let xs: Vec<f64> = track
        .iter()
        .filter(|(t, _)| *t >= t_from)
        .filter_map(|(_, x)| *x)
        .collect();
    xs.windows(2).all(|w| w[1] >= w[0])
}
