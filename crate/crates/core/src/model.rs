//! Model parameters and the quantities derived from them.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parameters of the original (dimensional) model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// Diffusion coefficient of farmers `D`.
    pub diffusion_farmers: f64,
    /// Diffusion coefficient of hunter-gatherers `D_h`.
    pub diffusion_hunters: f64,
    /// Intrinsic growth rate of initial farmers `r_f`.
    pub growth_initial: f64,
    /// Intrinsic growth rate of converted farmers `r_c`.
    pub growth_converted: f64,
    /// Intrinsic growth rate of hunter-gatherers `r_h`.
    pub growth_hunters: f64,
    /// Carrying capacity of farmers `K`.
    pub capacity_farmers: f64,
    /// Carrying capacity of hunter-gatherers `L`.
    pub capacity_hunters: f64,
    /// Conversion rate `e`.
    pub conversion: f64,
}

/// Nondimensional coefficients `(a, b, s, g, d)` and the spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub g: f64,
    pub d: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedSpeeds {
    pub c_star: f64,
    pub c_star_star: f64,
    /// Exponential decay rate of the leading edge, `c*/2`.
    pub lambda_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoexistenceState {
    pub c: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConversionRate {
    /// `g >= 1`: hunter-gatherers are eventually all converted.
    High,
    /// `g < 1`: a coexistence state exists.
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FrontOrder {
    /// `a > 1 + s`: initial farmers set the speed.
    FarmersFast,
    /// `a < 1 + s`: converted farmers set the speed.
    FarmersSlow,
    /// `a = 1 + s`.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Regime {
    pub conversion: ConversionRate,
    pub front_order: FrontOrder,
    /// Which of the four observed waveform types (1..=4) this regime shows.
    pub waveform_figure: u8,
}

/// Coefficients `k` of the `k ln t` lag behind `c* t` for the front frames
/// in which the solution is known to stay nondegenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LogDrift {
    /// `a > 1 + s`: lower frame for `F + C` and the upper frame `(N+2)/(2λ*)`.
    FarmersFast { total_lower: f64, upper: f64 },
    /// `a < 1 + s`: frame for `C`.
    FarmersSlow { converted: f64 },
    /// `a = 1 + s`: frame for `F + C` and the (shorter) lower frame for `H`.
    Degenerate { total: f64, hunters_lower: f64 },
}

/// Which of the two sufficient conditions for coexistence in the final zone hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoexistenceCondition {
    /// `g < min{1,a} / (min{1,a} + s)`
    pub small_conversion: bool,
    /// `b d >= c* / (1 - g)`
    pub fast_hunters: bool,
}

impl CoexistenceCondition {
    pub fn holds(&self) -> bool {
        self.small_conversion || self.fast_hunters
    }
}

/// Spatially homogeneous steady states of the full reaction system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SteadyState {
    /// `(0, 0, 0)`
    Extinction,
    /// `(0, 0, 1)`
    HuntersOnly,
    /// The line `{F + C = 1, H = 0}` of neutral equilibria.
    FarmersLine,
    /// `(0, C*, H*)`, present only for `g < 1`.
    Coexistence(CoexistenceState),
}

impl SteadyState {
    pub fn stability_note(&self) -> &'static str {
        match self {
            SteadyState::Extinction | SteadyState::HuntersOnly => "always exists and unstable",
            SteadyState::FarmersLine => "line of neutral equilibria; stable if g >= 1",
            SteadyState::Coexistence(_) => "exists and is stable if and only if g < 1",
        }
    }

    /// A representative point `(F, C, H)`. For the farmers line, `theta ∈ [0, 1]`
    /// selects `F = 1 − theta, C = theta`; other states ignore it.
    pub fn point(&self, theta: f64) -> [f64; 3] {
        match *self {
            SteadyState::Extinction => [0.0, 0.0, 0.0],
            SteadyState::HuntersOnly => [0.0, 0.0, 1.0],
            SteadyState::FarmersLine => [1.0 - theta, theta, 0.0],
            SteadyState::Coexistence(cs) => [0.0, cs.c, cs.h],
        }
    }
}

pub fn nondimensionalize(p: &DimensionalParams, dim: usize) -> Result<ModelParams> {
    let fields = [
        ("D", p.diffusion_farmers),
        ("D_h", p.diffusion_hunters),
        ("r_f", p.growth_initial),
        ("r_c", p.growth_converted),
        ("r_h", p.growth_hunters),
        ("K", p.capacity_farmers),
        ("L", p.capacity_hunters),
        ("e", p.conversion),
    ];
    for (name, v) in fields {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::ParamDomain(format!("{name} must be positive, got {v}")));
        }
    }
    if p.diffusion_hunters < p.diffusion_farmers {
        return Err(Error::ParamDomain(format!(
            "D_h < D ({} < {}): hunter-gatherer diffusion must be at least the farmers'",
            p.diffusion_hunters, p.diffusion_farmers
        )));
    }
    ModelParams::new(
        p.growth_initial / p.growth_converted,
        p.growth_hunters / p.growth_converted,
        p.conversion * p.capacity_hunters / p.growth_converted,
        p.conversion * p.capacity_farmers / p.growth_hunters,
        p.diffusion_hunters / p.diffusion_farmers,
        dim,
    )
}

/// Reaction part of the full system at a point `(F, C, H)`.
pub fn reaction(m: &ModelParams, f: f64, c: f64, h: f64) -> [f64; 3] {
    let free = 1.0 - f - c;
    [
        m.a * f * free,
        c * free + m.s * h * (f + c),
        m.b * h * (1.0 - h - m.g * (f + c)),
    ]
}

impl ModelParams {
    pub fn new(a: f64, b: f64, s: f64, g: f64, d: f64, dim: usize) -> Result<Self> {
        let m = Self { a, b, s, g, d, dim };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("s", self.s), ("g", self.g)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ParamDomain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.d >= 1.0 && self.d.is_finite()) {
            return Err(Error::ParamDomain(format!("d must satisfy d >= 1, got {}", self.d)));
        }
        if self.dim == 0 {
            return Err(Error::ParamDomain("spatial dimension must be at least 1".into()));
        }
        Ok(())
    }

    pub fn spreading_speeds(&self) -> DerivedSpeeds {
        let farmers = 2.0 * self.a.sqrt();
        let converted = 2.0 * (1.0 + self.s).sqrt();
        let c_star = farmers.max(converted);
        DerivedSpeeds {
            c_star,
            c_star_star: farmers.min(converted),
            lambda_star: c_star / 2.0,
        }
    }

    pub fn coexistence_state(&self) -> Option<CoexistenceState> {
        if self.g < 1.0 {
            let denom = 1.0 + self.s * self.g;
            Some(CoexistenceState {
                c: (1.0 + self.s) / denom,
                h: (1.0 - self.g) / denom,
            })
        } else {
            None
        }
    }

    pub fn steady_states(&self) -> Vec<SteadyState> {
        let mut states = vec![
            SteadyState::Extinction,
            SteadyState::HuntersOnly,
            SteadyState::FarmersLine,
        ];
        if let Some(cs) = self.coexistence_state() {
            states.push(SteadyState::Coexistence(cs));
        }
        states
    }

    /// Boundary values are compared exactly: `a == 1 + s` is `Degenerate` and
    /// shares the waveform type of the `a < 1 + s` column, `g == 1` is `High`.
    pub fn classify_regime(&self) -> Regime {
        let conversion = if self.g >= 1.0 {
            ConversionRate::High
        } else {
            ConversionRate::Low
        };
        let threshold = 1.0 + self.s;
        let front_order = if self.a > threshold {
            FrontOrder::FarmersFast
        } else if self.a < threshold {
            FrontOrder::FarmersSlow
        } else {
            FrontOrder::Degenerate
        };
        let waveform_figure = match (conversion, front_order) {
            (ConversionRate::High, FrontOrder::FarmersFast) => 1,
            (ConversionRate::High, _) => 2,
            (ConversionRate::Low, FrontOrder::FarmersFast) => 3,
            (ConversionRate::Low, _) => 4,
        };
        Regime {
            conversion,
            front_order,
            waveform_figure,
        }
    }

    pub fn log_drift_coefficient(&self) -> LogDrift {
        let speeds = self.spreading_speeds();
        let c_star = speeds.c_star;
        let n = self.dim as f64;
        match self.classify_regime().front_order {
            FrontOrder::FarmersFast => LogDrift::FarmersFast {
                total_lower: (n + 2.0) * c_star / self.a.min(1.0),
                upper: (n + 2.0) / (2.0 * speeds.lambda_star),
            },
            FrontOrder::FarmersSlow => LogDrift::FarmersSlow {
                converted: (n + 2.0) / c_star,
            },
            FrontOrder::Degenerate => LogDrift::Degenerate {
                total: (n + 2.0) / c_star,
                hunters_lower: n / c_star,
            },
        }
    }

    pub fn coexistence_sufficient_condition(&self) -> Result<CoexistenceCondition> {
        if self.g >= 1.0 {
            return Err(Error::ParamDomain(format!(
                "coexistence conditions require g < 1, got g = {}",
                self.g
            )));
        }
        let low = self.a.min(1.0);
        let c_star = self.spreading_speeds().c_star;
        Ok(CoexistenceCondition {
            small_conversion: self.g < low / (low + self.s),
            fast_hunters: self.b * self.d >= c_star / (1.0 - self.g),
        })
    }

    /// Upper bound `(max{1,a} + s) / min{1,a}` that `F + C` relaxes below.
    pub fn total_farmer_bound(&self) -> f64 {
        (self.a.max(1.0) + self.s) / self.a.min(1.0)
    }
}
