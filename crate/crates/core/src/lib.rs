//! Radially-symmetric simulator and verification harness for the
//! three-component farmer/hunter-gatherer reaction-diffusion system
//!
//! ```text
//! ∂t F = ΔF + aF(1 − F − C)
//! ∂t C = ΔC + C(1 − F − C) + sH(F + C)
//! ∂t H = dΔH + bH(1 − H − g(F + C))
//! ```
//!
//! Modules:
//! - [`model`]: parameters, spreading speeds, equilibria and regime map
//! - [`radial`]: explicit radial finite-difference solver with invariant audits
//! - [`fronts`]: level-set tracking, speed and logarithmic-drift fits, zone statistics
//! - [`ode`]: the spatially homogeneous (C, H) subsystem and its Lyapunov function
//! - [`spectral`]: weighted-Hermite operator and the linear drift equation in a moving frame
//! - [`envelope`]: closed-form super/sub-solutions and pointwise envelope audits
//! - [`criteria`]: the reference verification suite built from the modules above

pub mod criteria;
pub mod envelope;
mod error;
pub mod fronts;
pub mod model;
pub mod ode;
pub mod radial;
pub mod spectral;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use radial::{FieldState, RadialGrid, SimConfig, SimulationResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
