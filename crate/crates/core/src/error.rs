use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain error: {0}")]
    ParamDomain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("instability at t = {t}: non-finite {field} at node {node}")]
    Instability { t: f64, node: usize, field: &'static str },

    #[error("front reached the far boundary at t = {t} (position {position}, limit {limit})")]
    FrontReachedBoundary { t: f64, position: f64, limit: f64 },

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("zone contains no grid nodes: {0}")]
    EmptyZone(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ODE trajectory diverged at t = {t}: (C, H) = ({c}, {h})")]
    Divergence { t: f64, c: f64, h: f64 },

    #[error("state outside the domain: {0}")]
    Domain(String),
}
