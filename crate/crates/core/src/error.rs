use thiserror::Error;

/// Failures surfaced by the simulation and analysis pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("log-derivative matching is singular for l = {l} at p = {p}")]
    SingularMatching { l: usize, p: f64 },

    #[error("no interior time-delay peak for l = {l} in [{lo}, {hi}]")]
    NoPeak { l: usize, lo: f64, hi: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("momentum range [{lo}, {hi}] misses {outside:.3e} of the packet probability")]
    Coverage { lo: f64, hi: f64, outside: f64 },

    #[error("radius {r} lies outside the tabulated range [0, {r_max}]")]
    OutOfGrid { r: f64, r_max: f64 },

    #[error("norm {norm:.6} deviates from 1 by more than {tol:e}; enlarge the box (box_scale) or raise the quadrature orders")]
    Norm { norm: f64, tol: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
