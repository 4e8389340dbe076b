use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency system: {0}")]
    Frequency(String),

    #[error("resonant lattice point {index:?}: n·ω = {value:e}")]
    Resonance { index: Vec<i32>, value: f64 },

    #[error("dimension mismatch: expected ν = {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("field radius {field} exceeds truncation radius {limit}")]
    Radius { field: u32, limit: u32 },

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("under-resolved oscillatory kernel: h·λ_max = {h_lambda:.4} > π/4")]
    UnderResolved { h_lambda: f64 },

    #[error("t_end = {t_end:e} exceeds existence time {limit:e}")]
    BeyondExistence { t_end: f64, limit: f64 },

    #[error("Picard iteration did not converge after {kmax} iterates (last δ = {last_delta:e})")]
    NotConverged { kmax: usize, last_delta: f64 },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Tags an error with the run phase it came from.
    pub fn in_phase(self, phase: &'static str) -> Error {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
