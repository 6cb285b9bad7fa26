use thiserror::Error;

pub type Result<T, E = CoagError> = std::result::Result<T, E>;

/// Which end of a finite grid an out-of-range condition was detected at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridEnd {
    Left,
    Right,
}

#[derive(Debug, Error)]
pub enum CoagError {
    #[error("moment-divergence: M_{order} is infinite under the declared extension")]
    MomentDivergence { order: usize },

    #[error("degenerate-density: {0}")]
    DegenerateDensity(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error("non-admissible transform: {0}")]
    NonAdmissible(String),

    #[error("characteristic-crossing near eta0 = {eta0:e}")]
    CharacteristicCrossing { eta0: f64 },

    #[error("dt-too-large: dt = {dt:e} exceeds stability limit {limit:e}")]
    DtTooLarge { dt: f64, limit: f64 },

    #[error("positivity-loss: value {value:e} in cell {cell}")]
    PositivityLoss { cell: usize, value: f64 },

    #[error("sup-not-bracketed: weighted ratio still increasing at the {end:?} end (eta = {eta:e})")]
    SupNotBracketed { end: GridEnd, eta: f64 },

    #[error("moment-mismatch: M_{order} differs ({lhs} vs {rhs})")]
    MomentMismatch { order: usize, lhs: f64, rhs: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("at tau = {tau}, kappa = {kappa}: {source}")]
    AtCheckpoint {
        tau: f64,
        kappa: f64,
        #[source]
        source: Box<CoagError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoagError {
    /// Attaches the offending (tau, kappa) to an error raised while building a report.
    pub fn at(self, tau: f64, kappa: f64) -> CoagError {
        CoagError::AtCheckpoint { tau, kappa, source: Box::new(self) }
    }
}
