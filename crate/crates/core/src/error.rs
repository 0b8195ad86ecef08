use thiserror::Error;

use crate::integrate::SolverStats;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `Δ² + κ²/4` vanishes, so the cavity has no steady state.
    #[error("degenerate cavity denominator: kappa and delta are both zero")]
    DegenerateDenominator,

    #[error("no real coupling reproduces gamma = {gamma} at delta = {delta}, kappa = {kappa}")]
    UnsolvableSign { gamma: f64, delta: f64, kappa: f64 },

    #[error("stable solitons require attractive interaction, got g = {0}")]
    RepulsiveInteraction(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("soliton width {width} fell below the floor {floor}")]
    WidthCollapse { width: f64, floor: f64 },

    #[error("step size underflow at t = {t} (h = {h}); {stats}")]
    StepUnderflow { t: f64, h: f64, stats: SolverStats },

    #[error("maximum number of steps exceeded at t = {t}; {stats}")]
    MaxSteps { t: f64, stats: SolverStats },

    #[error("right-hand side failed at t = {t}: {source}")]
    Rhs {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("field has no dominant peak (peak/median = {ratio:.3})")]
    NoPeak { ratio: f64 },

    #[error("incompatible domains: {0}")]
    IncompatibleDomains(String),

    #[error("time span {span} shorter than window {window}")]
    SpanTooShort { span: f64, window: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::WidthCollapse { .. }
            | Error::StepUnderflow { .. }
            | Error::MaxSteps { .. }
            | Error::NoPeak { .. }
            | Error::SpanTooShort { .. }
            | Error::Rhs { .. } => true,
            _ => false,
        }
    }
}
