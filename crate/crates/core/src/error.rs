use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The focusing exponent sits at or below the mass-critical value 2/d.
    #[error("sigma1 = {sigma1} is not mass-supercritical in d = {d} (need sigma1 > {critical}, s_c = {s_c})")]
    NotSupercritical {
        d: usize,
        sigma1: f64,
        critical: f64,
        s_c: f64,
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite sample at node {index} (r = {r})")]
    NonFinite { index: usize, r: f64 },

    #[error("shooting bracket failure: bracket [{lo}, {hi}] ({reason})")]
    ShootingBracket { lo: f64, hi: f64, reason: String },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Newton divergence in P_b continuation at b = {b} (step {step}, residual {residual:.3e})")]
    ContinuationFailed { b: f64, step: usize, residual: f64 },

    #[error("loss of positivity for P_b at b = {b}: {detail}")]
    PositivityLoss { b: f64, detail: String },

    #[error("singular linear system ({context})")]
    Singular { context: String },

    #[error("near-singular linear system ({context}); smallest singular value {sigma_min:.3e}")]
    NearSingular { context: String, sigma_min: f64 },

    #[error("solvability condition failed: {0}")]
    Solvability(String),

    #[error("radiation plateau missing: {0}")]
    MissingPlateau(String),

    #[error("localization radius A = {a} too small, need A >= {required}")]
    RadiusTooSmall { a: f64, required: f64 },

    #[error("incomplete b-ladder: {0}")]
    IncompleteLadder(String),

    #[error("b = {b} outside the profile ladder [{lo}, {hi}]")]
    OutsideLadder { b: f64, lo: f64, hi: f64 },

    #[error("insufficient samples: have {have}, need {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("blow-up suspected at step {step} (t = {t}): {detail}")]
    BlowupSuspected { step: usize, t: f64, detail: String },

    #[error("config file not found: {0}")]
    ConfigNotFound(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable identifier used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::NotSupercritical { .. } => "not-supercritical",
            Error::GridMismatch => "grid-mismatch",
            Error::NonFinite { .. } => "non-finite",
            Error::ShootingBracket { .. } => "shooting-bracket",
            Error::NoConvergence { .. } => "no-convergence",
            Error::ContinuationFailed { .. } => "continuation-failed",
            Error::PositivityLoss { .. } => "positivity-loss",
            Error::Singular { .. } => "singular",
            Error::NearSingular { .. } => "near-singular",
            Error::Solvability(_) => "solvability",
            Error::MissingPlateau(_) => "missing-plateau",
            Error::RadiusTooSmall { .. } => "radius-too-small",
            Error::IncompleteLadder(_) => "incomplete-ladder",
            Error::OutsideLadder { .. } => "outside-ladder",
            Error::InsufficientSamples { .. } => "insufficient-samples",
            Error::BlowupSuspected { .. } => "blowup-suspected",
            Error::ConfigNotFound(_) => "config-not-found",
            Error::Config(_) => "config-invalid",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Config problems map to exit code 2, everything else to 1.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::ConfigNotFound(_) | Error::Config(_))
    }
}
