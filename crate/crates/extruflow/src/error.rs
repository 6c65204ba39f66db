//! Crate-wide error types.
//!
//! Each subsystem keeps its own enum so callers can match on the failure
//! class they care about; [`Error`] aggregates them for the CLI layer.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GcodeError {
    #[error("line {line}: malformed {word} token '{token}'")]
    MalformedToken { line: usize, word: char, token: String },
    #[error("line {line}: unsupported feature {feature} ({detail})")]
    Unsupported { line: usize, feature: String, detail: String },
    #[error("line {line}: arc move {word} rejected; only linear segments are supported")]
    ArcMove { line: usize, word: String },
    #[error("line {line}: non-finite coordinate")]
    NonFinite { line: usize },
    #[error("line {line}: feedrate must be strictly positive, got {value}")]
    BadFeedrate { line: usize, value: f64 },
    #[error("controls/segment length mismatch: {controls} controls for {segments} segments")]
    LengthMismatch { controls: usize, segments: usize },
    #[error("refusing to emit non-finite value in field {field}")]
    NonFiniteEmit { field: &'static str },
}

#[derive(Debug, Error)]
pub enum PathError {
    #[error("discretization step must be positive, got {0}")]
    BadStep(f64),
    #[error("toolpath has no print moves")]
    NoPrintMoves,
    #[error("corner angle threshold must lie in (0, 180) degrees, got {0}")]
    BadAngleThreshold(f64),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid extrusion model: {0}")]
    InvalidExtrusionModel(String),
    #[error("invalid corner model: {0}")]
    InvalidCornerModel(String),
    #[error("step {delta_s} mm is not below the spatial time constant {tau} mm ({which}); the explicit discretization is unstable")]
    UnstableStep { delta_s: f64, tau: f64, which: &'static str },
    #[error("width profile must have strictly increasing x (violated at sample {index})")]
    NonMonotonicProfile { index: usize },
    #[error("width profile contains negative width at sample {index}")]
    NegativeWidth { index: usize },
    #[error("deceleration width is singular at x >= d_tr = {d_tr} mm (got x = {x} mm)")]
    DecelDomain { x: f64, d_tr: f64 },
    #[error("acceleration width is singular at x = 0 (domain is 0 < x <= d_tr = {d_tr} mm, got {x} mm)")]
    AccelDomain { x: f64, d_tr: f64 },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("tracking horizon is empty")]
    EmptyHorizon,
    #[error("invalid control bounds: min {min} must be below max {max}")]
    BadBounds { min: f64, max: f64 },
    #[error("initial width must be nonnegative and finite, got {0}")]
    BadInitialWidth(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver failed to certify optimality: KKT residual {kkt} after {iterations} iterations")]
    NotConverged { kkt: f64, iterations: usize },
}

#[derive(Debug, Error)]
pub enum IdError {
    #[error("insufficient data: need at least {need} samples, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("no step transition detected (profile stays within 3 sigma of the initial level)")]
    NoTransition,
    #[error("step fit failed: {reason} (residual rmse {residual_rmse} mm)")]
    FitQuality { reason: String, residual_rmse: f64 },
    #[error("corner profile {index} does not increase toward its apex after segmentation")]
    NotMonotonicTowardApex { index: usize },
    #[error("corner fit needs {need} profiles, got {got}")]
    WrongProfileCount { need: usize, got: usize },
    #[error("invalid calibration geometry: {0}")]
    BadGeometry(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("need at least 4 point correspondences, got {0}")]
    NotEnoughPoints(usize),
    #[error("degenerate correspondence configuration (3 or more collinear points)")]
    Degenerate,
    #[error("homography matrix is singular")]
    Singular,
    #[error("checkerboard detection found {found} corners, expected {expected}; supply an external corner file to bypass detection")]
    CornerCount { found: usize, expected: usize },
    #[error("checkerboard grid ordering failed: {0}")]
    GridOrdering(String),
    #[error("clustering needs at least {need} distinct samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("EM produced a non-finite log-likelihood at iteration {iteration} (trace: {trace:?})")]
    NonFiniteLikelihood { iteration: usize, trace: Vec<f64> },
    #[error("segmentation mask contains no bead pixels")]
    NoBead,
    #[error("image decode/encode failed: {0}")]
    Image(String),
    #[error("invalid image data: {0}")]
    BadImage(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Top-level error for the pipeline and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Gcode(#[from] GcodeError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Id(#[from] IdError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
