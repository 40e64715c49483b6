use thiserror::Error;

/// Everything that can go wrong while building, solving or analysing a trap lattice.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate lattice: |a1 x a2| = {cross:e} is below 1e-12")]
    DegenerateLattice { cross: f64 },

    #[error("invalid patch resolution: {0}")]
    InvalidResolution(String),

    #[error("patch index {index} out of range for {count} patches")]
    PatchIndex { index: usize, count: usize },

    #[error("mode cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),

    #[error("coefficient table needs {entries} entries, budget is {limit}")]
    MemoryBudget { entries: usize, limit: usize },

    #[error("field evaluation requires z > 0, got z = {z}")]
    BelowPlane { z: f64 },

    #[error("amplitude vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("no traps specified")]
    EmptyTraps,

    #[error("trap '{label}' duplicates the position of trap '{other}'")]
    DuplicateTrap { label: String, other: String },

    #[error("trap '{label}': curvature tensor is not traceless (trace {trace:e})")]
    NonTraceless { label: String, trace: f64 },

    #[error("trap '{label}': curvature tensor is not symmetric")]
    NonSymmetric { label: String },

    #[error("trap '{label}': height must be positive, got {z}")]
    InvalidHeight { label: String, z: f64 },

    #[error("all target curvatures vanish; the scale C is undefined")]
    ZeroTarget,

    #[error("frequency ratios {ratios:?} admit no traceless curvature tensor")]
    InfeasibleRatios { ratios: [f64; 3] },

    #[error("invalid frequency specification: {0}")]
    InvalidFrequencies(String),

    #[error("suppression point coincides with trap '{label}'")]
    PointAtTrap { label: String },

    #[error("constraints only admit C = 0 (rows involved: {rows:?})")]
    Infeasible { rows: Vec<usize> },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("{what} exceeds the configured limit ({size} > {limit})")]
    TooLarge { what: &'static str, size: usize, limit: usize },

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("map file error at line {line}: {message}")]
    MapFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateLattice { .. } => "degenerate_lattice",
            Error::InvalidResolution(_) => "invalid_resolution",
            Error::PatchIndex { .. } => "patch_index",
            Error::InvalidCutoff(_) => "invalid_cutoff",
            Error::MemoryBudget { .. } => "memory_budget",
            Error::BelowPlane { .. } => "below_plane",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::EmptyTraps => "empty_traps",
            Error::DuplicateTrap { .. } => "duplicate_trap",
            Error::NonTraceless { .. } => "non_traceless",
            Error::NonSymmetric { .. } => "non_symmetric",
            Error::InvalidHeight { .. } => "invalid_height",
            Error::ZeroTarget => "zero_target",
            Error::InfeasibleRatios { .. } => "infeasible_ratios",
            Error::InvalidFrequencies(_) => "invalid_frequencies",
            Error::PointAtTrap { .. } => "point_at_trap",
            Error::Infeasible { .. } => "infeasible",
            Error::Unbounded => "unbounded",
            Error::Solver(_) => "solver_failure",
            Error::TooLarge { .. } => "too_large",
            Error::Config { .. } => "config",
            Error::MapFormat { .. } => "map_format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
