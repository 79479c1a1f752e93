use std::fmt;

/// Pipeline stage an error originated from; used by the CLI to label failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Potential,
    Profile,
    Field,
    Solve,
    Blowdown,
    Stress,
    Fit,
    Spectral,
    Config,
    Io,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Potential => "potential",
            Stage::Profile => "profile",
            Stage::Field => "field",
            Stage::Solve => "solve",
            Stage::Blowdown => "blowdown",
            Stage::Stress => "stress",
            Stage::Fit => "fit",
            Stage::Spectral => "spectral",
            Stage::Config => "config",
            Stage::Io => "io",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("value {value} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("invalid potential: {0}")]
    Potential(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inconsistent results: {0}")]
    Inconsistent(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e}): {context}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        context: String,
    },

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate field: {0}")]
    Degenerate(String),

    #[error("nodal set is not a union of graphs: column x = {x} has {found} crossings, expected {expected}")]
    Topology { x: f64, found: usize, expected: usize },

    #[error("field is not close enough to a solution: curl defect {defect:.3e} exceeds {limit:.3e}")]
    Stationarity { defect: f64, limit: f64 },

    #[error("sublevel set reaches the domain boundary; enlarge the domain or lower the level")]
    EnlargeDomain,

    #[error("fit left the basin of attraction: {0}")]
    OutOfBasin(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
