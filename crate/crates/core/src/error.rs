use thiserror::Error;

/// Errors raised across the library.
///
/// Every variant has a stable machine-readable name (see [`Error::name`]) and
/// the module it originates from (see [`Error::module`]); the command line
/// front-end reports both verbatim.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("grid too coarse: points_per_axis must be even and at least 8, got {0}")]
    GridTooCoarse(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("axis {axis} out of range for a grid with {dim} axes")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("density must be positive everywhere (found {value} at point {point})")]
    BadDensity { point: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("frame index {index} out of range for half dimension {n}")]
    FrameIndexOutOfRange { index: usize, n: usize },
    #[error("frame is degenerate at point {point}")]
    FrameDegenerate { point: usize },
    #[error("almost complex structure check failed at point {point}: {detail}")]
    StructureViolation { point: usize, detail: String },
    #[error("unsupported form degree {0}")]
    UnsupportedDegree(usize),
    #[error("form degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("twist amplitude must satisfy 0 <= eps < 1, got {0}")]
    TwistOutOfRange(f64),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("tilted metric not positive: eigenvalue {eigenvalue:.3e} at point {point}")]
    NotPositive { point: usize, eigenvalue: f64 },
    #[error("kernel vector of the adjoint changes sign (min {min:.3e}, max {max:.3e})")]
    KernelSignChange { min: f64, max: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("right-hand side violates the compatibility condition (defect {defect:.3e} > tol {tol:.3e})")]
    Incompatible { defect: f64, tol: f64 },
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    LinearNoConvergence { iterations: usize, residual: f64 },
    #[error("continuity path stalled at t = {t} (step {step:.3e} below minimum)")]
    PathStalled { t: f64, step: f64 },
    #[error("parabolic flow did not converge after {steps} steps (sup |dphi/dt| = {rate:.3e})")]
    FlowNoConvergence { steps: usize, rate: f64 },
    #[error("top eigenvalue is not simple (gap {gap:.3e} < {gap_min:.3e})")]
    DegenerateTopEigenvalue { gap: f64, gap_min: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NonPsd(f64),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("field dump: {0}")]
    Dump(String),
}

impl Error {
    /// Stable machine-readable error name.
    pub fn name(&self) -> &'static str {
        match self {
            Error::GridTooCoarse(_) => "GridTooCoarse",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::AxisOutOfRange { .. } => "AxisOutOfRange",
            Error::BadDensity { .. } => "BadDensity",
            Error::GridMismatch => "GridMismatch",
            Error::FrameIndexOutOfRange { .. } => "FrameIndexOutOfRange",
            Error::FrameDegenerate { .. } => "FrameDegenerate",
            Error::StructureViolation { .. } => "StructureViolation",
            Error::UnsupportedDegree(_) => "UnsupportedDegree",
            Error::DegreeMismatch { .. } => "DegreeMismatch",
            Error::TwistOutOfRange(_) => "TwistOutOfRange",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::NotPositive { .. } => "NotPositive",
            Error::KernelSignChange { .. } => "KernelSignChange",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::Incompatible { .. } => "Incompatible",
            Error::LinearNoConvergence { .. } => "LinearNoConvergence",
            Error::PathStalled { .. } => "PathStalled",
            Error::FlowNoConvergence { .. } => "FlowNoConvergence",
            Error::DegenerateTopEigenvalue { .. } => "DegenerateTopEigenvalue",
            Error::NonPsd(_) => "NonPsd",
            Error::InvalidOptions(_) => "InvalidOptions",
            Error::Dump(_) => "Dump",
        }
    }

    /// Module that raises this error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::GridTooCoarse(_)
            | Error::InvalidGrid(_)
            | Error::AxisOutOfRange { .. }
            | Error::BadDensity { .. }
            | Error::GridMismatch
            | Error::Dump(_) => "grid",
            Error::FrameIndexOutOfRange { .. }
            | Error::FrameDegenerate { .. }
            | Error::StructureViolation { .. }
            | Error::UnsupportedDegree(_)
            | Error::DegreeMismatch { .. } => "acx_calculus",
            Error::TwistOutOfRange(_) | Error::InvalidGeometry(_) => "geometries",
            Error::NotPositive { .. } => "operators",
            Error::KernelSignChange { .. }
            | Error::NoConvergence { .. }
            | Error::Incompatible { .. } => "gauduchon",
            Error::LinearNoConvergence { .. }
            | Error::PathStalled { .. }
            | Error::FlowNoConvergence { .. }
            | Error::InvalidOptions(_) => "ma_solver",
            Error::DegenerateTopEigenvalue { .. } | Error::NonPsd(_) => "verify",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
