use thiserror::Error;

/// Failure modes shared by every module of the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("modulus out of domain: Im B = {im_b} is below the configured minimum {min}")]
    ModulusOutOfDomain { im_b: f64, min: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("argument {0} lies within the exclusion radius of a lattice point")]
    LatticePoint(String),
    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("zeros closer than merge tolerance: distance {distance:e}")]
    NonSimpleZero { distance: f64 },
    #[error("zero count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("path passes within {distance:e} of a divisor point (clearance {clearance:e})")]
    ClearanceViolation { distance: f64, clearance: f64 },
    #[error("distinguished jet unstable: spread {spread:e} exceeds {tol:e}")]
    JetUnstable { spread: f64, tol: f64 },
    #[error("coordinate dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coincident points")]
    CoincidentPoints,
    #[error("tau constancy violated: spread {spread:e} exceeds {tol:e}")]
    ConstancyViolation { spread: f64, tol: f64 },
    #[error("ill-conditioned jacobian: condition number {0:e}")]
    IllConditioned(f64),
    #[error("variational mismatch: max discrepancy {max_discrepancy:e} exceeds {tol:e}")]
    VariationalMismatch { max_discrepancy: f64, tol: f64 },
    #[error("mesh quality failure: {0}")]
    MeshQualityFailure(String),
    #[error("eigensolver did not converge: {0}")]
    SolverNonConvergence(String),
    #[error("matching conditions violated: jump {0:e}")]
    MatchingFailure(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
