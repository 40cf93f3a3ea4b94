use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(&'static str),
    #[error("fields live on different lattices")]
    LatticeMismatch,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("derivative direction {0} outside 1..=3")]
    InvalidDirection(usize),
    #[error("bidegree ({p},{q}) exceeds (3,3)")]
    BidegreeOverflow { p: usize, q: usize },
    #[error("expected bidegree ({p},{q})")]
    WrongBidegree { p: usize, q: usize },
    #[error("form is not real (defect {defect:.3e})")]
    NotReal { defect: f64 },
    #[error("form is not closed (defect {defect:.3e})")]
    NotClosed { defect: f64 },
    #[error("not positive: minimal eigenvalue {min_eigenvalue:.6e} at site {site}")]
    NotPositive { min_eigenvalue: f64, site: usize },
    #[error("singular matrix at site {site}")]
    Singular { site: usize },
    #[error("endomorphism is not self-adjoint (defect {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },
    #[error("right-hand side outside the operator range (kernel defect {defect:.3e})")]
    OutOfRange { defect: f64 },
    #[error("operator requires a constant background metric")]
    NonConstantBackground,
    #[error("input carries a constant Fourier mode (size {size:.3e})")]
    ConstantMode { size: f64 },
    #[error("bundle rank {0} outside 1..=4")]
    InvalidRank(usize),
    #[error("two routes disagree by {mismatch:.3e}")]
    RouteMismatch { mismatch: f64 },
    #[error("alpha' must be nonzero")]
    ZeroAlpha,
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NewtonStalled { iterations: usize, residual: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
