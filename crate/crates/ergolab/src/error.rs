use thiserror::Error;

/// Errors shared across the function-space, operator and averaging layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("evaluation point {x} is not on the grid of size {size}")]
    OffGrid { x: f64, size: usize },

    #[error("aliasing: grid size {grid} is below the {needed} samples required for cutoff {cutoff}")]
    Aliasing {
        grid: usize,
        cutoff: usize,
        needed: usize,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("modulus is unsupported for operator kind {0}")]
    UnsupportedModulus(&'static str),

    #[error("operator is not power bounded: {0}")]
    NotPowerBounded(String),

    #[error("ill-conditioned eigenbasis (condition number {0:.3e})")]
    IllConditionedEigenbasis(f64),

    #[error("eigenvalue clusters ambiguous: representatives separated by {0:.3e}")]
    ClusterAmbiguity(f64),

    #[error("resonance tolerance overlap: a tuple product sits at distance {dist:.3e} from 1 with tol {tol:.3e}")]
    ToleranceOverlap { dist: f64, tol: f64 },

    #[error("certificate cutoff would exceed the cap {cap}")]
    CapExceeded { cap: usize },

    #[error("weight gamma is not unimodular: |gamma| = {0}")]
    NonUnimodularGamma(f64),

    #[error("semigroup instability: observed growth factor {0}")]
    Instability(f64),

    #[error("tuple enumeration too large: {0} candidates")]
    EnumerationTooLarge(u128),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
