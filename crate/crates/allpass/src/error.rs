//! Crate-wide error type.

/// Errors reported by the library operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("numerical rank {found} differs from required rank {expected}")]
    RankMismatch { expected: usize, found: usize },

    #[error("pair (A, B) is not reachable")]
    NotReachable,

    #[error("pair (A, C) is not observable")]
    NotObservable,

    #[error("realization is not minimal (McMillan degree {mcmillan} < state dimension {n})")]
    NotMinimal { mcmillan: usize, n: usize },

    #[error("data does not define an all-pass function (residual {0:.3e})")]
    NotAllPass(f64),

    #[error("matrix is singular or numerically rank-deficient")]
    Singular,

    #[error("evaluation point is a pole of the transfer function")]
    AtPole,

    #[error("subspace is not invariant (defect {0:.3e})")]
    NotInvariant(f64),

    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
