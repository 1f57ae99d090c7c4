use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Hermitian eigendecomposition did not converge (residual {residual:.3e})")]
    EigenNoConvergence { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SDP solver failed: {0}")]
    SolverFailure(String),

    /// The rate targets cannot be met even at the eavesdropper capacity level.
    #[error("rate targets ({rk1:.6}, {rl2:.6}) are infeasible even at the leakage capacity")]
    InfeasibleAtCapacity { rk1: f64, rl2: f64 },

    /// Phase-I found no feasible point; `margin` is the certified lower bound
    /// on the constraint shift needed for feasibility.
    #[error("problem is infeasible (phase-I margin {margin:.3e})")]
    Infeasible { margin: f64 },

    /// A rate target sits at its capacity, so the feasible set has no
    /// interior and Lagrange multipliers need not exist.
    #[error("no strictly feasible point: {0}")]
    NoStrictlyFeasiblePoint(String),

    #[error("missing dual variables: {0}")]
    MissingDuals(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
