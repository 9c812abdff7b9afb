use thiserror::Error;

/// Errors produced by state construction, operator algebra, and solvers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("Fock cutoff must be at least 2, got {0}")]
    CutoffTooSmall(usize),

    #[error("mode '{0}' is not part of this space")]
    UnknownMode(String),

    #[error("duplicate mode label '{0}' in tensor product")]
    DuplicateMode(String),

    #[error("empty keep set in partial trace")]
    EmptyKeepSet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("spaces do not match: {0}")]
    SpaceMismatch(String),

    #[error(
        "truncation leakage {leakage:.3e} on mode '{mode}' exceeds tolerance {tol:.1e}; \
         cutoff of at least {required_cutoff} suggested"
    )]
    LeakageAboveTol {
        mode: String,
        leakage: f64,
        tol: f64,
        required_cutoff: usize,
    },

    #[error("state is not a valid density operator: {0}")]
    InvalidState(String),

    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),

    #[error("detuning must be nonzero")]
    ZeroDetuning,

    #[error("efficiency must lie in [0, 1], got {0}")]
    EfficiencyOutOfRange(f64),

    #[error("assignment matrix is not row-stochastic (row {row} sums to {sum})")]
    NotRowStochastic { row: usize, sum: f64 },

    #[error("outcome probability {0:.3e} too small to define a conditional state")]
    OutcomeTooUnlikely(f64),

    #[error("integrator step size underflow at t = {0:.6e} s")]
    StepSizeUnderflow(f64),

    #[error("positivity violation: min eigenvalue {0:.3e} below -1e-6 at t = {1:.6e} s")]
    PositivityViolation(f64, f64),

    #[error("rejection sampler acceptance rate {0:.2e} below 1e-3; proposal does not cover the density")]
    SamplerAcceptanceTooLow(f64),

    #[error("degenerate sweep: all drive amplitudes equal")]
    DegenerateSweep,

    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("fit did not converge after {0} iterations")]
    FitDiverged(usize),

    #[error("fit residual chi^2/dof = {0:.2} exceeds threshold {1:.2}")]
    FitResidualTooLarge(f64, f64),

    #[error("empty data: {0}")]
    EmptyData(&'static str),

    #[error("target infeasible at t = {t_us:.4} us: {reason}")]
    InfeasibleTarget { t_us: f64, reason: String },

    #[error("time grid spacing {got:.3e} s too coarse; need <= {max:.3e} s")]
    GridTooCoarse { got: f64, max: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
