use thiserror::Error;

/// Errors produced by the hybrid scattering pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid piecewise polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("grid too coarse: step {step} leaves fewer than {required} points on [-1, 1]")]
    GridTooCoarse { step: f64, required: usize },

    #[error("knot separation violated: 2^(ell+1) = {required} exceeds the minimum knot gap {gap}")]
    SeparationViolation { required: f64, gap: f64 },

    #[error("sampling steps differ: {0} vs {1}")]
    StepMismatch(f64, f64),

    #[error("index out of range: ({i}, {j}) for a signal with {k} spikes")]
    IndexOutOfRange { i: usize, j: usize, k: usize },

    #[error("the analytic measurement only supports the indicator window")]
    UnsupportedWindow,

    #[error("quadrature step {quad_step} is coarser than scale/100 = {limit}")]
    QuadStepTooCoarse { quad_step: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("knot detection needs at least 3 strictly increasing samples, got {0}")]
    InsufficientSamples(usize),

    #[error("inconsistent difference multiset: {0}")]
    InconsistentMultiset(String),

    #[error("insufficient frequencies: {got} distinct, {required} required")]
    InsufficientFrequencies { got: usize, required: usize },

    #[error("least-squares fit failed: residual {residual:e} exceeds tolerance {tolerance:e}")]
    FitFailure { residual: f64, tolerance: f64 },

    #[error("inconsistent pair invariants: {0}")]
    InconsistentInvariants(String),

    #[error("alternation ambiguity unresolved: {0}")]
    Unresolvable(String),

    #[error("measurement conventions differ between records")]
    ConventionMismatch,

    #[error("signals are not embedded on the same grid: {0}")]
    GridMismatch(String),

    #[error("lemma hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("rejection budget of {budget} draws exhausted without a collision-free instance")]
    RejectionBudgetExhausted { budget: usize },
}

impl Error {
    /// Errors that indicate the caller asked for something outside an
    /// operation's preconditions (as opposed to a numerical breakdown).
    pub fn is_precondition(&self) -> bool {
        !matches!(
            self,
            Error::FitFailure { .. }
                | Error::InconsistentInvariants(_)
                | Error::Unresolvable(_)
                | Error::InconsistentMultiset(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
