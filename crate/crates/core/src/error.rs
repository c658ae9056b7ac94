use thiserror::Error;

/// Errors raised by the analysis, synthesis and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} is rank deficient: rank {rank}, expected {expected}")]
    RankDeficient {
        what: &'static str,
        rank: usize,
        expected: usize,
    },

    #[error("matrix {0} contains a non-finite entry")]
    NonFinite(&'static str),

    #[error("{0} did not converge")]
    ConvergenceFailure(&'static str),

    #[error("pair is not controllable: controllable subspace has dimension {dimension} of {order}")]
    Uncontrollable { dimension: usize, order: usize },

    #[error("pole {re}{im:+}i has no conjugate partner in the requested set")]
    UnpairedComplexPole { re: f64, im: f64 },

    #[error("pole {re}{im:+}i is not strictly stable")]
    UnstablePole { re: f64, im: f64 },

    #[error("pole placement missed the requested spectrum by {mismatch:e}")]
    PlacementInaccurate { mismatch: f64 },

    #[error("existence conditions violated: {0}")]
    ConditionsViolated(String),

    #[error("inconsistent verdicts: {0}")]
    InconsistentVerdicts(String),

    #[error("no augmentation satisfies the existence conditions")]
    NoAugmentationFound(Vec<CandidateDiagnostic>),

    #[error("functional is not observable from the measured output")]
    NotFunctionalObservable,

    #[error("incompatible controller and observer designs: {0}")]
    IncompatibleDesigns(String),

    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),

    #[error("simulation needs {steps} steps, budget is {budget}")]
    StepBudgetExceeded { steps: u64, budget: u64 },

    #[error("signal norm fell below {floor:e} inside the fit window")]
    SignalUnderflow { floor: f64 },

    #[error("invalid tolerance policy: {0}")]
    InvalidTolerance(String),

    #[error("parse error: {0}")]
    Parse(String),
}

/// Outcome of one augmentation candidate, kept for failure reports.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CandidateDiagnostic {
    pub strategy: String,
    pub rows: usize,
    /// `None` when the candidate could not be evaluated (e.g. rank deficient stack).
    pub rank_condition: Option<bool>,
    pub assignability: Option<bool>,
    pub note: String,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
