use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input that violates a domain invariant (non-finite value, empty data, bad shape).
    #[error("rejected input: {0}")]
    RejectedInput(String),

    /// Method-of-moments inverse hit a degenerate (near-zero) variance.
    #[error("degenerate moments: variance {variance:e} is not above the floor {floor:e}")]
    DegenerateMoments { variance: f64, floor: f64 },

    /// A closed-form quantity fell below its numerical tolerance.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("moment of order {0} is not supported by this family")]
    UnsupportedMoment(usize),

    #[error("singular Fisher information: {0}")]
    SingularFisher(String),

    /// Complete or quasi-complete separation: the logistic MLE does not exist.
    #[error("logistic MLE does not exist (separation): {0}")]
    Separation(String),

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("target is not binary: found value {0}")]
    NonBinaryTarget(f64),

    #[error("conditional mean undefined at atom {0}: atom has zero weight")]
    UndefinedConditional(usize),

    #[error("fold {fold} is degenerate: {source}")]
    FoldDegenerate {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replicate {replicate} aborted at step {step}: {source}")]
    TrajectoryAborted {
        replicate: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn rejected(msg: impl Into<String>) -> Self {
        Error::RejectedInput(msg.into())
    }

    /// The innermost cause, looking through fold and trajectory wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::FoldDegenerate { source, .. } | Error::TrajectoryAborted { source, .. } => {
                source.root_cause()
            }
            other => other,
        }
    }
}
