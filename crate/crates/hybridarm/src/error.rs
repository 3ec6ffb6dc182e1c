//! Error type shared by all estimators and analysis methods.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failures surfaced by estimators and borrowing methods.
///
/// Data problems that are diagnosable per subject (negative times, an
/// intervention-arm external patient, ...) are *not* errors; they are
/// reported as [`crate::model::Violation`]s by cohort validation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The information matrix of a regression fit is singular
    /// (collinear features or no usable observations).
    #[error("information matrix is singular")]
    SingularInformation,

    /// No event with positive weight in the analysis set.
    #[error("analysis set contains no event with positive weight")]
    NoEvents,

    /// The treatment indicator is constant within every risk set, so the
    /// partial likelihood carries no information about the hazard ratio.
    #[error("treatment indicator does not vary within any risk set")]
    NoTreatmentVariation,

    /// Fewer external subjects than a method needs.
    #[error("method needs {needed} external subjects, only {available} available")]
    InsufficientExternals { needed: usize, available: usize },

    /// An on-trial score of (numerically) 1 makes the inverse odds unbounded.
    #[error("on-trial score {score} for subject {id} gives unbounded odds")]
    InfiniteOdds { id: String, score: f64 },

    /// Every grid point of a weight posterior had non-positive curvature,
    /// leaving nothing to average.
    #[error("weight posterior profile degenerate at every grid point")]
    DegenerateProfile,
}
