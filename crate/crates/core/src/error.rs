//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors raised by dataset validation, likelihood evaluation, fitting,
/// and posterior construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShrinkError {
    /// A sampling variance `V_j` is zero or negative.
    #[error("group {id}: sampling variance must be positive, got {value}")]
    NonPositiveVariance { id: String, value: f64 },

    /// Fewer groups than the model can support (`k >= r + 3` is required
    /// for a proper flat-prior posterior on the level-II variance).
    #[error("too few groups: k = {k} but at least {required} are required")]
    TooFewGroups { k: usize, required: usize },

    /// The design matrix does not have full column rank.
    #[error("design matrix is rank deficient (condition estimate {cond:.3e})")]
    RankDeficientDesign { cond: f64 },

    /// A covariate row has the wrong number of entries.
    #[error("group {id}: covariate row has {got} entries, expected {expected}")]
    DimensionMismatch { id: String, got: usize, expected: usize },

    /// A `y` or `x` entry is NaN or infinite.
    #[error("group {id}: non-finite input value")]
    NonFiniteInput { id: String },

    /// A negative level-II variance was supplied where `A >= 0` is required.
    #[error("level-II variance must be nonnegative, got {0}")]
    NegativeA(f64),

    /// `A <= 0` supplied to an operation that needs a strictly positive value.
    #[error("level-II variance must be strictly positive, got {0}")]
    NonPositiveA(f64),

    /// Likelihood power adjustment outside its valid range `(0, 1]`.
    #[error("adjustment power q must lie in (0, 1], got {0}")]
    BadQ(f64),

    /// The GLS normal equations are numerically singular.
    #[error("GLS system is numerically singular (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },

    /// The adjusted target is maximized at a bracket edge, so no Pearson
    /// family member can be fitted.
    #[error("adjusted target has no interior maximum (argmax {argmax} near bracket edge)")]
    NoInteriorMax { argmax: f64 },

    /// Second derivative of the adjusted log target is not negative at the mode.
    #[error("adjusted target is not concave at its mode (curvature {curvature})")]
    NonConcaveAtMode { curvature: f64 },

    /// Bracket expansion for a one-dimensional optimum exceeded its cap.
    #[error("optimizer failure: {0}")]
    OptimizerFailure(String),

    /// Equal sampling variances are required (James-Stein).
    #[error("sampling variances are not all equal (max relative spread {spread:.3e})")]
    UnequalVariances { spread: f64 },

    /// The requested estimator does not apply to this dataset.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// The flat-prior posterior of the level-II variance fails its
    /// integrability check.
    #[error("posterior on A is not proper (estimated tail exponent {exponent:.3})")]
    NotProper { exponent: f64 },

    /// An interval level outside the supported range.
    #[error("interval level must lie in (0.5, 1), got {0}")]
    BadLevel(f64),

    /// A malformed Monte Carlo specification.
    #[error("invalid simulation spec: {0}")]
    InvalidSimSpec(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, ShrinkError>;
