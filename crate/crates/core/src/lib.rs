//! Random-effect estimation for the two-level Normal (Fay-Herriot) model.
//!
//! The crate provides:
//!
//! - [`model`]: validated datasets and shrinkage factors `B_j = V_j/(A+V_j)`;
//! - [`likelihood`]: the restricted (REML) marginal log-likelihood of the
//!   level-II variance `A`, with the regression coefficients integrated out
//!   under a flat prior, plus the power-adjusted variant `q ln A + l(A)`;
//! - [`adm`]: generic adjustment-for-density-maximization fits of Normal,
//!   Beta, and Gamma approximations to a one-dimensional log target;
//! - [`estimators`]: REML/MLE and adjusted-maximum point estimators of `A`,
//!   James-Stein shrinkage, and per-group point and interval inference from
//!   the Beta-approximated shrinkage posterior;
//! - [`posterior`]: the exact flat-prior posterior of `A` by quadrature,
//!   the inference gold standard the approximations are measured against;
//! - [`sim`]: a deterministic Monte Carlo harness for coverage and risk
//!   verification.

pub mod adm;
pub mod error;
pub mod estimators;
pub mod likelihood;
pub mod linalg;
pub mod model;
pub mod numeric;
pub mod posterior;
pub mod rng;
pub mod sim;

pub use error::{Result, ShrinkError};
pub use model::{Dataset, GroupObservation, Hyperparameters, ShrinkageVector};
