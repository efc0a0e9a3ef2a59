//! Domain types for the two-level Normal model.
//!
//! Level I:  `y_j | theta_j ~ Normal(theta_j, V_j)` with known sampling
//! variance `V_j`.  Level II: `theta_j ~ Normal(x_j' beta, A)`.  The
//! shrinkage factor of group `j` is `B_j = V_j / (A + V_j)`; `B_j = 1`
//! ("full shrinkage") pulls the estimate all the way to the regression fit.

use crate::error::{Result, ShrinkError};
use crate::linalg::SymMatrix;

/// One group's summary data: estimate, known sampling variance, covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupObservation {
    /// Opaque label, carried through to outputs.
    pub id: String,
    /// Group-level estimate (the Level-I observation).
    pub y: f64,
    /// Known sampling variance, strictly positive.
    pub v: f64,
    /// Level-II covariate row; `x = [1.0]` for intercept-only models.
    pub x: Vec<f64>,
}

impl GroupObservation {
    pub fn new(id: impl Into<String>, y: f64, v: f64, x: Vec<f64>) -> Self {
        Self { id: id.into(), y, v, x }
    }
}

/// A validated collection of groups plus the regression dimension.
///
/// Construction enforces every model invariant, so downstream code can
/// assume positive variances, `k >= r + 3`, and a full-rank design.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    groups: Vec<GroupObservation>,
    r: usize,
}

impl Dataset {
    /// Validate and wrap a list of groups with `r` covariates per group.
    ///
    /// `k >= r + 3` is enforced globally: the flat-prior posterior on `A`
    /// is proper, and the adjusted likelihood `A * L(A)` vanishes at both
    /// ends of `[0, inf)`, exactly when `k - r >= 3`.
    pub fn new(groups: Vec<GroupObservation>, r: usize) -> Result<Self> {
        let k = groups.len();
        if k < r + 3 {
            return Err(ShrinkError::TooFewGroups { k, required: r + 3 });
        }
        for g in &groups {
            if g.x.len() != r {
                return Err(ShrinkError::DimensionMismatch {
                    id: g.id.clone(),
                    got: g.x.len(),
                    expected: r,
                });
            }
            if !g.y.is_finite() || g.x.iter().any(|xi| !xi.is_finite()) {
                return Err(ShrinkError::NonFiniteInput { id: g.id.clone() });
            }
            if !(g.v > 0.0) || !g.v.is_finite() {
                return Err(ShrinkError::NonPositiveVariance { id: g.id.clone(), value: g.v });
            }
        }
        // Full column rank of X, checked through the condition of X'X.
        if r > 0 {
            let mut xtx = SymMatrix::zeros(r);
            for g in &groups {
                xtx.add_outer(&g.x, 1.0);
            }
            match xtx.cond_1norm() {
                Some(cond) if cond <= 1e12 => {}
                Some(cond) => return Err(ShrinkError::RankDeficientDesign { cond }),
                None => return Err(ShrinkError::RankDeficientDesign { cond: f64::INFINITY }),
            }
        }
        Ok(Self { groups, r })
    }

    /// Intercept-only dataset (`r = 1`, every `x_j = [1]`), the "equal
    /// means" configuration.
    pub fn intercept_only(ids_y_v: Vec<(String, f64, f64)>) -> Result<Self> {
        let groups = ids_y_v
            .into_iter()
            .map(|(id, y, v)| GroupObservation::new(id, y, v, vec![1.0]))
            .collect();
        Self::new(groups, 1)
    }

    /// Number of groups `k`.
    pub fn k(&self) -> usize {
        self.groups.len()
    }

    /// Number of covariates `r`.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn groups(&self) -> &[GroupObservation] {
        &self.groups
    }

    /// Largest sampling variance, used for bracket caps.
    pub fn max_v(&self) -> f64 {
        self.groups.iter().map(|g| g.v).fold(f64::MIN, f64::max)
    }

    /// Median sampling variance, used as the quadrature reference scale.
    pub fn median_v(&self) -> f64 {
        let mut vs: Vec<f64> = self.groups.iter().map(|g| g.v).collect();
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = vs.len();
        if n % 2 == 1 {
            vs[n / 2]
        } else {
            0.5 * (vs[n / 2 - 1] + vs[n / 2])
        }
    }

    /// True when every `V_j` equals the first one to relative `tol`.
    pub fn equal_variances(&self, tol: f64) -> bool {
        let v0 = self.groups[0].v;
        self.groups.iter().all(|g| (g.v - v0).abs() <= tol * v0.abs())
    }
}

/// Level-II parameters: variance of the random effects and regression
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    /// Level-II variance, `A >= 0`.
    pub a: f64,
    /// Level-II regression coefficients, length `r`.
    pub beta: Vec<f64>,
}

impl Hyperparameters {
    pub fn new(a: f64, beta: Vec<f64>) -> Result<Self> {
        if a < 0.0 || !a.is_finite() {
            return Err(ShrinkError::NegativeA(a));
        }
        Ok(Self { a, beta })
    }
}

/// Per-group shrinkage factors, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageVector {
    pub b: Vec<f64>,
}

/// Shrinkage factors `B_j = V_j / (A + V_j)` for every group.
///
/// `A = 0` gives full shrinkage (`B_j = 1`); every entry lies in `(0, 1]`.
pub fn shrinkages(a: f64, d: &Dataset) -> Result<ShrinkageVector> {
    if a < 0.0 || !a.is_finite() {
        return Err(ShrinkError::NegativeA(a));
    }
    Ok(ShrinkageVector { b: d.groups().iter().map(|g| g.v / (a + g.v)).collect() })
}
