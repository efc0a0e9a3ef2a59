//! Point estimators of the level-II variance and per-group inference.
//!
//! `estimate_a_mle` maximizes the restricted likelihood over `[0, inf)`,
//! truncating at zero when the boundary wins.  `estimate_a_adm` maximizes
//! the power-adjusted objective `q ln A + l(A)`, which always has a
//! strictly interior maximizer, so shrinkage factors never collapse to 1.
//! `adm_shp_fit` combines the adjusted estimate with per-group Beta
//! approximations of the shrinkage posterior to produce point estimates
//! and intervals; `james_stein_b` is the classical equal-variance
//! baseline whose unbiased shrinkage factor can exceed 1.

use crate::adm::{adm_fit, family_moments, PearsonFamily};
use crate::error::{Result, ShrinkError};
use crate::likelihood::{
    adjusted_loglik, adjusted_loglik_grad, check_q, gls_beta, reml_loglik, reml_loglik_grad,
};
use crate::linalg::SymMatrix;
use crate::model::Dataset;
use crate::numeric::{bisect_sign_change, normal_quantile};

/// How an `A` estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMethod {
    Mle,
    Adm,
}

/// An estimate of the level-II variance with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    /// The estimate; `>= 0`, and strictly positive for ADM.
    pub a_hat: f64,
    pub method: EstimationMethod,
    /// Adjustment power (ADM only).
    pub q: Option<f64>,
    /// True when the optimum passed its finite-difference stationarity check.
    pub converged: bool,
    /// Objective value at the optimum (REML or adjusted, per method).
    pub objective_at_opt: f64,
}

/// Per-group shrinkage and random-effect inference.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupInference {
    /// Plug-in shrinkage `V_j / (A_hat + V_j)`.
    pub b_hat: f64,
    /// Posterior mean of `B_j` under the fitted Beta approximation.
    pub b_mean: f64,
    /// Posterior variance of `B_j` under the fitted Beta approximation.
    pub b_var: f64,
    /// Point estimate of the random effect.
    pub theta_hat: f64,
    /// Variance attached to `theta_hat`.
    pub theta_var: f64,
    /// Interval endpoints, `lo < theta_hat < hi`.
    pub lo: f64,
    pub hi: f64,
    /// Nominal two-sided level of `(lo, hi)`.
    pub level: f64,
}

/// Output of [`adm_shp_fit`]: the variance estimate, the GLS regression
/// at that estimate, and one inference record per group in input order.
#[derive(Debug, Clone)]
pub struct AdmShpFit {
    pub a: VarianceEstimate,
    pub beta: Vec<f64>,
    pub beta_cov: SymMatrix,
    pub per_group: Vec<GroupInference>,
}

/// Bracket cap multiplier: expansion past `1e15 * max V_j` is a failure.
const BRACKET_CAP: f64 = 1e15;

/// Refine every `+ -> -` sign change of `grad` between consecutive
/// anchors. `values[i]` is `grad(anchors[i])`.
fn refine_maxima<G: FnMut(f64) -> f64>(
    mut grad: G,
    anchors: &[f64],
    values: &[f64],
) -> Vec<f64> {
    let mut roots = Vec::new();
    for i in 0..anchors.len() - 1 {
        if values[i] > 0.0 && values[i + 1] <= 0.0 {
            roots.push(bisect_sign_change(&mut grad, anchors[i], anchors[i + 1], values[i]));
        }
    }
    roots
}

/// Log-spaced ladder of anchor points from `lo` to `hi` (inclusive ends).
fn log_ladder(lo: f64, hi: f64, per_decade: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    let decades = (hi / lo).log10();
    let n = (decades * per_decade).ceil().max(1.0) as usize;
    for i in 1..n {
        pts.push(lo * 10f64.powf(decades * i as f64 / n as f64));
    }
    pts.push(hi);
    pts
}

/// Stationarity check used for the `converged` flag: central finite
/// difference of the objective at the optimum.
fn fd_stationary<F: FnMut(f64) -> f64>(mut obj: F, a: f64) -> bool {
    let h = ((1e-5 * a).max(1e-8)).min(0.5 * a.max(1e-300));
    if h <= 0.0 {
        return false;
    }
    let d = (obj(a + h) - obj(a - h)) / (2.0 * h);
    d.abs() < 1e-8
}

/// REML/MLE estimate of `A`, truncated at zero.
///
/// The whole nonnegative axis is scanned for stationary maxima of the
/// restricted log-likelihood; the boundary value `l(0)` competes with
/// every interior candidate and wins ties.
pub fn estimate_a_mle(d: &Dataset) -> Result<VarianceEstimate> {
    let max_v = d.max_v();
    let cap = BRACKET_CAP * max_v;
    let mut anchors = vec![0.0];
    anchors.extend(log_ladder(1e-8 * max_v, cap, 4.0));
    let mut values = Vec::with_capacity(anchors.len());
    for &a in &anchors {
        values.push(reml_loglik_grad(a, d)?);
    }
    if *values.last().unwrap() > 0.0 {
        return Err(ShrinkError::OptimizerFailure(format!(
            "likelihood still increasing at bracket cap {cap:.3e}"
        )));
    }
    let grad = |a: f64| reml_loglik_grad(a, d).unwrap_or(f64::NAN);
    let roots = refine_maxima(grad, &anchors, &values);

    let l0 = reml_loglik(0.0, d)?;
    let mut best_a = 0.0;
    let mut best_l = l0;
    for &root in &roots {
        let l = reml_loglik(root, d)?;
        if l > best_l {
            best_l = l;
            best_a = root;
        }
    }
    let converged = if best_a == 0.0 {
        true
    } else {
        fd_stationary(|a| reml_loglik(a, d).unwrap_or(f64::NAN), best_a)
    };
    Ok(VarianceEstimate {
        a_hat: best_a,
        method: EstimationMethod::Mle,
        q: None,
        converged,
        objective_at_opt: best_l,
    })
}

/// Adjusted-maximum estimate of `A`: argmax of `q ln A + l(A)` over
/// `(0, inf)`.  The objective diverges to `-inf` at both ends, so the
/// maximizer is strictly interior for every dataset.
pub fn estimate_a_adm(d: &Dataset, q: f64) -> Result<VarianceEstimate> {
    check_q(q)?;
    let max_v = d.max_v();
    let cap = BRACKET_CAP * max_v;

    let grad_at = |a: f64| adjusted_loglik_grad(a, q, d);

    // Lower anchor with positive derivative (q/A dominates near zero).
    let mut lo = 1e-3 * max_v;
    let mut g_lo = grad_at(lo)?;
    let mut guard = 0;
    while g_lo <= 0.0 {
        lo /= 16.0;
        g_lo = grad_at(lo)?;
        guard += 1;
        if guard > 300 {
            return Err(ShrinkError::OptimizerFailure(
                "no positive-gradient anchor above zero".into(),
            ));
        }
    }
    // Upper anchor with negative derivative.
    let mut hi = max_v.max(16.0 * lo);
    let mut g_hi = grad_at(hi)?;
    while g_hi > 0.0 {
        hi *= 16.0;
        if hi > cap {
            return Err(ShrinkError::OptimizerFailure(format!(
                "bracket expansion exceeded {cap:.3e}"
            )));
        }
        g_hi = grad_at(hi)?;
    }

    let mut anchors = vec![lo];
    let mut inner = log_ladder(lo, hi, 4.0);
    inner.remove(0);
    anchors.append(&mut inner);
    let mut values = vec![g_lo];
    for &a in &anchors[1..] {
        values.push(grad_at(a)?);
    }

    let grad = |a: f64| adjusted_loglik_grad(a, q, d).unwrap_or(f64::NAN);
    let roots = refine_maxima(grad, &anchors, &values);
    if roots.is_empty() {
        return Err(ShrinkError::OptimizerFailure(
            "no stationary maximum located in bracket".into(),
        ));
    }
    let mut best_a = roots[0];
    let mut best_obj = f64::NEG_INFINITY;
    for &root in &roots {
        let o = adjusted_loglik(root, q, d)?;
        if o > best_obj {
            best_obj = o;
            best_a = root;
        }
    }
    let converged = fd_stationary(|a| adjusted_loglik(a, q, d).unwrap_or(f64::NAN), best_a);
    Ok(VarianceEstimate {
        a_hat: best_a,
        method: EstimationMethod::Adm,
        q: Some(q),
        converged,
        objective_at_opt: best_obj,
    })
}

/// James-Stein shrinkage factor, raw and positive-part.
///
/// Equal variances are required.  With a known mean the raw factor is
/// `(k-2) V / sum (y_j - mu)^2`, the uniformly minimum variance unbiased
/// estimator of `B`; without one it is `(k-3) V / S` with deviations
/// taken from the grand mean.  The raw value can exceed 1 (that is the
/// cost of unbiasedness); `B_plus = min(1, B_raw)` is what an analyst
/// would use.
pub fn james_stein_b(d: &Dataset, known_mean: Option<f64>) -> Result<(f64, f64)> {
    let v0 = d.groups()[0].v;
    let spread = d
        .groups()
        .iter()
        .map(|g| (g.v - v0).abs() / v0.abs())
        .fold(0.0, f64::max);
    if !d.equal_variances(1e-12) {
        return Err(ShrinkError::UnequalVariances { spread });
    }
    let k = d.k();
    let b_raw = match known_mean {
        Some(mu) => {
            if k < 3 {
                return Err(ShrinkError::TooFewGroups { k, required: 3 });
            }
            let ss: f64 = d.groups().iter().map(|g| (g.y - mu) * (g.y - mu)).sum();
            if ss == 0.0 {
                return Err(ShrinkError::NotApplicable(
                    "zero sum of squares about the known mean".into(),
                ));
            }
            (k as f64 - 2.0) * v0 / ss
        }
        None => {
            if d.r() != 1 {
                return Err(ShrinkError::NotApplicable(
                    "unknown-mean James-Stein requires an intercept-only design".into(),
                ));
            }
            let x0 = d.groups()[0].x[0];
            if d.groups().iter().any(|g| g.x[0] != x0) {
                return Err(ShrinkError::NotApplicable(
                    "unknown-mean James-Stein requires a constant covariate column".into(),
                ));
            }
            if k < 4 {
                return Err(ShrinkError::TooFewGroups { k, required: 4 });
            }
            let ybar: f64 = d.groups().iter().map(|g| g.y).sum::<f64>() / k as f64;
            let s: f64 = d.groups().iter().map(|g| (g.y - ybar) * (g.y - ybar)).sum();
            if s == 0.0 {
                return Err(ShrinkError::NotApplicable(
                    "zero centered sum of squares".into(),
                ));
            }
            (k as f64 - 3.0) * v0 / s
        }
    };
    Ok((b_raw, b_raw.min(1.0)))
}

/// Mean and variance of `theta_j` given the fitted shrinkage moments:
/// conditional mean `y - B (y - x'b)` is linear in `B`, the conditional
/// variance `V (1 - B)` likewise; `B_var` propagates shrinkage
/// uncertainty through the squared residual, and the final term carries
/// the GLS uncertainty of the regression fit.
pub(crate) fn theta_moments(
    y: f64,
    v: f64,
    xb: f64,
    x_cov_x: f64,
    b_mean: f64,
    b_var: f64,
) -> (f64, f64) {
    let resid = y - xb;
    let theta_hat = y - b_mean * resid;
    let theta_var = v * (1.0 - b_mean) + b_var * resid * resid + b_mean * b_mean * x_cov_x;
    (theta_hat, theta_var)
}

/// Fit the ADM-SHP procedure: adjusted variance estimate, GLS regression,
/// and a Beta-approximated shrinkage posterior for every group.
///
/// The target for group `j` is the posterior of `A` under the prior
/// `A^(q-1) dA` (flat when `q = 1`), transformed to `B_j`-space; the Beta
/// family's adjustment `B (1 - B)` makes the adjusted mode equal
/// `V_j / (A_hat + V_j)` with `A_hat = argmax A^q L(A)`.
pub fn adm_shp_fit(d: &Dataset, q: f64, level: f64) -> Result<AdmShpFit> {
    if !(level > 0.5 && level < 1.0) {
        return Err(ShrinkError::BadLevel(level));
    }
    let a_est = estimate_a_adm(d, q)?;
    let fit = gls_beta(a_est.a_hat, d)?;
    let z = normal_quantile(0.5 * (1.0 + level));

    let mut per_group = Vec::with_capacity(d.k());
    for g in d.groups() {
        let v = g.v;
        // Log posterior density of B_j = V_j / (A + V_j): the likelihood
        // at A(B) = V (1-B)/B, the prior A^(q-1), and the Jacobian V/B^2.
        let log_target = |b: f64| {
            if !(b > 0.0 && b < 1.0) {
                return f64::NEG_INFINITY;
            }
            let a = v * (1.0 - b) / b;
            if !(a > 0.0) {
                return f64::NEG_INFINITY;
            }
            (q - 1.0) * a.ln()
                + reml_loglik(a, d).unwrap_or(f64::NEG_INFINITY)
                + v.ln()
                - 2.0 * b.ln()
        };
        let beta_fit = adm_fit(log_target, PearsonFamily::Beta, (0.0, 1.0))?;
        let (b_mean, b_var) = family_moments(&beta_fit);

        let xb: f64 = g.x.iter().zip(&fit.beta).map(|(xi, bi)| xi * bi).sum();
        let x_cov_x = fit.cov.quad_form(&g.x);
        let (theta_hat, theta_var) = theta_moments(g.y, v, xb, x_cov_x, b_mean, b_var);
        let half = z * theta_var.sqrt();
        per_group.push(GroupInference {
            b_hat: v / (a_est.a_hat + v),
            b_mean,
            b_var,
            theta_hat,
            theta_var,
            lo: theta_hat - half,
            hi: theta_hat + half,
            level,
        });
    }

    Ok(AdmShpFit { a: a_est, beta: fit.beta, beta_cov: fit.cov, per_group })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    /// Intercept-only equal-variance dataset with exact centered sum of
    /// squares `s` and mean `mu`.
    fn equal_var_dataset(k: usize, v: f64, s: f64, mu: f64) -> Dataset {
        let mut z: Vec<f64> = (0..k).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        if k % 2 == 1 {
            z[k - 1] = 0.0;
        }
        let mean = z.iter().sum::<f64>() / k as f64;
        for zi in &mut z {
            *zi -= mean;
        }
        let ss: f64 = z.iter().map(|zi| zi * zi).sum();
        let scale = (s / ss).sqrt();
        Dataset::intercept_only(
            z.iter()
                .enumerate()
                .map(|(j, zi)| (format!("g{j}"), mu + scale * zi, v))
                .collect(),
        )
        .unwrap()
    }

    /// Test oracle: positive root of the ADM stationarity quadratic for
    /// the equal-variance intercept-only case,
    /// `((k-1) - 2q) A^2 - (S - ((k-1) - 4q) V) A - 2q V^2 = 0`.
    fn adm_quadratic_root(k: usize, v: f64, s: f64, q: f64) -> f64 {
        let alpha = (k as f64 - 1.0) - 2.0 * q;
        let b = s - ((k as f64 - 1.0) - 4.0 * q) * v;
        let c = 2.0 * q * v * v;
        let disc = (b * b + 4.0 * alpha * c).sqrt();
        if b >= 0.0 {
            (b + disc) / (2.0 * alpha)
        } else {
            2.0 * c / (disc - b)
        }
    }

    #[test]
    fn mle_closed_form_examples() {
        let d = equal_var_dataset(10, 1.0, 18.0, 3.0);
        let est = estimate_a_mle(&d).unwrap();
        assert!((est.a_hat - 1.0).abs() < 1e-8, "got {}", est.a_hat);
        assert!(est.converged);

        let d = equal_var_dataset(10, 1.0, 5.0, 3.0);
        let est = estimate_a_mle(&d).unwrap();
        assert_eq!(est.a_hat, 0.0, "S/(k-1) - V < 0 must truncate");

        let d = equal_var_dataset(4, 2.0, 30.0, -1.0);
        let est = estimate_a_mle(&d).unwrap();
        assert!((est.a_hat - 8.0).abs() < 1e-7, "got {}", est.a_hat);
    }

    #[test]
    fn mle_matches_grid_oracle() {
        // Coarse independent check of the k=10, V=1, S=18 example.
        let d = equal_var_dataset(10, 1.0, 18.0, 0.0);
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=200_000 {
            let a = 4.0 * i as f64 / 200_000.0;
            let l = reml_loglik(a, &d).unwrap();
            if l > best.1 {
                best = (a, l);
            }
        }
        let est = estimate_a_mle(&d).unwrap();
        assert!((est.a_hat - best.0).abs() < 4.0 / 200_000.0 + 1e-9);
    }

    #[test]
    fn adm_worked_examples() {
        let d = equal_var_dataset(10, 1.0, 18.0, 3.0);
        let est = estimate_a_adm(&d, 1.0).unwrap();
        assert!((est.a_hat - 2.0).abs() < 1e-8, "got {}", est.a_hat);
        assert!(est.converged);

        let d = equal_var_dataset(10, 1.0, 5.0, 3.0);
        let est = estimate_a_adm(&d, 1.0).unwrap();
        assert!(
            (est.a_hat - 0.5345224838248488).abs() < 1e-8,
            "got {}",
            est.a_hat
        );

        let est_half = estimate_a_adm(&d, 0.5).unwrap();
        assert!((est_half.a_hat - 0.25).abs() < 1e-8, "got {}", est_half.a_hat);
        assert!(est_half.a_hat < est.a_hat, "smaller q must shrink more");
    }

    #[test]
    fn adm_matches_quadratic_oracle_randomized() {
        let mut rng = SplitMix64::new(0xdead);
        for _ in 0..100 {
            let k = 4 + (rng.next_u64() % 20) as usize;
            let v = 0.1 + 5.0 * rng.next_f64();
            let s = 0.2 + 60.0 * rng.next_f64();
            let q = 0.25 + 0.75 * rng.next_f64();
            let d = equal_var_dataset(k, v, s, 0.0);
            let est = estimate_a_adm(&d, q).unwrap();
            let oracle = adm_quadratic_root(k, v, s, q);
            assert!(
                (est.a_hat - oracle).abs() < 1e-7 * oracle.max(1.0),
                "k={k} v={v} s={s} q={q}: {} vs {oracle}",
                est.a_hat
            );
        }
    }

    #[test]
    fn adm_strictly_positive_even_when_mle_truncates() {
        let mut rng = SplitMix64::new(0xfeed);
        for _ in 0..200 {
            let k = 4 + (rng.next_u64() % 12) as usize;
            let v = 0.2 + 2.0 * rng.next_f64();
            let s = 0.05 + 0.5 * rng.next_f64() * v; // tiny spread: MLE at 0
            let d = equal_var_dataset(k, v, s, 1.0);
            let adm = estimate_a_adm(&d, 1.0).unwrap();
            assert!(adm.a_hat > 0.0);
        }
    }

    #[test]
    fn james_stein_examples() {
        // Known mean, k=10, V=1, sum (y-mu)^2 = 16 -> 8/16 = 0.5.
        let d = equal_var_dataset(10, 1.0, 16.0, 0.0); // mean 0, S = 16
        let (raw, plus) = james_stein_b(&d, Some(0.0)).unwrap();
        assert!((raw - 0.5).abs() < 1e-12);
        assert!((plus - 0.5).abs() < 1e-12);

        // Known mean, sum of squares 4 -> raw 2.0, positive part 1.
        let d = equal_var_dataset(10, 1.0, 4.0, 0.0);
        let (raw, plus) = james_stein_b(&d, Some(0.0)).unwrap();
        assert!((raw - 2.0).abs() < 1e-11);
        assert_eq!(plus, 1.0);

        // Unknown mean, k=4, V=1, S=3 -> (4-3)/3.
        let d = equal_var_dataset(4, 1.0, 3.0, 7.0);
        let (raw, _) = james_stein_b(&d, None).unwrap();
        assert!((raw - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn james_stein_rejects_unequal_variances() {
        let d = Dataset::intercept_only(vec![
            ("a".into(), 0.0, 1.0),
            ("b".into(), 1.0, 2.0),
            ("c".into(), 2.0, 1.0),
            ("d".into(), 3.0, 1.0),
        ])
        .unwrap();
        assert!(matches!(
            james_stein_b(&d, None),
            Err(ShrinkError::UnequalVariances { .. })
        ));
    }

    #[test]
    fn james_stein_rejects_too_few_groups() {
        // k = 3 is fine for a known mean but not for an unknown one.
        let d = equal_var_dataset(4, 1.0, 3.0, 0.0);
        assert!(james_stein_b(&d, None).is_ok());
        // Build k=4 then ask for the k>=4 rule on a k=4 dataset: ok above;
        // the known-mean k>=3 rule cannot be violated through a validated
        // dataset (k >= r + 3 >= 4), so exercise the unknown-mean k=4 rule
        // boundary directly: a 4-group dataset passes, nothing smaller
        // can be constructed.
        let err = Dataset::intercept_only(vec![
            ("a".into(), 0.0, 1.0),
            ("b".into(), 1.0, 1.0),
            ("c".into(), 2.0, 1.0),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn theta_moments_degenerate_reduces_to_conditional_normal() {
        // Known A and beta: B_var = 0 and no GLS uncertainty, so the
        // moments are the conditional Normal ones.
        let (y, v, mu, b) = (2.0, 1.5, 0.5, 0.4);
        let (m, s2) = theta_moments(y, v, mu, 0.0, b, 0.0);
        assert!((m - (y - b * (y - mu))).abs() < 1e-15);
        assert!((s2 - v * (1.0 - b)).abs() < 1e-15);
    }

    #[test]
    fn adm_shp_worked_example() {
        // k=10, V=1, S=18, with one group exactly at the grand mean:
        // z pattern (+-)^4 then two zeros, scaled so S = 18.
        let mu = 4.0;
        let c = 1.5; // 8 * c^2 = 18
        let mut rows: Vec<(String, f64, f64)> = (0..8)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                (format!("g{j}"), mu + sign * c, 1.0)
            })
            .collect();
        rows.push(("central1".into(), mu, 1.0));
        rows.push(("central2".into(), mu, 1.0));
        let d = Dataset::intercept_only(rows).unwrap();

        let fit = adm_shp_fit(&d, 1.0, 0.95).unwrap();
        assert!((fit.a.a_hat - 2.0).abs() < 1e-8);
        assert!((fit.beta[0] - mu).abs() < 1e-10);

        let central = &fit.per_group[8];
        assert!((central.b_hat - 1.0 / 3.0).abs() < 1e-9);
        assert!((central.b_mean - 1.0 / 3.0).abs() < 1e-8);
        assert!((central.b_var - 0.026143790849673203).abs() < 1e-6);
        assert!((central.theta_hat - mu).abs() < 1e-10);
        // theta_var = 1*(2/3) + B_var*0 + (1/9)*(3/10) = 0.7
        assert!((central.theta_var - 0.7).abs() < 1e-6, "got {}", central.theta_var);
        let z = normal_quantile(0.975);
        assert!((central.hi - central.lo - 2.0 * z * central.theta_var.sqrt()).abs() < 1e-9);
        assert!(central.lo < central.theta_hat && central.theta_hat < central.hi);
    }

    #[test]
    fn adm_shp_translation_equivariance() {
        let d = equal_var_dataset(8, 2.0, 12.0, 1.0);
        let fit = adm_shp_fit(&d, 1.0, 0.9).unwrap();
        let shifted = Dataset::intercept_only(
            d.groups()
                .iter()
                .map(|g| (g.id.clone(), g.y + 11.5, g.v))
                .collect(),
        )
        .unwrap();
        let fit2 = adm_shp_fit(&shifted, 1.0, 0.9).unwrap();
        assert!((fit.a.a_hat - fit2.a.a_hat).abs() < 1e-9 * fit.a.a_hat);
        for (g1, g2) in fit.per_group.iter().zip(&fit2.per_group) {
            assert!((g2.theta_hat - g1.theta_hat - 11.5).abs() < 1e-8);
            assert!((g2.lo - g1.lo - 11.5).abs() < 1e-6);
            assert!((g2.hi - g1.hi - 11.5).abs() < 1e-6);
            assert!((g2.b_hat - g1.b_hat).abs() < 1e-10);
        }
    }

    #[test]
    fn adm_shp_permutation_permutes_groups() {
        let d = Dataset::intercept_only(vec![
            ("a".into(), 0.3, 1.0),
            ("b".into(), 2.0, 0.5),
            ("c".into(), -1.0, 2.0),
            ("d".into(), 4.0, 1.5),
            ("e".into(), 1.0, 0.8),
        ])
        .unwrap();
        let mut rev: Vec<_> = d.groups().to_vec();
        rev.reverse();
        let d_rev = Dataset::new(rev, 1).unwrap();
        let fit = adm_shp_fit(&d, 1.0, 0.95).unwrap();
        let fit_rev = adm_shp_fit(&d_rev, 1.0, 0.95).unwrap();
        for (i, g) in fit.per_group.iter().enumerate() {
            let h = &fit_rev.per_group[4 - i];
            assert!((g.theta_hat - h.theta_hat).abs() < 1e-7 * (1.0 + g.theta_hat.abs()));
            assert!((g.b_mean - h.b_mean).abs() < 1e-8);
            // Interval endpoints carry curvature-stencil roundoff
            // (~1e-5 with the fixed step), so the check is loose.
            assert!((g.lo - h.lo).abs() < 1e-4);
        }
    }

    #[test]
    fn adm_shp_rejects_bad_level() {
        let d = equal_var_dataset(5, 1.0, 4.0, 0.0);
        assert!(matches!(adm_shp_fit(&d, 1.0, 0.4), Err(ShrinkError::BadLevel(_))));
        assert!(matches!(adm_shp_fit(&d, 1.0, 1.0), Err(ShrinkError::BadLevel(_))));
    }
}
