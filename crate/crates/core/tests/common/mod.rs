//! Shared generators and independent oracles for the integration suites.
//!
//! The oracles intentionally avoid the library's optimizer paths: closed
//! forms come from the stationarity quadratics, tail checks from direct
//! grid searches.

// Each test binary uses its own subset of these helpers.
#![allow(dead_code)]

use shrink_core::model::{Dataset, GroupObservation};
use shrink_core::rng::SplitMix64;

/// Intercept-only dataset with equal variance `v`, exact centered sum of
/// squares `s`, and mean `mu`.
pub fn equal_var_dataset(k: usize, v: f64, s: f64, mu: f64) -> Dataset {
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

/// Random equal-variance intercept-only dataset drawn from the model.
/// Returns the dataset together with `(v, s)`.
pub fn random_equal_var_dataset(rng: &mut SplitMix64, k_min: usize, k_max: usize) -> (Dataset, f64, f64) {
    let k = k_min + (rng.next_u64() as usize) % (k_max - k_min + 1);
    let v = 10f64.powf(2.0 * rng.next_f64() - 1.0); // log-uniform [0.1, 10]
    let a_true = v * 10f64.powf(2.0 * rng.next_f64() - 1.0);
    let mu = 10.0 * rng.next_f64() - 5.0;
    let sd = (a_true + v).sqrt();
    let ys: Vec<f64> = (0..k).map(|_| mu + sd * rng.next_normal()).collect();
    let ybar = ys.iter().sum::<f64>() / k as f64;
    let s: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let d = Dataset::intercept_only(
        ys.iter().enumerate().map(|(j, &y)| (format!("g{j}"), y, v)).collect(),
    )
    .unwrap();
    (d, v, s)
}

/// Random dataset with heterogeneous variances and, for even draws, a
/// second covariate column.
pub fn random_dataset(rng: &mut SplitMix64, k_min: usize, k_max: usize) -> Dataset {
    let r = 1 + (rng.next_u64() % 2) as usize;
    let k_min = k_min.max(r + 3);
    let k = k_min + (rng.next_u64() as usize) % (k_max - k_min + 1);
    let a_true = 10f64.powf(2.0 * rng.next_f64() - 1.0);
    let beta0 = 4.0 * rng.next_f64() - 2.0;
    let beta1 = 2.0 * rng.next_f64() - 1.0;
    let groups: Vec<GroupObservation> = (0..k)
        .map(|j| {
            let v = 10f64.powf(1.6 * rng.next_f64() - 0.8);
            let mut x = vec![1.0];
            if r == 2 {
                x.push(4.0 * rng.next_f64() - 2.0);
            }
            let mean = beta0 + if r == 2 { beta1 * x[1] } else { 0.0 };
            let y = mean + (a_true + v).sqrt() * rng.next_normal();
            GroupObservation::new(format!("g{j}"), y, v, x)
        })
        .collect();
    Dataset::new(groups, r).unwrap()
}

/// Closed-form REML/MLE estimate for the equal-variance intercept case:
/// `max(0, S/(k-1) - V)`.
pub fn mle_closed_form(k: usize, v: f64, s: f64) -> f64 {
    (s / (k as f64 - 1.0) - v).max(0.0)
}

/// Positive root of the adjusted-maximum stationarity quadratic
/// `((k-1) - 2q) A^2 - (S - ((k-1) - 4q) V) A - 2q V^2 = 0`.
pub fn adm_closed_form(k: usize, v: f64, s: f64, q: f64) -> f64 {
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
