//! Shared numerics: standard-normal functions, bounded scalar search,
//! sign-change root refinement, and fixed-order summation.

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF via the complementary error function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Natural log of the Gamma function.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Inverse standard normal CDF: rational approximation (Acklam) followed
/// by one Newton polish against `normal_cdf`, giving ~1e-15 relative
/// accuracy away from the extreme tails.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile requires p in (0,1), got {p}");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // One Newton step against the accurate CDF.
    let err = normal_cdf(x) - p;
    x - err / normal_pdf(x)
}

/// Fixed-order pairwise summation; deterministic for a given slice order
/// and more accurate than naive left-to-right accumulation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Maximize `f` on `[lo, hi]` by Brent's method (golden section with
/// parabolic steps).  Returns `(x, f(x))`; `rel_tol` controls the final
/// bracket width `rel_tol * |x| + tiny`.
pub fn brent_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    const PHI_COMP: f64 = 0.381_966_011_250_105_1; // 2 - golden ratio
    const TINY: f64 = 1e-300;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + PHI_COMP * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = rel_tol * x.abs() + TINY;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            // Parabolic fit through (v, w, x).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if (u - a) < tol2 || (b - u) < tol2 {
                    d = if m > x { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = PHI_COMP * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + if d > 0.0 { tol1 } else { -tol1 } };
        let fu = f(u);
        if fu >= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu >= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu >= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Maximize a black-box callable on `(lo, hi)`: coarse interior scan to
/// bracket the global maximum, Brent within the bracketing cell, then two
/// finite-difference Newton polish steps.  Deterministic for fixed inputs.
pub fn scan_brent_max<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    scan_points: usize,
    rel_tol: f64,
) -> (f64, f64) {
    let n = scan_points.max(8);
    let h = (hi - lo) / (n as f64 + 1.0);
    let mut best_i = 0usize;
    let mut best_f = f64::NEG_INFINITY;
    for i in 1..=n {
        let x = lo + h * i as f64;
        let fx = f(x);
        if fx > best_f {
            best_f = fx;
            best_i = i;
        }
    }
    let a = lo + h * (best_i as f64 - 1.0);
    let b = lo + h * (best_i as f64 + 1.0);
    let (mut x, mut fx) = brent_max(&mut f, a, b, rel_tol);

    // FD-Newton polish sharpens the argmax below Brent's noise floor.
    // Function values cannot resolve O(eps) improvements near a smooth
    // maximum, so steps are accepted on gradient information alone,
    // guarded by a trust region.
    for _ in 0..2 {
        let step = (1e-6 * x.abs()).max(1e-9).min(0.25 * (hi - x).min(x - lo));
        if step <= 0.0 {
            break;
        }
        let fp = f(x + step);
        let fm = f(x - step);
        let g1 = (fp - fm) / (2.0 * step);
        let g2 = (fp - 2.0 * fx + fm) / (step * step);
        if !(g2 < 0.0) {
            break;
        }
        let delta = -g1 / g2;
        if !delta.is_finite() || delta.abs() > 8.0 * step {
            break;
        }
        let x_new = x + delta;
        if !(x_new > lo && x_new < hi) {
            break;
        }
        x = x_new;
        fx = f(x_new);
    }
    (x, fx)
}

/// Refine a sign change of `g` on `[a, b]` (`g(a)` and `g(b)` of opposite
/// sign) by bisection.  The midpoint is geometric when the interval spans
/// several octaves of positive values, which keeps relative precision for
/// roots near zero.
pub fn bisect_sign_change<F: FnMut(f64) -> f64>(
    mut g: F,
    mut a: f64,
    mut b: f64,
    mut ga: f64,
) -> f64 {
    for _ in 0..220 {
        let mid = if a > 0.0 && b / a > 4.0 { (a * b).sqrt() } else { 0.5 * (a + b) };
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
        if (b - a).abs() <= 1e-14 * a.abs().max(b.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}
