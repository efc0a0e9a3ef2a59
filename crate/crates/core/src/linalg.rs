//! Minimal dense symmetric linear algebra for the r x r GLS normal
//! equations.  `r` is the covariate count, typically 1 or 2, so plain
//! `Vec`-backed storage and an unblocked Cholesky are all that is needed.
//! No k x k matrix is ever formed; callers accumulate `X' W X` in
//! O(k r^2).

/// Dense symmetric matrix stored row-major (full storage for simplicity).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    a: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    /// Rank-one update `self += w * x x'`.
    pub fn add_outer(&mut self, x: &[f64], w: f64) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let wi = w * x[i];
            for j in 0..self.n {
                self.a[i * self.n + j] += wi * x[j];
            }
        }
    }

    /// Quadratic form `x' self x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for j in 0..self.n {
                row += self.get(i, j) * x[j];
            }
            s += x[i] * row;
        }
        s
    }

    /// Cholesky factor L (lower triangular, row-major) with `self = L L'`.
    /// Returns `None` when the matrix is not numerically positive definite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Cholesky { n, l })
    }

    /// 1-norm condition estimate via an explicit inverse (fine for tiny n).
    /// `None` when the matrix is not positive definite.
    pub fn cond_1norm(&self) -> Option<f64> {
        let ch = self.cholesky()?;
        let inv = ch.inverse();
        Some(self.norm_1() * inv.norm_1())
    }

    fn norm_1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Cholesky factorization of a positive definite `SymMatrix`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                y[i] = y[i] - self.l[i * n + j] * y[j];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                y[i] = y[i] - self.l[j * n + i] * y[j];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// `ln det A = 2 sum ln L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }

    /// Explicit inverse, column by column.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.n;
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv.a[i * n + j] = col[i];
            }
        }
        // Symmetrize to remove round-off skew.
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, m);
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_2x2() {
        let mut m = SymMatrix::zeros(2);
        m.set(0, 0, 4.0);
        m.set(0, 1, 1.0);
        m.set(1, 1, 3.0);
        let ch = m.cholesky().unwrap();
        let x = ch.solve(&[1.0, 2.0]);
        // 4x + y = 1, x + 3y = 2 -> x = 1/11, y = 7/11
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
        assert!((ch.log_det() - (11.0f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn inverse_matches_solve() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 0, 5.0);
        m.set(1, 1, 6.0);
        m.set(2, 2, 7.0);
        m.set(0, 1, 1.0);
        m.set(0, 2, 0.5);
        m.set(1, 2, 2.0);
        let ch = m.cholesky().unwrap();
        let inv = ch.inverse();
        for j in 0..3 {
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            let x = ch.solve(&e);
            for i in 0..3 {
                assert!((inv.get(i, j) - x[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_detected() {
        let mut m = SymMatrix::zeros(2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 1.0);
        m.set(1, 1, 1.0);
        assert!(m.cholesky().is_none());
    }

    #[test]
    fn quad_form_value() {
        let mut m = SymMatrix::zeros(2);
        m.set(0, 0, 2.0);
        m.set(0, 1, 1.0);
        m.set(1, 1, 3.0);
        // [1,2] M [1,2]' = 2 + 2*2 + 3*4 = 18
        assert_eq!(m.quad_form(&[1.0, 2.0]), 18.0);
    }
}
