//! Small direct solvers for the banded systems produced by the
//! finite-difference discretisations.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Thomas algorithm for a tridiagonal system.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is ignored),
/// `upper[i]` multiplies `x[i+1]` (so `upper[n-1]` is ignored). The right
/// hand side is overwritten by the solution. No pivoting: intended for
/// diagonally dominant M-matrices.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
) -> Result<(), LinalgError> {
    let n = diag.len();
    for len in [lower.len(), upper.len(), rhs.len()] {
        if len != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: len,
            });
        }
    }
    if n == 0 {
        return Ok(());
    }
    let mut c_prime = vec![0.0; n];
    if diag[0] == 0.0 {
        return Err(LinalgError::ZeroPivot(0));
    }
    c_prime[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c_prime[i - 1];
        if denom == 0.0 {
            return Err(LinalgError::ZeroPivot(i));
        }
        c_prime[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
    Ok(())
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored with
/// `kl` extra super-diagonals of room for the fill-in caused by row pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` to entry `(i, j)`. Panics when `(i, j)` is outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside the band"
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Computes `y = A x` for the unfactored matrix.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Gaussian elimination with partial pivoting, consuming the matrix.
    /// The solution overwrites `rhs`.
    pub fn solve(mut self, rhs: &mut [f64]) -> Result<(), LinalgError> {
        let n = self.n;
        if rhs.len() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: rhs.len(),
            });
        }
        let reach = self.ku + self.kl;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(LinalgError::ZeroPivot(k));
            }
            let cmax = (k + reach).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
                rhs.swap(k, p);
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=last {
                let ir = self.idx(r, k);
                let f = self.data[ir] / pivot;
                if f == 0.0 {
                    continue;
                }
                self.data[ir] = 0.0;
                for c in k + 1..=cmax {
                    let kc = self.data[self.idx(k, c)];
                    let rc = self.idx(r, c);
                    self.data[rc] -= f * kc;
                }
                rhs[r] -= f * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let cmax = (k + reach).min(n - 1);
            let mut acc = rhs[k];
            for c in k + 1..=cmax {
                acc -= self.data[self.idx(k, c)] * rhs[c];
            }
            rhs[k] = acc / self.data[self.idx(k, k)];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_known_solution() {
        // -x'' = 2 on 5 nodes, exact quadratic solution
        let n = 5;
        let x: Vec<f64> = (0..n).map(|i| (i as f64) * (4.0 - i as f64)).collect();
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![2.0; n];
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let u = if i + 1 < n { x[i + 1] } else { 0.0 };
                2.0 * x[i] - l - u
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs).unwrap();
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn band_solver_needs_pivoting() {
        // zero on the diagonal forces a row swap
        let mut m = BandMatrix::zeros(4, 1, 1);
        let rows = [
            [0.0, 1.0, 0.0, 0.0],
            [2.0, 1.0, 1.0, 0.0],
            [0.0, 1.0, 3.0, 1.0],
            [0.0, 0.0, 1.0, 4.0],
        ];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    m.add(i, j, *v);
                }
            }
        }
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs = m.mul_vec(&x);
        m.solve(&mut rhs).unwrap();
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn singular_band_reports_zero_pivot() {
        let m = BandMatrix::zeros(3, 1, 1);
        let mut rhs = vec![1.0; 3];
        assert!(matches!(m.solve(&mut rhs), Err(LinalgError::ZeroPivot(0))));
    }
}
