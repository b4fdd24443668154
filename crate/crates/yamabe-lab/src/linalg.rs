//! Tridiagonal kernels shared by the solvers.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("tridiagonal system is numerically singular at row {row}")]
    Singular { row: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Square tridiagonal matrix. `lower[i]` couples row `i + 1` to column `i`,
/// `upper[i]` couples row `i` to column `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Row-wise sum of |A_ij x_j|, the natural scale for backward-error residuals.
    pub fn abs_apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = (self.diag[i] * x[i]).abs();
            if i > 0 {
                s += (self.lower[i - 1] * x[i - 1]).abs();
            }
            if i + 1 < n {
                s += (self.upper[i] * x[i + 1]).abs();
            }
            y[i] = s;
        }
        y
    }

    /// Replace row `i` by the identity row.
    pub fn pin_row(&mut self, i: usize) {
        self.diag[i] = 1.0;
        if i > 0 {
            self.lower[i - 1] = 0.0;
        }
        if i + 1 < self.dim() {
            self.upper[i] = 0.0;
        }
    }

    /// Thomas algorithm without pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(LinalgError::Dimension { expected: n, got: rhs.len() });
        }
        // Pivots are compared with their own row so graded systems whose rows
        // span many decades are not mistaken for singular ones.
        let row_scale = |i: usize| {
            let mut s = self.diag[i].abs();
            if i > 0 {
                s += self.lower[i - 1].abs();
            }
            if i + 1 < n {
                s += self.upper[i].abs();
            }
            s * f64::EPSILON * 1e-4
        };
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0];
        if !(piv.abs() > row_scale(0)) || !piv.is_finite() {
            return Err(LinalgError::Singular { row: 0 });
        }
        if n > 1 {
            c[0] = self.upper[0] / piv;
        }
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if !(piv.abs() > row_scale(i)) || !piv.is_finite() {
                return Err(LinalgError::Singular { row: i });
            }
            if i + 1 < n {
                c[i] = self.upper[i] / piv;
            }
            d[i] = (rhs[i] - self.lower[i - 1] * d[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}

/// Symmetric tridiagonal matrix given by its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    /// Number of eigenvalues strictly below `x` (Sturm count via LDLᵀ).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let q_prev = if q == 0.0 { f64::MIN_POSITIVE } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q_prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Smallest eigenvalue by bisection, with a unit eigenvector from inverse iteration.
    pub fn smallest_eigenpair(&self) -> (f64, Vec<f64>) {
        let (mut lo, mut hi) = self.gershgorin();
        let width = (hi - lo).abs().max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * width {
                break;
            }
        }
        let lambda = 0.5 * (lo + hi);
        (lambda, self.inverse_iteration(lambda, width))
    }

    fn inverse_iteration(&self, lambda: f64, width: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shift = lambda - 1e-10 * width;
        let mut a = Tridiagonal {
            lower: self.off.clone(),
            diag: self.diag.iter().map(|d| d - shift).collect(),
            upper: self.off.clone(),
        };
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        for _ in 0..8 {
            let y = match a.solve(&x) {
                Ok(y) => y,
                Err(_) => {
                    for d in &mut a.diag {
                        *d -= 1e-12 * width;
                    }
                    continue;
                }
            };
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                break;
            }
            x = y.iter().map(|v| v / norm).collect();
        }
        // Fix the sign so the ground state is nonnegative on average.
        if x.iter().sum::<f64>() < 0.0 {
            for v in &mut x {
                *v = -*v;
            }
        }
        x
    }
}
