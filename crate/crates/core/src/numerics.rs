//! Small linear-algebra and interpolation kernels shared by the solvers.

use crate::error::{Result, VortexError};

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` couples row `i` to `i-1` (unused for `i = 0`), `upper[i]`
/// couples row `i` to `i+1`. The matrix must not need pivoting (diagonally
/// dominant or SPD).
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the fill-in produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major: row `i` stores columns `i - kl ..= i + kl + ku`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * Self::width_of(kl, ku)],
        }
    }

    fn width_of(kl: usize, ku: usize) -> usize {
        2 * kl + ku + 1
    }

    fn width(&self) -> usize {
        Self::width_of(self.kl, self.ku)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width() + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// Zeroes row `i` and puts 1 on the diagonal.
    pub fn pin_row(&mut self, i: usize) {
        let w = self.width();
        self.data[i * w..(i + 1) * w]
            .iter_mut()
            .for_each(|x| *x = 0.0);
        self.set(i, i, 1.0);
    }

    /// Zeroes column `j` except the diagonal.
    pub fn clear_column(&mut self, j: usize) {
        let lo = j.saturating_sub(self.ku);
        let hi = (j + self.kl).min(self.n - 1);
        for i in lo..=hi {
            if i != j {
                self.set(i, j, 0.0);
            }
        }
    }

    fn row_range(&self, i: usize) -> (usize, usize) {
        (i.saturating_sub(self.kl), (i + self.ku).min(self.n - 1))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (lo, hi) = self.row_range(i);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Scales every row to unit max-norm; returns the scale factors.
    pub fn equilibrate_rows(&mut self) -> Vec<f64> {
        let w = self.width();
        let mut scales = vec![1.0; self.n];
        for (i, s) in scales.iter_mut().enumerate() {
            let row = &mut self.data[i * w..(i + 1) * w];
            let m = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if m > 0.0 {
                *s = 1.0 / m;
                row.iter_mut().for_each(|v| *v *= *s);
            }
        }
        scales
    }

    /// Gaussian elimination with partial pivoting; solves `A x = rhs` in
    /// place and consumes the factorization.
    pub fn solve(mut self, rhs: &mut [f64]) -> Result<()> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let ufill = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(VortexError::Singular(k));
            }
            let cmax = (k + ufill).min(n - 1);
            if piv != k {
                for j in k..=cmax {
                    let a = self.slot(k, j);
                    let b = self.slot(piv, j);
                    self.data.swap(a, b);
                }
                rhs.swap(k, piv);
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last {
                let s = self.slot(i, k);
                let f = self.data[s] / pivot;
                if f == 0.0 {
                    continue;
                }
                self.data[s] = 0.0;
                for j in k + 1..=cmax {
                    let src = self.data[self.slot(k, j)];
                    if src != 0.0 {
                        let d = self.slot(i, j);
                        self.data[d] -= f * src;
                    }
                }
                rhs[i] -= f * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let cmax = (k + ufill).min(n - 1);
            let mut acc = rhs[k];
            for j in k + 1..=cmax {
                acc -= self.data[self.slot(k, j)] * rhs[j];
            }
            rhs[k] = acc / self.data[self.slot(k, k)];
        }
        Ok(())
    }
}

/// Piecewise Lagrange interpolation of degree 5: on `[x_i, x_{i+1}]` the
/// polynomial through the six nodes `i-2 ..= i+3` (shifted at the ends).
/// Continuous, with derivative jumps at the nodes of the size of the
/// interpolation error.
#[derive(Debug, Clone)]
pub struct LocalLagrange {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LocalLagrange {
    pub const POINTS: usize = 6;

    pub fn new(x: &[f64], y: &[f64]) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(x.len() >= Self::POINTS, "need at least six nodes");
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|v| *v <= t).clamp(1, n - 1) - 1;
        let start = i.saturating_sub(2).min(n - Self::POINTS);
        let xs = &self.x[start..start + Self::POINTS];
        let ys = &self.y[start..start + Self::POINTS];
        let mut sum = 0.0;
        for j in 0..Self::POINTS {
            let mut l = 1.0;
            for m in 0..Self::POINTS {
                if m != j {
                    l *= (t - xs[m]) / (xs[j] - xs[m]);
                }
            }
            sum += l * ys[j];
        }
        sum
    }
}

/// Natural cubic spline through `(x_i, y_i)`.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 3 && y.len() == n);
        let mut lower = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            lower[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            upper[i] = h1 / 6.0;
            rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m: rhs,
        }
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value, first and second derivative at `t`.
    pub fn eval_all(&self, t: f64) -> (f64, f64, f64) {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0
            + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_all(t).0
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn local_lagrange_reproduces_quintics() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 / 19.0).powi(2) * 3.0).collect();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t.powi(3) - 0.1 * t.powi(5);
        let y: Vec<f64> = x.iter().map(|t| f(*t)).collect();
        let l = LocalLagrange::new(&x, &y);
        for t in [0.0, 0.013, 0.4, 1.7, 2.99, 3.0] {
            assert!((l.eval(t) - f(t)).abs() < 1e-11, "{t}");
        }
        assert_eq!(l.eval(x[7]), y[7]);
    }

    use super::*;

    #[test]
    fn band_solve_matches_dense() {
        // pentadiagonal, non-symmetric, needs pivoting on row 0
        let n = 9;
        let mut a = BandMatrix::zeros(n, 2, 2);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                let v = if i == j && i == 0 {
                    1e-3
                } else {
                    1.0 + ((3 * i + 7 * j) % 5) as f64 - if i == j { 0.0 } else { 2.5 }
                };
                a.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 0.1).collect();
        let mut rhs: Vec<f64> = dense
            .iter()
            .map(|row| row.iter().zip(&x_true).map(|(a, x)| a * x).sum())
            .collect();
        assert!(a
            .matvec(&x_true)
            .iter()
            .zip(&rhs)
            .all(|(p, q)| (p - q).abs() < 1e-14));
        a.solve(&mut rhs).unwrap();
        for (x, t) in rhs.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-11, "{x} vs {t}");
        }
    }

    #[test]
    fn singular_band_reported() {
        let a = BandMatrix::zeros(4, 1, 1);
        let mut rhs = vec![1.0; 4];
        assert!(matches!(a.solve(&mut rhs), Err(VortexError::Singular(0))));
    }

    #[test]
    fn spline_reproduces_cubic_interior() {
        let x: Vec<f64> = (0..=200)
            .map(|i| (i as f64 / 200.0).powi(2) * 3.0)
            .collect();
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let s = CubicSpline::natural(&x, &y);
        let (v, d, dd) = s.eval_all(1.3);
        assert!((v - 1.3f64.sin()).abs() < 1e-7);
        assert!((d - 1.3f64.cos()).abs() < 1e-5);
        assert!((dd + 1.3f64.sin()).abs() < 1e-3);
    }
}
