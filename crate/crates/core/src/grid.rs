//! Uniform 1D grids, trapezoid quadrature and tridiagonal linear algebra.
//!
//! The second-difference operator uses ghost nodes mirrored across the
//! boundary, so that `g''(x_0) ~ 2 (g_1 - g_0) / h^2`. Paired with trapezoid
//! weights this operator is self-adjoint and conserves mass exactly.

use crate::error::{Error, Result};
use crate::model::Interval;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub domain: Interval,
    pub n: usize,
}

impl Grid {
    pub fn uniform(domain: Interval, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Config(format!("grid needs at least 3 nodes, got {n}")));
        }
        Ok(Grid { domain, n })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.domain.len() / (self.n - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.domain.max
        } else {
            self.domain.min + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.weight(i))
            .sum()
    }

    /// Cell index `i` and fraction `theta` with `x = x_i + theta h`.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = ((x - self.domain.min) / self.h()).clamp(0.0, (self.n - 1) as f64);
        let i = (s.floor() as usize).min(self.n - 2);
        (i, s - i as f64)
    }

    pub fn interpolate_linear(&self, values: &[f64], x: f64) -> f64 {
        let (i, t) = self.locate(x);
        values[i] * (1.0 - t) + values[i + 1] * t
    }

    /// Four-point Lagrange interpolation (fourth order away from the ends).
    pub fn interpolate_cubic(&self, values: &[f64], x: f64) -> f64 {
        let (i, _) = self.locate(x);
        let j0 = i.saturating_sub(1).min(self.n - 4);
        let s = (x - self.x(j0)) / self.h();
        let mut acc = 0.0;
        for a in 0..4 {
            let mut l = 1.0;
            for b in 0..4 {
                if a != b {
                    l *= (s - b as f64) / (a as f64 - b as f64);
                }
            }
            acc += l * values[j0 + a];
        }
        acc
    }

    /// `m * g''` with mirrored ghost nodes.
    pub fn apply_laplacian(&self, m: f64, g: &[f64], out: &mut [f64]) {
        let n = self.n;
        let k = m / (self.h() * self.h());
        out[0] = 2.0 * k * (g[1] - g[0]);
        for i in 1..n - 1 {
            out[i] = k * (g[i + 1] - 2.0 * g[i] + g[i - 1]);
        }
        out[n - 1] = 2.0 * k * (g[n - 2] - g[n - 1]);
    }

    /// Tridiagonal coefficients `(lower, diag, upper)` of `m * D`.
    pub fn laplacian_bands(&self, m: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n;
        let k = m / (self.h() * self.h());
        let mut lower = vec![k; n];
        let diag = vec![-2.0 * k; n];
        let mut upper = vec![k; n];
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        upper[0] = 2.0 * k;
        lower[n - 1] = 2.0 * k;
        (lower, diag, upper)
    }
}

/// Solve a tridiagonal system with the Thomas algorithm.
///
/// `lower[0]` and `upper[n-1]` are ignored. Fails on a vanishing pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::numerical("tridiagonal solve hit a zero pivot", 0.0));
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::numerical("tridiagonal solve hit a zero pivot", 0.0));
        }
        if i + 1 < n {
            c[i] = upper[i] / pivot;
        }
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_linear_functions() {
        let g = Grid::uniform(Interval::UNIT, 11).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((g.integrate(&v) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn laplacian_conserves_mass() {
        let g = Grid::uniform(Interval::new(-1.0, 2.0).unwrap(), 37).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x).sin() + x * x).collect();
        let mut out = vec![0.0; g.n];
        g.apply_laplacian(0.7, &v, &mut out);
        assert!(g.integrate(&out).abs() < 1e-12);
    }

    #[test]
    fn thomas_matches_band_product() {
        let g = Grid::uniform(Interval::UNIT, 9).unwrap();
        let (l, mut d, u) = g.laplacian_bands(0.1);
        for di in d.iter_mut() {
            *di -= 1.0;
        }
        let x: Vec<f64> = (0..9).map(|i| (i as f64).cos()).collect();
        let mut rhs = vec![0.0; 9];
        for i in 0..9 {
            rhs[i] = d[i] * x[i];
            if i > 0 {
                rhs[i] += l[i] * x[i - 1];
            }
            if i + 1 < 9 {
                rhs[i] += u[i] * x[i + 1];
            }
        }
        let sol = solve_tridiagonal(&l, &d, &u, &rhs).unwrap();
        for (a, b) in sol.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let g = Grid::uniform(Interval::UNIT, 17).unwrap();
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let v: Vec<f64> = g.nodes().iter().map(|&x| f(x)).collect();
        for x in [0.0, 0.013, 0.5, 0.77, 0.999, 1.0] {
            assert!((g.interpolate_cubic(&v, x) - f(x)).abs() < 1e-13);
        }
    }
}
