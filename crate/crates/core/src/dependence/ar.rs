//! AR(1) correlation matrices `R(rho)` with entries `rho^|a-b|`.
//!
//! The Cholesky factor, its inverse and the inverse matrix are all available
//! in closed form, so nothing here factorizes numerically.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ARCorrelation {
    rho: f64,
    dim: usize,
}

impl ARCorrelation {
    pub fn new(rho: f64, dim: usize) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "AR(1) correlation must satisfy |rho| < 1, got {rho}"
            )));
        }
        if dim == 0 {
            return Err(Error::Domain("AR(1) correlation needs dimension >= 1".into()));
        }
        Ok(Self { rho, dim })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |a, b| self.rho.powi((a as i32 - b as i32).abs()))
    }

    /// Lower Cholesky factor: first column `rho^a`, below-diagonal entries
    /// `rho^(a-b) sqrt(1 - rho^2)` elsewhere.
    pub fn cholesky(&self) -> DMatrix<f64> {
        let s = (1.0 - self.rho * self.rho).sqrt();
        DMatrix::from_fn(self.dim, self.dim, |a, b| {
            if b > a {
                0.0
            } else if b == 0 {
                self.rho.powi(a as i32)
            } else {
                self.rho.powi((a - b) as i32) * s
            }
        })
    }

    /// `L^{-1} y`: `u_1 = y_1`, `u_a = (y_a - rho y_{a-1}) / sqrt(1 - rho^2)`.
    pub fn whiten(&self, y: &[f64]) -> Vec<f64> {
        let s = (1.0 - self.rho * self.rho).sqrt();
        (0..y.len())
            .map(|a| if a == 0 { y[0] } else { (y[a] - self.rho * y[a - 1]) / s })
            .collect()
    }

    /// `L u`, the inverse of [`whiten`](Self::whiten).
    pub fn color(&self, u: &[f64]) -> Vec<f64> {
        let s = (1.0 - self.rho * self.rho).sqrt();
        let mut y = Vec::with_capacity(u.len());
        for a in 0..u.len() {
            let v = if a == 0 { u[0] } else { self.rho * y[a - 1] + s * u[a] };
            y.push(v);
        }
        y
    }

    /// Entry `(a, b)` of `R^{-1}`, which is tridiagonal.
    pub fn inverse_entry(&self, a: usize, b: usize) -> f64 {
        if self.dim == 1 {
            return if a == b { 1.0 } else { 0.0 };
        }
        let c = 1.0 / (1.0 - self.rho * self.rho);
        if a == b {
            if a == 0 || a == self.dim - 1 {
                c
            } else {
                c * (1.0 + self.rho * self.rho)
            }
        } else if a.abs_diff(b) == 1 {
            -c * self.rho
        } else {
            0.0
        }
    }

    /// `R^{-1} x`.
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|a| {
                let mut v = self.inverse_entry(a, a) * x[a];
                if a > 0 {
                    v += self.inverse_entry(a, a - 1) * x[a - 1];
                }
                if a + 1 < n {
                    v += self.inverse_entry(a, a + 1) * x[a + 1];
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    #[test]
    fn closed_forms_match_numerics() {
        for &rho in &[-0.9, -0.3, 0.0, 0.5, 0.999] {
            for dim in 1..=30 {
                let r = ARCorrelation::new(rho, dim).unwrap();
                let m = r.matrix();
                let l = m.clone().cholesky().expect("positive definite").l();
                assert!((&l - r.cholesky()).abs().max() < 1e-9, "rho={rho} dim={dim}");
                let inv = m.try_inverse().unwrap();
                let tri = DMatrix::from_fn(dim, dim, |a, b| r.inverse_entry(a, b));
                assert!((&inv - &tri).abs().max() < 1e-6 * inv.abs().max(), "rho={rho} dim={dim}");
            }
        }
        assert!(ARCorrelation::new(1.0, 3).is_err());
        assert!(ARCorrelation::new(-1.2, 3).is_err());
    }

    proptest! {
        #[test]
        fn whiten_color_round_trip(rho in -0.999f64..0.999, y in proptest::collection::vec(-5.0f64..5.0, 1..30)) {
            let r = ARCorrelation::new(rho, y.len()).unwrap();
            let u = r.whiten(&y);
            let l = r.cholesky();
            let back = &l * DVector::from_column_slice(&u);
            for (a, b) in back.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let c = r.color(&u);
            for (a, b) in c.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
