//! Conditional law of the unobserved scaled innovations of one accident
//! semester given its observed ones, under the AR(1) correlation.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dependence::ARCorrelation;
use crate::error::{Error, Result};
use crate::marginal::MarginalModel;
use crate::triangles::LossTriangle;
use crate::tweedie::CdfTable;

/// Mean `M = R12' R11^{-1} y` and covariance `V = R22 - R12' R11^{-1} R12`
/// of lags `n_i + 1..=size` given lags `1..=n_i`, where `n_i = size + 1 - i`.
pub fn conditional_innovation_params(rho: f64, i: usize, size: usize, observed: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !(2..=size).contains(&i) {
        return Err(Error::Config(format!("accident semester {i} has no unobserved lags in a size-{size} triangle")));
    }
    let n_obs = size + 1 - i;
    if observed.len() != n_obs {
        return Err(Error::Config(format!(
            "accident semester {i} has {n_obs} observed lags, got {} innovations",
            observed.len()
        )));
    }
    let r = ARCorrelation::new(rho, size)?.matrix();
    let n_un = i - 1;
    let r11 = ARCorrelation::new(rho, n_obs)?;
    let r12 = r.view((0, n_obs), (n_obs, n_un));
    let r22 = r.view((n_obs, n_obs), (n_un, n_un));
    // columns of R11^{-1} R12
    let mut a = DMatrix::zeros(n_obs, n_un);
    for c in 0..n_un {
        let col: Vec<f64> = r12.column(c).iter().copied().collect();
        a.set_column(c, &DVector::from_vec(r11.solve(&col)));
    }
    let mean = a.transpose() * DVector::from_column_slice(observed);
    let cov = r22 - r12.transpose() * &a;
    let cov = 0.5 * (&cov + cov.transpose());
    Ok((mean, cov))
}

/// Mean and lower Cholesky factor of the conditional law.
pub fn conditional_factor(rho: f64, i: usize, size: usize, observed: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (mean, cov) = conditional_innovation_params(rho, i, size, observed)?;
    let l = cov
        .cholesky()
        .ok_or_else(|| Error::Singular { step: format!("conditional covariance of accident semester {i}") })?
        .l();
    Ok((mean, l))
}

/// Law of one simulated lower cell given the observed history of its row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellLaw {
    pub mean: f64,
    pub variance: f64,
    pub zero_mass: f64,
}

/// Mean, variance and zero mass of `F^{-1}(Phi(M_a + sqrt(V_aa) Z))` for
/// lower cell `(i, j)`, by Simpson's rule over `Z` in `[-9, 9]`. The range
/// stops where the level passes the top of the cell's table, dropping the
/// table's shortfall from one.
pub fn conditional_cell_law(model: &MarginalModel, t: &LossTriangle, i: usize, j: usize) -> Result<CellLaw> {
    let size = model.size();
    let n_obs = size + 1 - i;
    if !(j > n_obs && j <= size) {
        return Err(Error::Config(format!("cell ({i}, {j}) is not in the lower triangle")));
    }
    let observed: Vec<f64> = (1..=n_obs).map(|l| model.scaled_innovation(i, l, t.ratio(i, l))).collect();
    let (mean, cov) = conditional_innovation_params(model.rho, i, size, &observed)?;
    let a = j - n_obs - 1;
    let (m, sd) = (mean[a], cov[(a, a)].sqrt());
    let table = CdfTable::new(&model.tweedie(i, j)?)?;
    let normal = Normal::standard();
    let zero_mass = normal.cdf((normal.inverse_cdf(table.params().zero_mass()) - m) / sd);
    let u_top = table.upper_level().min(1.0 - f64::EPSILON / 2.0);
    let top = ((normal.inverse_cdf(u_top) - m) / sd).min(9.0);
    let steps = 6000;
    let h = (top + 9.0) / steps as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for k in 0..=steps {
        let z = -9.0 + k as f64 * h;
        let w = if k == 0 || k == steps { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let u = normal.cdf(m + sd * z).clamp(f64::MIN_POSITIVE, u_top);
        let y = table.quantile(u)?;
        let d = w * normal.pdf(z) * h / 3.0;
        m1 += d * y;
        m2 += d * y * y;
    }
    Ok(CellLaw { mean: m1, variance: (m2 - m1 * m1).max(0.0), zero_mass })
}
