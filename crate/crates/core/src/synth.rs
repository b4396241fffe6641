//! Synthetic triangles drawn from known marginal models.
//!
//! Innovations are standard normal, cross-correlated between lines at each
//! cell and AR(1)-colored along the development lags of each accident
//! semester; cells are then mapped through the Tweedie quantile function.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dependence::ARCorrelation;
use crate::error::{Error, Result};
use crate::marginal::MarginalModel;
use crate::triangles::{LossTriangle, Portfolio};

/// Keeps quantile levels inside `(0, 1)` when a normal score is extreme.
const U_EDGE: f64 = 1e-15;

/// One triangle from `model`, with correlation `model.rho` across lags.
pub fn simulate_triangle<R: Rng + ?Sized>(model: &MarginalModel, premiums: Vec<f64>, rng: &mut R) -> Result<LossTriangle> {
    let corr = DMatrix::identity(1, 1);
    let mut p = simulate_portfolio(std::slice::from_ref(model), vec![premiums], &corr, rng)?;
    Ok(p.lines.remove(0))
}

/// One triangle per model. `cross` is the correlation of whitened innovations
/// between lines at the same cell.
pub fn simulate_portfolio<R: Rng + ?Sized>(
    models: &[MarginalModel],
    premiums: Vec<Vec<f64>>,
    cross: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Portfolio> {
    let k = models.len();
    if k == 0 || premiums.len() != k || cross.nrows() != k || cross.ncols() != k {
        return Err(Error::Config("need one premium vector and one correlation row per model".into()));
    }
    let size = models[0].size();
    if models.iter().any(|m| m.size() != size) || premiums.iter().any(|p| p.len() != size) {
        return Err(Error::Config("all models and premium vectors must share the triangle size".into()));
    }
    let chol = cross
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Config("cross-line correlation is not positive definite".into()))?
        .l();
    let normal = Normal::standard();

    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); k];
    for i in 1..=size {
        let n = size + 1 - i;
        // eps[line][lag]
        let mut eps = vec![vec![0.0; n]; k];
        for j in 0..n {
            let raw: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            for a in 0..k {
                eps[a][j] = (0..=a).map(|b| chol[(a, b)] * raw[b]).sum();
            }
        }
        for (a, m) in models.iter().enumerate() {
            let z = ARCorrelation::new(m.rho, n)?.color(&eps[a]);
            for (j, &zj) in (1..=n).zip(&z) {
                let u = normal.cdf(zj).clamp(U_EDGE, 1.0 - U_EDGE);
                ratios[a].push(m.tweedie(i, j)?.quantile(u)?);
            }
        }
    }
    let lines = models
        .iter()
        .zip(premiums)
        .zip(ratios)
        .map(|((m, p), r)| LossTriangle::from_ratios(m.line_id.clone(), p, &r))
        .collect::<Result<Vec<_>>>()?;
    Portfolio::new(lines)
}
