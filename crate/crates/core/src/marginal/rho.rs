//! Lag-correlation update from scaled innovations.

use super::MarginalModel;
use crate::error::{Error, Result};
use crate::triangles::LossTriangle;

/// Bound keeping `R(rho)` positive definite.
pub const RHO_CLIP: f64 = 0.999;

/// `sum Y~_ij Y~_i,j-1 / sum Y~_i,j-1^2` over `i = 1..I-1`, `j = 2..n_i`,
/// clipped to `[-0.999, 0.999]`.
pub fn update_rho(model: &MarginalModel, t: &LossTriangle) -> Result<f64> {
    update_rho_with(model, t)
}

pub(crate) fn update_rho_with(model: &MarginalModel, t: &LossTriangle) -> Result<f64> {
    let index = t.index();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..index.semesters() {
        let mut prev = model.scaled_innovation(i, 1, t.ratio(i, 1));
        for j in 2..=index.row_len(i) {
            let cur = model.scaled_innovation(i, j, t.ratio(i, j));
            num += cur * prev;
            den += prev * prev;
            prev = cur;
        }
    }
    ratio_estimate(num, den)
}

pub(crate) fn ratio_estimate(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::Estimation(
            "lag correlation undefined: all lagged innovations are zero".into(),
        ));
    }
    Ok((num / den).clamp(-RHO_CLIP, RHO_CLIP))
}
