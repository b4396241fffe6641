//! Grid search for the Tweedie index.

use rayon::prelude::*;

use super::{fit, DispersionMethod, FitOptions};
use crate::error::{Error, Result};
use crate::triangles::LossTriangle;
use crate::tweedie::check_p;

/// `{1.105, 1.110, ..., 1.900}`.
pub fn default_p_grid() -> Vec<f64> {
    (0..160).map(|k| (1105 + 5 * k) as f64 / 1000.0).collect()
}

/// Log-likelihood of every grid point, `None` where the fit failed.
#[derive(Debug, Clone)]
pub struct PSelection {
    pub p: f64,
    pub log_likelihood: f64,
    pub profile: Vec<(f64, Option<f64>)>,
}

/// Index with the largest independence log-likelihood; ties go to the
/// smaller index.
pub fn select_p(t: &LossTriangle, grid: &[f64]) -> Result<f64> {
    Ok(select_p_with(t, grid, &FitOptions::default())?.p)
}

/// As [`select_p`], reporting the whole profile. Each grid point is fitted
/// from scratch with rho held at zero and maximum-likelihood dispersion;
/// `base` supplies the iteration limits.
pub fn select_p_with(t: &LossTriangle, grid: &[f64], base: &FitOptions) -> Result<PSelection> {
    if grid.is_empty() {
        return Err(Error::Config("p grid is empty".into()));
    }
    for &p in grid {
        check_p(p)?;
    }
    let options = FitOptions {
        fixed_rho: Some(0.0),
        dispersion: DispersionMethod::Ml,
        ..base.clone()
    };
    let profile: Vec<(f64, Option<f64>)> = grid
        .par_iter()
        .map(|&p| match fit(t, p, &options) {
            Ok(m) => (p, Some(m.diagnostics.log_likelihood)),
            Err(e) => {
                log::warn!("line {}: fit at p = {p} failed: {e}", t.line_id);
                (p, None)
            }
        })
        .collect();
    let mut best: Option<(f64, f64)> = None;
    let mut order: Vec<&(f64, Option<f64>)> = profile.iter().collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &&(p, ll) in &order {
        if let Some(ll) = ll.filter(|v| v.is_finite()) {
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((p, ll));
            }
        }
    }
    let (p, log_likelihood) = best.ok_or_else(|| {
        Error::Estimation(format!("line {}: the fit failed at every grid value of p", t.line_id))
    })?;
    Ok(PSelection { p, log_likelihood, profile })
}
