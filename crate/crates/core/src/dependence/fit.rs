//! Maximum pseudo-likelihood fit of a bivariate copula.
//!
//! For each integer `nu` in `1..=30` the log pseudo-likelihood is maximized
//! over rho by Brent's method; the best `(nu, rho)` is kept. The t copula is
//! retained only if the likelihood-ratio statistic against independence
//! exceeds the 95% point of chi-squared with two degrees of freedom.

use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use super::copula::{t_dist, CopulaFamily, TLogDensity, MAX_NU};
use crate::error::{Error, Result};
use crate::optim::brent_min;

/// 95% point of chi-squared(2).
pub const LR_CRITICAL: f64 = 5.991_464_547_107_979;
pub const MIN_PAIRS: usize = 30;
const RHO_BOUND: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    #[serde(flatten)]
    pub family: CopulaFamily,
    /// Log pseudo-likelihood of the selected family (0 for independence).
    #[serde(default)]
    pub log_likelihood: f64,
    /// Twice the best t-copula log pseudo-likelihood.
    #[serde(default)]
    pub lr_statistic: f64,
    #[serde(default)]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

impl CopulaSpec {
    pub fn independence() -> Self {
        CopulaSpec { family: CopulaFamily::Independence, log_likelihood: 0.0, lr_statistic: 0.0, n: 0, rho_se: None, p_value: None }
    }
}

/// t quantiles of the data for one `nu`, with the cached log terms.
pub(crate) struct Latent {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    lx: Vec<f64>,
    ly: Vec<f64>,
}

impl Latent {
    pub fn new(nu: u32, u: &[f64], v: &[f64]) -> Self {
        let t = t_dist(nu);
        let x: Vec<f64> = u.iter().map(|&a| t.inverse_cdf(a)).collect();
        let y: Vec<f64> = v.iter().map(|&a| t.inverse_cdf(a)).collect();
        Self::from_quantiles(nu, x, y)
    }

    pub fn from_quantiles(nu: u32, x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = nu as f64;
        let lx = x.iter().map(|a| (a * a / n).ln_1p()).collect();
        let ly = y.iter().map(|a| (a * a / n).ln_1p()).collect();
        Latent { x, y, lx, ly }
    }

    pub fn log_likelihood(&self, nu: u32, rho: f64) -> f64 {
        let d = TLogDensity::new(nu, rho);
        (0..self.x.len()).map(|k| d.eval_cached(self.x[k], self.y[k], self.lx[k], self.ly[k])).sum()
    }

    /// `(rho, log-likelihood)` maximizing over rho.
    pub fn profile(&self, nu: u32) -> (f64, f64) {
        let (rho, neg) = brent_min(|r| -self.log_likelihood(nu, r), -RHO_BOUND, RHO_BOUND, 1e-9, 200);
        (rho, -neg)
    }

    /// Standard error of rho from the observed information at fixed `nu`.
    pub fn rho_se(&self, nu: u32, rho: f64) -> Option<f64> {
        let h = 1e-4 * (1.0 - rho.abs()).max(1e-3);
        let (lo, hi) = (rho - h, rho + h);
        if lo <= -1.0 || hi >= 1.0 {
            return None;
        }
        let d2 = (self.log_likelihood(nu, hi) - 2.0 * self.log_likelihood(nu, rho) + self.log_likelihood(nu, lo)) / (h * h);
        (d2 < 0.0).then(|| (-1.0 / d2).sqrt())
    }
}

fn check_pairs(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Config("copula fit needs paired samples".into()));
    }
    if u.len() < MIN_PAIRS {
        return Err(Error::Estimation(format!("copula fit needs at least {MIN_PAIRS} pairs, got {}", u.len())));
    }
    if u.iter().chain(v).any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::Domain("pseudo-uniforms must lie strictly inside (0, 1)".into()));
    }
    Ok(())
}

/// Fits the t copula over the integer `nu` grid and screens it against
/// independence.
pub fn fit_bivariate(u: &[f64], v: &[f64]) -> Result<CopulaSpec> {
    check_pairs(u, v)?;
    let mut best: Option<(u32, f64, f64)> = None;
    let mut trace = Vec::new();
    for nu in 1..=MAX_NU {
        let (rho, ll) = Latent::new(nu, u, v).profile(nu);
        trace.push(format!("nu={nu}: rho={rho:.4}, ll={ll:.4}"));
        if !ll.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, _, b)| ll > b) {
            best = Some((nu, rho, ll));
        }
    }
    let (nu, rho, ll) = best.ok_or_else(|| Error::Estimation(format!("t-copula fit failed: {}", trace.join("; "))))?;
    let lr = 2.0 * ll;
    if lr <= LR_CRITICAL {
        return Ok(CopulaSpec { n: u.len(), lr_statistic: lr, ..CopulaSpec::independence() });
    }
    let rho_se = Latent::new(nu, u, v).rho_se(nu, rho);
    Ok(CopulaSpec {
        family: CopulaFamily::student_t(nu, rho)?,
        log_likelihood: ll,
        lr_statistic: lr,
        n: u.len(),
        rho_se,
        p_value: None,
    })
}

/// Refits rho only, holding `nu`. Used inside the bootstrap.
pub(crate) fn refit_rho(nu: u32, latent: &Latent) -> f64 {
    latent.profile(nu).0
}
