//! Per-line Tweedie double GLM with AR(1) correlation across development lags.
//!
//! Mean: `ln mu_ij = iota + alpha_i + delta_j`. Dispersion: `ln phi_j = iota_d + gamma_j`.
//! The fit alternates a lag-correlation update, one damped Fisher-scoring
//! step of the GEE for the mean, and one REML scoring step for the
//! dispersion, until the largest parameter change falls below tolerance.

pub(crate) mod design;
mod dispersion;
mod gee;
mod rho;
mod select;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triangles::LossTriangle;
use crate::tweedie::{check_p, TweedieParams};
use design::Design;

pub use design::PINNED_EFFECT;
pub use dispersion::{mean_leverages, ml_dispersion_step, reml_dispersion_step};
pub use gee::{gee_residual, gee_step};
pub use rho::update_rho;
pub use select::{default_p_grid, select_p, select_p_with, PSelection};

/// Mean-model effects. `alpha[0]` and `delta[0]` are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanParams {
    #[serde(rename = "intercept")]
    pub iota: f64,
    #[serde(rename = "as_effects")]
    pub alpha: Vec<f64>,
    #[serde(rename = "dl_effects")]
    pub delta: Vec<f64>,
}

/// Dispersion-model effects. `gamma[0]` is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionParams {
    #[serde(rename = "intercept")]
    pub iota_d: f64,
    #[serde(rename = "dl_effects")]
    pub gamma: Vec<f64>,
}

impl DispersionParams {
    pub fn phi(&self, j: usize) -> f64 {
        (self.iota_d + self.gamma[j - 1]).exp()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub max_change: f64,
    /// Tweedie log-likelihood of the observed cells at the fitted parameters,
    /// treating cells as independent.
    pub log_likelihood: f64,
    /// Effects pinned because their row or column has no claims, as
    /// `"alpha_i"` / `"delta_j"`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pinned_effects: Vec<String>,
    /// Lags whose dispersion is copied from the nearest earlier lag because
    /// none of their cells carries information.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tied_dispersion_lags: Vec<usize>,
    /// Largest parameter change per outer iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub change_history: Vec<f64>,
}

/// Fitted marginal model of one business line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub line_id: String,
    pub p: f64,
    pub rho: f64,
    pub mean: MeanParams,
    pub dispersion: DispersionParams,
    #[serde(default)]
    pub diagnostics: FitDiagnostics,
}

impl MarginalModel {
    /// Triangle size `I = J`.
    pub fn size(&self) -> usize {
        self.mean.alpha.len()
    }

    pub fn mu(&self, i: usize, j: usize) -> f64 {
        (self.mean.iota + self.mean.alpha[i - 1] + self.mean.delta[j - 1]).exp()
    }

    pub fn phi(&self, j: usize) -> f64 {
        self.dispersion.phi(j)
    }

    pub fn tweedie(&self, i: usize, j: usize) -> Result<TweedieParams> {
        TweedieParams::new(self.mu(i, j), self.phi(j), self.p)
    }

    /// `(y - mu) / sqrt(phi mu^p)`.
    pub fn scaled_innovation(&self, i: usize, j: usize, y: f64) -> f64 {
        let mu = self.mu(i, j);
        (y - mu) / (self.phi(j) * mu.powf(self.p)).sqrt()
    }

    /// Checks dimensions and parameter ranges, e.g. after reading from JSON.
    pub fn validate(&self) -> Result<()> {
        let n = self.size();
        let bad = |m: String| Err(Error::Config(format!("model {}: {m}", self.line_id)));
        if n == 0 || self.mean.delta.len() != n || self.dispersion.gamma.len() != n {
            return bad("effect vectors must all have length I = J >= 1".into());
        }
        if self.mean.alpha[0] != 0.0 || self.mean.delta[0] != 0.0 || self.dispersion.gamma[0] != 0.0 {
            return bad("first accident-semester and development-lag effects must be 0".into());
        }
        if !(self.rho.abs() < 1.0) {
            return bad(format!("rho must satisfy |rho| < 1, got {}", self.rho));
        }
        check_p(self.p)?;
        let all = [self.mean.iota, self.dispersion.iota_d]
            .into_iter()
            .chain(self.mean.alpha.iter().copied())
            .chain(self.mean.delta.iter().copied())
            .chain(self.dispersion.gamma.iter().copied());
        if all.into_iter().any(|v| !v.is_finite()) {
            return bad("all effects must be finite".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MarginalModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }
}

/// Dispersion estimator used inside the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispersionMethod {
    /// Leverage-corrected deviances.
    #[default]
    Reml,
    /// Plain deviances.
    Ml,
}

/// Which refinement runs first within an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepOrder {
    #[default]
    MeanFirst,
    DispersionFirst,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Holds rho at this value instead of estimating it.
    pub fixed_rho: Option<f64>,
    pub dispersion: DispersionMethod,
    pub order: StepOrder,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            tolerance: 1e-8,
            fixed_rho: None,
            dispersion: DispersionMethod::Reml,
            order: StepOrder::MeanFirst,
        }
    }
}

/// Fits the marginal model of one line for a given Tweedie index.
pub fn fit(t: &LossTriangle, p: f64, options: &FitOptions) -> Result<MarginalModel> {
    check_p(p)?;
    if let Some(r) = options.fixed_rho {
        if !(r.abs() < 1.0) {
            return Err(Error::Config(format!("fixed rho must satisfy |rho| < 1, got {r}")));
        }
    }
    let design = Design::new(t)?;
    let mut model = initial_model(t, &design, p)?;
    model.rho = options.fixed_rho.unwrap_or(0.0);

    let mut history = Vec::new();
    let mut change = f64::INFINITY;
    let mut tied = Vec::new();
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let before = flatten(&model);
        if options.fixed_rho.is_none() {
            model.rho = rho::update_rho_with(&model, t)?;
        }
        match options.order {
            StepOrder::MeanFirst => {
                model.mean = gee::gee_step_with(&design, &model, t)?;
                tied = dispersion_update(&design, &mut model, t, options.dispersion)?;
            }
            StepOrder::DispersionFirst => {
                tied = dispersion_update(&design, &mut model, t, options.dispersion)?;
                model.mean = gee::gee_step_with(&design, &model, t)?;
            }
        }
        change = before
            .iter()
            .zip(flatten(&model))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(change);
        if !change.is_finite() {
            return Err(Error::Estimation(format!(
                "line {}: fit diverged at iteration {iterations}",
                t.line_id
            )));
        }
        if change < options.tolerance {
            break;
        }
    }
    let converged = change < options.tolerance;
    log_monotonicity(&t.line_id, &history);
    model.diagnostics = FitDiagnostics {
        iterations,
        converged,
        max_change: change,
        log_likelihood: log_likelihood(&model, t)?,
        pinned_effects: pinned_names(&design),
        tied_dispersion_lags: tied,
        change_history: history,
    };
    if !converged {
        return Err(Error::NonConvergence { iterations, change, last: Box::new(model) });
    }
    Ok(model)
}

fn dispersion_update(
    design: &Design,
    model: &mut MarginalModel,
    t: &LossTriangle,
    method: DispersionMethod,
) -> Result<Vec<usize>> {
    let (d, tied) = dispersion::dispersion_step_with(design, model, t, method)?;
    model.dispersion = d;
    Ok(tied)
}

fn flatten(m: &MarginalModel) -> Vec<f64> {
    let mut v = vec![m.rho, m.mean.iota, m.dispersion.iota_d];
    v.extend(&m.mean.alpha);
    v.extend(&m.mean.delta);
    v.extend(&m.dispersion.gamma);
    v
}

// The max-change sequence is expected to be nonincreasing once the fit has
// settled; departures are reported, not treated as errors.
fn log_monotonicity(line: &str, history: &[f64]) {
    for k in 6..history.len() {
        if history[k] > history[k - 1] * (1.0 + 1e-9) && history[k] > 1e-12 {
            log::debug!(
                "line {line}: parameter change rose from {:e} to {:e} at iteration {}",
                history[k - 1],
                history[k],
                k + 1
            );
        }
    }
}

fn pinned_names(design: &Design) -> Vec<String> {
    let n = design.size();
    let mut out = Vec::new();
    for i in 2..=n {
        if !design.alpha_active(i) {
            out.push(format!("alpha_{i}"));
        }
    }
    for j in 2..=n {
        if !design.delta_active(j) {
            out.push(format!("delta_{j}"));
        }
    }
    out
}

/// Independence log-likelihood of the observed cells.
pub fn log_likelihood(model: &MarginalModel, t: &LossTriangle) -> Result<f64> {
    let mut total = 0.0;
    for (i, j) in t.index().upper_cells() {
        total += model.tweedie(i, j)?.log_density(t.ratio(i, j))?;
    }
    Ok(total)
}

// Mean effects from a GLM with unit dispersion and no correlation; dispersion
// from the closed-form fixed point given those means.
fn initial_model(t: &LossTriangle, design: &Design, p: f64) -> Result<MarginalModel> {
    let n = design.size();
    let ratios = t.ratios();
    let ybar = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let (_, alpha, delta) = design.unpack(&design.pack(0.0, &vec![0.0; n], &vec![0.0; n]));
    let mut model = MarginalModel {
        line_id: t.line_id.clone(),
        p,
        rho: 0.0,
        mean: MeanParams { iota: ybar.ln(), alpha, delta },
        dispersion: DispersionParams { iota_d: 0.0, gamma: vec![0.0; n] },
        diagnostics: FitDiagnostics::default(),
    };
    for _ in 0..100 {
        let next = gee::gee_step_with(design, &model, t)?;
        let change = design
            .pack(next.iota, &next.alpha, &next.delta)
            .iter()
            .zip(design.pack(model.mean.iota, &model.mean.alpha, &model.mean.delta).iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        model.mean = next;
        if change < 1e-10 {
            break;
        }
    }
    model.dispersion = dispersion::moment_dispersion(design, &model, t)?;
    Ok(model)
}
