//! Dispersion effects from (leverage-corrected) unit deviances.
//!
//! One scoring step of the gamma GLM with log link:
//! `W = diag(mu^(2-p) / phi_j)`, leverages `h` from `W^{1/2} X (X^T W X)^{-1} X^T W^{1/2}`,
//! `d* = d / (1 - h)`, `W_d = diag((1 - h) / 2)`, `z_d = (d* - phi) / phi + ln phi`, and
//! `gamma = (Z^T W_d Z)^{-1} Z^T W_d z_d`. `Z` holds one dummy per lag, so the
//! solve reduces to a weighted mean of `z_d` within each lag.
//!
//! Cells with leverage one (the only observation of some mean effect, such as
//! the corners `(1, J)` and `(I, 1)`) carry no dispersion information and get
//! zero weight. Cells in pinned rows or columns are excluded as well. A lag
//! left without informative cells takes the dispersion of the nearest
//! earlier lag. A lag whose dispersion falls more than `e^27.6` below the
//! largest one is reported as degenerate.

use super::design::Design;
use super::{DispersionMethod, DispersionParams, MarginalModel};
use crate::error::{Error, Result};
use crate::triangles::LossTriangle;
use crate::tweedie::unit_deviance;

const SATURATED: f64 = 1.0 - 1e-9;
const DEGENERATE_DEVIANCE: f64 = 1e-24;
/// Log-dispersion gap below the largest lag at which a lag counts as collapsed.
const COLLAPSE_GAP: f64 = 27.6;

struct Cell {
    j: usize,
    d: f64,
    h: f64,
    informative: bool,
    scale: f64,
}

fn cells(design: &Design, model: &MarginalModel, t: &LossTriangle) -> Result<Vec<Cell>> {
    let p = model.p;
    let w: Vec<f64> = design
        .cells
        .iter()
        .map(|&(i, j)| model.mu(i, j).powf(2.0 - p) / model.phi(j))
        .collect();
    let h = design.leverages(&w)?;
    Ok(design
        .cells
        .iter()
        .zip(h)
        .map(|(&(i, j), h)| {
            let y = t.ratio(i, j);
            let mu = model.mu(i, j);
            Cell {
                j,
                d: unit_deviance(y, mu, p),
                h: h.min(1.0),
                informative: h < SATURATED && !design.pinned(i, j),
                scale: y.powf(2.0 - p) + mu.powf(2.0 - p),
            }
        })
        .collect())
}

/// Turns per-lag log dispersions (None = uninformative) into parameters,
/// tying uninformative lags to the nearest earlier informative one.
fn assemble(
    eta: Vec<Option<f64>>,
    cells: &[Cell],
    design: &Design,
    line: &str,
) -> Result<(DispersionParams, Vec<usize>)> {
    let n = eta.len();
    let mut out = vec![0.0; n];
    let mut tied = Vec::new();
    for j in 1..=n {
        match eta[j - 1] {
            Some(v) => out[j - 1] = v,
            None if j == 1 => {
                let (i, j) = design
                    .cells
                    .iter()
                    .zip(cells)
                    .find(|(_, c)| c.j == 1 && c.h >= SATURATED)
                    .map(|(&ij, _)| ij)
                    .unwrap_or((1, 1));
                return Err(Error::SaturatedDispersionCell { i, j });
            }
            None => {
                out[j - 1] = out[j - 2];
                tied.push(j);
            }
        }
    }
    if let Some(j) = out.iter().position(|v| !(v.is_finite() && *v > -700.0 && *v < 700.0)) {
        return Err(Error::DegenerateDispersion(format!(
            "line {line}: dispersion of development lag {} left the representable range",
            j + 1
        )));
    }
    let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(j) = out.iter().position(|v| *v < top - COLLAPSE_GAP) {
        return Err(Error::DegenerateDispersion(format!(
            "line {line}: dispersion of development lag {} collapsed toward zero",
            j + 1
        )));
    }
    let iota_d = out[0];
    let gamma = out.iter().map(|v| v - iota_d).collect();
    Ok((DispersionParams { iota_d, gamma }, tied))
}

fn check_degenerate(cells: &[Cell], n: usize, line: &str) -> Result<()> {
    for j in 1..=n {
        let (dev, scale, count) = cells
            .iter()
            .filter(|c| c.j == j && c.informative)
            .fold((0.0, 0.0, 0), |(a, b, k), c| (a + c.d, b + c.scale, k + 1));
        if count > 0 && dev <= DEGENERATE_DEVIANCE * scale {
            return Err(Error::DegenerateDispersion(format!(
                "line {line}: development lag {j} is fitted exactly (zero deviance), so its dispersion is not estimable"
            )));
        }
    }
    Ok(())
}

pub(crate) fn dispersion_step_with(
    design: &Design,
    model: &MarginalModel,
    t: &LossTriangle,
    method: DispersionMethod,
) -> Result<(DispersionParams, Vec<usize>)> {
    let n = design.size();
    let cells = cells(design, model, t)?;
    check_degenerate(&cells, n, &t.line_id)?;
    let mut sw = vec![0.0; n];
    let mut swz = vec![0.0; n];
    for c in cells.iter().filter(|c| c.informative) {
        let h = match method {
            DispersionMethod::Reml => c.h,
            DispersionMethod::Ml => 0.0,
        };
        let phi = model.phi(c.j);
        let wd = (1.0 - h) / 2.0;
        let z = (c.d / (1.0 - h) - phi) / phi + phi.ln();
        sw[c.j - 1] += wd;
        swz[c.j - 1] += wd * z;
    }
    let eta = (0..n).map(|k| (sw[k] > 0.0).then(|| swz[k] / sw[k])).collect();
    assemble(eta, &cells, design, &t.line_id)
}

/// Fixed point of the REML step: `phi_j = sum_i d_ij / sum_i (1 - h_ij)`.
pub(crate) fn moment_dispersion(design: &Design, model: &MarginalModel, t: &LossTriangle) -> Result<DispersionParams> {
    let n = design.size();
    let cells = cells(design, model, t)?;
    check_degenerate(&cells, n, &t.line_id)?;
    let mut dev = vec![0.0; n];
    let mut dof = vec![0.0; n];
    for c in cells.iter().filter(|c| c.informative) {
        dev[c.j - 1] += c.d;
        dof[c.j - 1] += 1.0 - c.h;
    }
    let eta = (0..n).map(|k| (dof[k] > 0.0).then(|| (dev[k] / dof[k]).ln())).collect();
    Ok(assemble(eta, &cells, design, &t.line_id)?.0)
}

/// Leverages of the observed cells in upper order under the weights
/// `mu^(2-p) / phi_j`, with the number of active mean effects.
pub fn mean_leverages(model: &MarginalModel, t: &LossTriangle) -> Result<(Vec<f64>, usize)> {
    let design = Design::new(t)?;
    let p = model.p;
    let w: Vec<f64> = design
        .cells
        .iter()
        .map(|&(i, j)| model.mu(i, j).powf(2.0 - p) / model.phi(j))
        .collect();
    Ok((design.leverages(&w)?, design.n_active))
}

/// One REML scoring step for the dispersion effects, holding the mean fixed.
pub fn reml_dispersion_step(model: &MarginalModel, t: &LossTriangle) -> Result<DispersionParams> {
    Ok(dispersion_step_with(&Design::new(t)?, model, t, DispersionMethod::Reml)?.0)
}

/// As [`reml_dispersion_step`] without the leverage correction.
pub fn ml_dispersion_step(model: &MarginalModel, t: &LossTriangle) -> Result<DispersionParams> {
    Ok(dispersion_step_with(&Design::new(t)?, model, t, DispersionMethod::Ml)?.0)
}
