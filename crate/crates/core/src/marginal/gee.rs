//! Generalized estimating equations for the mean effects.
//!
//! Per accident semester, `V_i = A^{1/2} R(rho) A^{1/2}` with
//! `A = diag(phi_j mu_ij^p)` and `D_i = diag(mu_i) X_i`. Writing
//! `s = mu / sqrt(phi mu^p)` and `e = (y - mu) / sqrt(phi mu^p)`, the score is
//! `X^T diag(s) R^{-1} e` and the information `X^T diag(s) R^{-1} diag(s) X`;
//! `R^{-1}` is tridiagonal, so both are assembled cell by cell.

use nalgebra::{DMatrix, DVector};

use super::design::{alpha_col, delta_col, Design};
use super::{MarginalModel, MeanParams};
use crate::dependence::ARCorrelation;
use crate::error::{Error, Result};
use crate::triangles::LossTriangle;

const MAX_HALVINGS: usize = 20;

fn score_info<C>(model: &MarginalModel, t: &LossTriangle, dim: usize, cols: C, with_info: bool) -> Result<(DVector<f64>, DMatrix<f64>)>
where
    C: Fn(usize, usize) -> Vec<usize>,
{
    let index = t.index();
    let mut u = DVector::zeros(dim);
    let mut info = DMatrix::zeros(if with_info { dim } else { 0 }, if with_info { dim } else { 0 });
    for i in 1..=index.semesters() {
        let n = index.row_len(i);
        let r = ARCorrelation::new(model.rho, n)?;
        let mut s = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        for j in 1..=n {
            let mu = model.mu(i, j);
            let sd = (model.phi(j) * mu.powf(model.p)).sqrt();
            s.push(mu / sd);
            e.push((t.ratio(i, j) - mu) / sd);
            x.push(cols(i, j));
        }
        let re = r.solve(&e);
        for a in 0..n {
            for &c in &x[a] {
                u[c] += s[a] * re[a];
            }
            if with_info {
                for b in a.saturating_sub(1)..(a + 2).min(n) {
                    let w = s[a] * s[b] * r.inverse_entry(a, b);
                    for &ca in &x[a] {
                        for &cb in &x[b] {
                            info[(ca, cb)] += w;
                        }
                    }
                }
            }
        }
    }
    Ok((u, info))
}

fn active_score_info(design: &Design, model: &MarginalModel, t: &LossTriangle, with_info: bool) -> Result<(DVector<f64>, DMatrix<f64>)> {
    score_info(model, t, design.n_active, |i, j| design.row(i, j).collect(), with_info)
}

/// The estimating function `sum_i D_i^T V_i^{-1} (Y_i - mu_i)` over all
/// `2J - 1` mean parameters, ordered `[iota, alpha_2.., delta_2..]`.
pub fn gee_residual(model: &MarginalModel, t: &LossTriangle) -> Result<Vec<f64>> {
    let n = t.index().semesters();
    let cols = |i: usize, j: usize| {
        let mut c = vec![0];
        if i >= 2 {
            c.push(alpha_col(i));
        }
        if j >= 2 {
            c.push(delta_col(n, j));
        }
        c
    };
    let (u, _) = score_info(model, t, 2 * n - 1, cols, false)?;
    Ok(u.iter().copied().collect())
}

/// One damped Fisher-scoring update of the mean effects, holding dispersion
/// and rho fixed.
pub fn gee_step(model: &MarginalModel, t: &LossTriangle) -> Result<MeanParams> {
    gee_step_with(&Design::new(t)?, model, t)
}

pub(crate) fn gee_step_with(design: &Design, model: &MarginalModel, t: &LossTriangle) -> Result<MeanParams> {
    let (u, info) = active_score_info(design, model, t, true)?;
    let chol = info
        .cholesky()
        .ok_or_else(|| Error::Singular { step: "GEE mean update (D^T V^{-1} D)".into() })?;
    let delta = chol.solve(&u);
    let beta = design.pack(model.mean.iota, &model.mean.alpha, &model.mean.delta);
    let norm0 = u.norm();

    let mut trial = model.clone();
    let mut step = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let (iota, alpha, delta_eff) = design.unpack(&(&beta + &delta * step));
        trial.mean = MeanParams { iota, alpha, delta: delta_eff };
        let (u1, _) = active_score_info(design, &trial, t, false)?;
        if u1.norm() < norm0 && trial_is_finite(&trial) {
            return Ok(trial.mean);
        }
        step *= 0.5;
    }
    // No halving reduced the residual (typically already at the noise floor):
    // take the full scoring step rather than a vanishing one.
    let (iota, alpha, delta_eff) = design.unpack(&(&beta + &delta));
    Ok(MeanParams { iota, alpha, delta: delta_eff })
}

fn trial_is_finite(m: &MarginalModel) -> bool {
    let n = m.size();
    (1..=n).all(|i| (1..=n + 1 - i).all(|j| m.mu(i, j).is_finite() && m.mu(i, j) > 0.0))
}
