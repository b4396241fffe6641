//! Scaled and decorrelated innovations of a fitted line, and their
//! pseudo-uniform ranks.

use serde::{Deserialize, Serialize};

use super::ARCorrelation;
use crate::error::{Error, Result};
use crate::marginal::MarginalModel;
use crate::triangles::{LossTriangle, TriangleIndex};

/// Per-cell quantities of one line, each in upper-triangle order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnovationPanel {
    pub line_id: String,
    pub size: usize,
    /// `(Y - mu) / sqrt(phi mu^p)`.
    pub scaled: Vec<f64>,
    /// `L^{-1}` of the scaled innovations, row by row.
    pub decorrelated: Vec<f64>,
    /// `rank(U) / (n + 1)`.
    pub pseudo: Vec<f64>,
}

impl InnovationPanel {
    pub fn index(&self) -> TriangleIndex {
        TriangleIndex::new(self.size).expect("size checked at construction")
    }
}

pub fn compute_innovations(model: &MarginalModel, t: &LossTriangle) -> Result<InnovationPanel> {
    let index = t.index();
    if model.size() != index.semesters() {
        return Err(Error::Config(format!(
            "model {} has size {}, triangle has {}",
            model.line_id,
            model.size(),
            index.semesters()
        )));
    }
    let mut scaled = Vec::with_capacity(index.n_upper());
    let mut decorrelated = Vec::with_capacity(index.n_upper());
    for i in 1..=index.semesters() {
        let n = index.row_len(i);
        let row: Vec<f64> = (1..=n).map(|j| model.scaled_innovation(i, j, t.ratio(i, j))).collect();
        decorrelated.extend(ARCorrelation::new(model.rho, n)?.whiten(&row));
        scaled.extend(row);
    }
    let pseudo = pseudo_uniforms(&decorrelated);
    Ok(InnovationPanel { line_id: model.line_id.clone(), size: index.semesters(), scaled, decorrelated, pseudo })
}

/// Ranks scaled by `n + 1`; ties get their average rank.
pub fn pseudo_uniforms(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; n];
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && x[order[end]] == x[order[k]] {
            end += 1;
        }
        // ranks k+1..=end share their mean
        let rank = 0.5 * ((k + 1) + end) as f64;
        for &o in &order[k..end] {
            out[o] = rank / (n + 1) as f64;
        }
        k = end;
    }
    out
}
