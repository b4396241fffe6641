//! Per-line loss samples, Euler allocation and diversification benefit.

use serde::{Deserialize, Serialize};

use super::measures::{sorted, tvar, var_sorted};
use crate::error::{Error, Result};

/// `n` scenarios of `k` per-line losses, with the aggregate of each scenario
/// summed over lines in line order.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    pub line_ids: Vec<String>,
    n: usize,
    data: Vec<f64>,
    aggregate: Vec<f64>,
}

impl LossSample {
    /// `data` is row-major, one row of `line_ids.len()` losses per scenario.
    pub fn new(line_ids: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let k = line_ids.len();
        if k == 0 || data.is_empty() {
            return Err(Error::EmptySample);
        }
        if !data.len().is_multiple_of(k) {
            return Err(Error::Config(format!("{} losses do not fill rows of {k} lines", data.len())));
        }
        let n = data.len() / k;
        let aggregate = data.chunks(k).map(|r| r.iter().sum()).collect();
        Ok(LossSample { line_ids, n, data, aggregate })
    }

    pub fn from_columns(line_ids: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.len() != line_ids.len() || columns.iter().any(|c| c.len() != n) {
            return Err(Error::Config("loss columns must match the line ids and share one length".into()));
        }
        let data = (0..n).flat_map(|s| columns.iter().map(move |c| c[s])).collect();
        Self::new(line_ids, data)
    }

    pub fn scenarios(&self) -> usize {
        self.n
    }

    pub fn lines(&self) -> usize {
        self.line_ids.len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        let k = self.lines();
        &self.data[s * k..(s + 1) * k]
    }

    pub fn line(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|s| self.row(s)[k]).collect()
    }

    pub fn aggregate(&self) -> &[f64] {
        &self.aggregate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerAllocation {
    pub alpha: f64,
    pub var: f64,
    /// Number of scenarios with `S > VaR_alpha(S)`.
    pub tail_count: usize,
    /// `E[X_k | S > VaR_alpha(S)]` per line.
    pub allocation: Vec<f64>,
    /// `E[S | S > VaR_alpha(S)]` on the same scenarios.
    pub tail_mean: f64,
}

pub fn euler_allocation(losses: &LossSample, alpha: f64) -> Result<EulerAllocation> {
    let s = losses.aggregate();
    // validates alpha and emptiness
    super::measures::var(s, alpha)?;
    let v = var_sorted(&sorted(s), alpha);
    let tail: Vec<usize> = (0..losses.scenarios()).filter(|&i| s[i] > v).collect();
    if tail.is_empty() {
        return Err(Error::Risk(format!(
            "no scenario exceeds VaR at {alpha}; increase the number of scenarios"
        )));
    }
    let k = losses.lines();
    let mut sums = vec![0.0; k];
    let mut total = 0.0;
    for &i in &tail {
        for (a, x) in sums.iter_mut().zip(losses.row(i)) {
            *a += x;
        }
        total += s[i];
    }
    let c = tail.len() as f64;
    Ok(EulerAllocation {
        alpha,
        var: v,
        tail_count: tail.len(),
        allocation: sums.iter().map(|a| a / c).collect(),
        tail_mean: total / c,
    })
}

/// Sum of standalone TVaRs minus the TVaR of the aggregate.
pub fn diversification_benefit(losses: &LossSample, alpha: f64) -> Result<f64> {
    let silo: f64 = (0..losses.lines()).map(|k| tvar(&losses.line(k), alpha)).sum::<Result<f64>>()?;
    Ok(silo - tvar(losses.aggregate(), alpha)?)
}
