//! Empirical VaR and TVaR.

use crate::error::{Error, Result};

fn check(sample: &[f64], alpha: f64) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("confidence level must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

pub fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// 1-based index of the order statistic that is `VaR_alpha`: the smallest
/// `k` with `k / n >= alpha`.
pub fn var_index(n: usize, alpha: f64) -> usize {
    let nf = n as f64;
    let mut k = ((alpha * nf).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / nf >= alpha {
        k -= 1;
    }
    while k < n && (k as f64) / nf < alpha {
        k += 1;
    }
    k
}

/// Empirical generalized inverse at `alpha`.
pub fn var(sample: &[f64], alpha: f64) -> Result<f64> {
    check(sample, alpha)?;
    Ok(var_sorted(&sorted(sample), alpha))
}

pub fn var_sorted(sorted: &[f64], alpha: f64) -> f64 {
    sorted[var_index(sorted.len(), alpha) - 1]
}

/// `(1 / (1 - alpha)) * integral of VaR_u over (alpha, 1)` on the empirical
/// distribution: the order statistic at VaR gets weight `k / n - alpha`, the
/// ones above it `1 / n` each.
pub fn tvar(sample: &[f64], alpha: f64) -> Result<f64> {
    check(sample, alpha)?;
    Ok(tvar_sorted(&sorted(sample), alpha))
}

pub fn tvar_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let nf = n as f64;
    let k = var_index(n, alpha);
    let upper: f64 = sorted[k..].iter().sum();
    let boundary = (k as f64 / nf - alpha).max(0.0);
    let t = (boundary * sorted[k - 1] + upper / nf) / (1.0 - alpha);
    // rounding in the weights must not push the result below VaR
    t.max(sorted[k - 1])
}

pub fn mean(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(sample.iter().sum::<f64>() / sample.len() as f64)
}

/// Smallest `alpha = k / n` with `VaR_alpha - mean >= target`.
pub fn equivalent_alpha(sample: &[f64], target: f64) -> Result<f64> {
    let m = mean(sample)?;
    let s = sorted(sample);
    let (lo, hi) = (s[0] - m, s[s.len() - 1] - m);
    if !(target >= lo && target <= hi) {
        return Err(Error::Risk(format!("target {target} lies outside the sample range [{lo}, {hi}] around the mean")));
    }
    let k = s.partition_point(|&x| x - m < target) + 1;
    Ok(k as f64 / s.len() as f64)
}
