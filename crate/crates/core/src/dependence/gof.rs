//! Cramer-von Mises goodness of fit with a parametric bootstrap.
//!
//! `S_n = sum_i (C_n(U_i, V_i) - C_theta(U_i, V_i))^2`, with `C_n` the
//! empirical copula of the pseudo-observations. Each bootstrap replicate draws
//! `n` pairs from the fitted copula, re-ranks them, re-estimates rho (holding
//! `nu`) and recomputes the statistic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::ContinuousCDF;

use super::copula::{bvt_lower, t_dist, CopulaFamily};
use super::fit::{refit_rho, Latent};
use crate::error::{Error, Result};

pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// `C_n` at every observation: the share of points weakly below it in both
/// coordinates.
fn empirical_copula(u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| (0..n).filter(|&k| u[k] <= u[i] && v[k] <= v[i]).count() as f64 / n as f64)
        .collect()
}

fn statistic(emp: &[f64], model: impl Iterator<Item = f64>) -> f64 {
    emp.iter().zip(model).map(|(e, m)| (e - m) * (e - m)).sum()
}

/// 1-based ranks of a sample without ties.
pub(crate) fn ranks(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0; x.len()];
    for (k, &o) in order.iter().enumerate() {
        r[o] = k + 1;
    }
    r
}

/// Cramer-von Mises statistic of pseudo-observations against `family`.
pub fn cvm_statistic(family: &CopulaFamily, u: &[f64], v: &[f64]) -> f64 {
    let emp = empirical_copula(u, v);
    statistic(&emp, u.iter().zip(v).map(|(&a, &b)| family.cdf(a, b)))
}

/// Bootstrap p-value `(#{S_b >= S} + 1/2) / (B + 1)`. Replicate `b` uses the
/// ChaCha8 stream `b` of `seed`, so the result does not depend on threading.
pub fn gof_cvm(family: &CopulaFamily, u: &[f64], v: &[f64], n_bootstrap: usize, seed: u64) -> Result<f64> {
    let n = u.len();
    if n != v.len() || n < 2 {
        return Err(Error::Config("goodness of fit needs at least two paired observations".into()));
    }
    if n_bootstrap == 0 {
        return Err(Error::Config("goodness of fit needs at least one bootstrap replicate".into()));
    }
    let observed = cvm_statistic(family, u, v);
    let grid: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
    let quantiles: Option<(u32, Vec<f64>)> = match *family {
        CopulaFamily::StudentT { nu, .. } => {
            let t = t_dist(nu);
            Some((nu, grid.iter().map(|&g| t.inverse_cdf(g)).collect()))
        }
        CopulaFamily::Independence => None,
    };
    let exceed = (0..n_bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let (a, c) = family.sample_latent(n, &mut rng);
            let (ra, rc) = (ranks(&a), ranks(&c));
            let pu: Vec<f64> = ra.iter().map(|&r| grid[r - 1]).collect();
            let pv: Vec<f64> = rc.iter().map(|&r| grid[r - 1]).collect();
            let emp = empirical_copula(&pu, &pv);
            let s = match &quantiles {
                None => statistic(&emp, pu.iter().zip(&pv).map(|(x, y)| x * y)),
                Some((nu, q)) => {
                    let x: Vec<f64> = ra.iter().map(|&r| q[r - 1]).collect();
                    let y: Vec<f64> = rc.iter().map(|&r| q[r - 1]).collect();
                    let rho = refit_rho(*nu, &Latent::from_quantiles(*nu, x.clone(), y.clone()));
                    statistic(&emp, x.iter().zip(&y).map(|(&h, &k)| bvt_lower(*nu, h, k, rho)))
                }
            };
            (s >= observed) as usize
        })
        .sum::<usize>();
    Ok((exceed as f64 + 0.5) / (n_bootstrap as f64 + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::{fit_bivariate, pseudo_uniforms};
    use rand::Rng;

    #[test]
    fn comonotone_data_rejects_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        let u = pseudo_uniforms(&a);
        let p = gof_cvm(&CopulaFamily::Independence, &u, &u, 200, 1).unwrap();
        assert!(p < 0.01, "{p}");
    }

    #[test]
    fn deterministic_given_seed() {
        let c = CopulaFamily::student_t(6, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = c.sample_latent(100, &mut rng);
        let (u, v) = (pseudo_uniforms(&a), pseudo_uniforms(&b));
        let p1 = gof_cvm(&c, &u, &v, 50, 9).unwrap();
        let p2 = gof_cvm(&c, &u, &v, 50, 9).unwrap();
        assert_eq!(p1, p2);
        assert!(p1 > 0.0 && p1 < 1.0);
    }

    #[test]
    fn size_is_close_to_nominal() {
        let truth = CopulaFamily::student_t(5, 0.29).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let trials = 60;
        let mut rejections = 0;
        for k in 0..trials {
            let (a, b) = truth.sample_latent(150, &mut rng);
            let (u, v) = (pseudo_uniforms(&a), pseudo_uniforms(&b));
            let spec = fit_bivariate(&u, &v).unwrap();
            let p = gof_cvm(&spec.family, &u, &v, 100, 100 + k).unwrap();
            rejections += (p < 0.05) as usize;
        }
        // binomial(60, 0.05) exceeds 9 with probability below 0.3%
        assert!(rejections <= 9, "{rejections}/{trials}");
    }
}
