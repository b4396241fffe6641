//! Joint completion of the lower triangles of every line.
//!
//! Per lower cell, the K-vector of decorrelated innovations is a row of the
//! reordered innovation pool; each cell uses its own seeded subsample of
//! rows. Per line and accident semester the innovations are colored with the
//! conditional AR(1) law given the observed history and mapped to loss ratios
//! through the Tweedie quantile.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::conditional::conditional_factor;
use super::reorder::simulate_innovation_matrix;
use crate::dependence::CopulaTree;
use crate::error::{Error, Result};
use crate::marginal::MarginalModel;
use crate::risk::LossSample;
use crate::triangles::Portfolio;
use crate::tweedie::CdfTable;

pub const DEFAULT_OVERSAMPLE: usize = 10;
const CHUNK: usize = 512;
// largest double below one
const U_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_scenarios: usize,
    /// Pool size `m = oversample_factor * n_scenarios`.
    pub oversample_factor: usize,
    pub seed: u64,
    /// Flat discount rate per semester.
    pub discount_rate: f64,
    /// Accumulate per-cell and per-semester moments while simulating.
    pub collect_stats: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_scenarios: 100_000,
            oversample_factor: DEFAULT_OVERSAMPLE,
            seed: 0,
            discount_rate: 0.02,
            collect_stats: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_scenarios == 0 {
            return Err(Error::Config("number of scenarios must be >= 1".into()));
        }
        if self.oversample_factor < 2 {
            return Err(Error::Config(format!("oversample factor must be >= 2, got {}", self.oversample_factor)));
        }
        if !self.discount_rate.is_finite() || self.discount_rate <= -1.0 {
            return Err(Error::Config(format!("discount rate must be finite and above -100%, got {}", self.discount_rate)));
        }
        Ok(())
    }
}

/// Nominal cash flows of every scenario, line and future semester
/// `t = i + j - (I + 1)` in `1..I`, stored `[scenario][line][t - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub line_ids: Vec<String>,
    pub size: usize,
    pub seed: u64,
    pub discount_rate: f64,
    n: usize,
    cash: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(line_ids: Vec<String>, size: usize, seed: u64, discount_rate: f64, cash: Vec<f64>) -> Result<Self> {
        let per = line_ids.len() * size.saturating_sub(1);
        if line_ids.is_empty() || size < 2 || cash.is_empty() || !cash.len().is_multiple_of(per) {
            return Err(Error::ScenarioFormat(format!(
                "{} cash flows do not fill scenarios of {} lines x {} periods",
                cash.len(),
                line_ids.len(),
                size.saturating_sub(1)
            )));
        }
        Ok(ScenarioSet { n: cash.len() / per, line_ids, size, seed, discount_rate, cash })
    }

    pub fn scenarios(&self) -> usize {
        self.n
    }

    pub fn lines(&self) -> usize {
        self.line_ids.len()
    }

    pub fn periods(&self) -> usize {
        self.size - 1
    }

    pub fn cash(&self) -> &[f64] {
        &self.cash
    }

    /// Cash flows of scenario `s`, line `k`, periods `1..I`.
    pub fn flows(&self, s: usize, k: usize) -> &[f64] {
        let t = self.periods();
        let at = (s * self.lines() + k) * t;
        &self.cash[at..at + t]
    }
}

/// Per-line discounted losses `sum_t CF_t / (1 + d)^t`; the aggregate is
/// their sum in line order.
pub fn discount_losses(set: &ScenarioSet, rate: f64) -> Result<LossSample> {
    let factors: Vec<f64> = (1..=set.periods()).map(|t| (1.0 + rate).powi(-(t as i32))).collect();
    let data = (0..set.scenarios())
        .flat_map(|s| (0..set.lines()).map(move |k| (s, k)))
        .map(|(s, k)| set.flows(s, k).iter().zip(&factors).map(|(c, f)| c * f).sum())
        .collect();
    LossSample::new(set.line_ids.clone(), data)
}

/// Undiscounted losses of each payment period, one sample per period.
pub fn period_losses(set: &ScenarioSet) -> Result<Vec<LossSample>> {
    (0..set.periods())
        .map(|t| {
            let data = (0..set.scenarios())
                .flat_map(|s| (0..set.lines()).map(move |k| (s, k)))
                .map(|(s, k)| set.flows(s, k)[t])
                .collect();
            LossSample::new(set.line_ids.clone(), data)
        })
        .collect()
}

/// Running moments of one simulated cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellMoments {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
    pub zeros: usize,
}

impl CellMoments {
    fn add(&mut self, y: f64) {
        self.n += 1;
        self.sum += y;
        self.sum_sq += y * y;
        self.zeros += (y == 0.0) as usize;
    }

    fn merge(&mut self, o: &CellMoments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.zeros += o.zeros;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.sum_sq / self.n as f64 - m * m).max(0.0)
    }

    pub fn zero_fraction(&self) -> f64 {
        self.zeros as f64 / self.n as f64
    }
}

/// Running first and second moments of the colored scaled innovations of
/// one accident semester.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMoments {
    pub n: usize,
    pub sum: Vec<f64>,
    /// Row-major `dim x dim` sums of products.
    pub cross: Vec<f64>,
}

impl RowMoments {
    fn new(dim: usize) -> Self {
        RowMoments { n: 0, sum: vec![0.0; dim], cross: vec![0.0; dim * dim] }
    }

    fn add(&mut self, y: &[f64]) {
        let d = y.len();
        self.n += 1;
        for a in 0..d {
            self.sum[a] += y[a];
            for b in 0..d {
                self.cross[a * d + b] += y[a] * y[b];
            }
        }
    }

    fn merge(&mut self, o: &RowMoments) {
        self.n += o.n;
        self.sum.iter_mut().zip(&o.sum).for_each(|(a, b)| *a += b);
        self.cross.iter_mut().zip(&o.cross).for_each(|(a, b)| *a += b);
    }

    pub fn mean(&self) -> DVector<f64> {
        DVector::from_iterator(self.sum.len(), self.sum.iter().map(|s| s / self.n as f64))
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.sum.len();
        let m = self.mean();
        DMatrix::from_fn(d, d, |a, b| self.cross[a * d + b] / self.n as f64 - m[a] * m[b])
    }
}

/// Moments of the simulation, by line and accident semester.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationStats {
    pub size: usize,
    /// `[line][i - 1][j - n_i - 1]` over the lower cells.
    pub cells: Vec<Vec<Vec<CellMoments>>>,
    /// Colored scaled innovations, `[line][i - 1]`, empty for `i = 1`.
    pub rows: Vec<Vec<RowMoments>>,
    /// Simulated loss ratios, `[line][i - 1]`, empty for `i = 1`.
    pub ratio_rows: Vec<Vec<RowMoments>>,
}

impl SimulationStats {
    fn new(k: usize, size: usize) -> Self {
        SimulationStats {
            size,
            cells: vec![(1..=size).map(|i| vec![CellMoments::default(); i - 1]).collect(); k],
            rows: vec![(1..=size).map(|i| RowMoments::new(i - 1)).collect(); k],
            ratio_rows: vec![(1..=size).map(|i| RowMoments::new(i - 1)).collect(); k],
        }
    }

    pub fn cell(&self, k: usize, i: usize, j: usize) -> &CellMoments {
        &self.cells[k][i - 1][j - (self.size + 1 - i) - 1]
    }
}

/// Everything fixed per line and accident semester.
struct RowPlan {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    tables: Vec<CdfTable>,
    premium: f64,
}

fn check_inputs(portfolio: &Portfolio, models: &[MarginalModel], tree: &CopulaTree) -> Result<Vec<usize>> {
    if models.len() != portfolio.len() {
        return Err(Error::Config(format!("{} models for {} lines", models.len(), portfolio.len())));
    }
    let size = portfolio.index().semesters();
    for (m, l) in models.iter().zip(&portfolio.lines) {
        m.validate()?;
        if m.line_id != l.line_id {
            return Err(Error::Config(format!("model {} does not match line {}", m.line_id, l.line_id)));
        }
        if m.size() != size {
            return Err(Error::Config(format!("model {} has size {}, portfolio has {size}", m.line_id, m.size())));
        }
    }
    tree.validate()?;
    let leaves = tree.leaves();
    if leaves.len() != models.len() {
        return Err(Error::Config(format!("copula tree has {} leaves for {} lines", leaves.len(), models.len())));
    }
    // pool column of each line
    models
        .iter()
        .map(|m| {
            leaves
                .iter()
                .position(|&l| l == m.line_id)
                .ok_or_else(|| Error::Config(format!("line {} is missing from the copula tree", m.line_id)))
        })
        .collect()
}

fn row_plans(portfolio: &Portfolio, models: &[MarginalModel]) -> Result<Vec<Vec<RowPlan>>> {
    let size = portfolio.index().semesters();
    let cells: Vec<(usize, usize, usize)> = (0..models.len())
        .flat_map(|k| (2..=size).flat_map(move |i| (size + 2 - i..=size).map(move |j| (k, i, j))))
        .collect();
    let mut tables = cells
        .par_iter()
        .map(|&(k, i, j)| CdfTable::new(&models[k].tweedie(i, j)?))
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let mut plans = Vec::with_capacity(models.len());
    for (m, line) in models.iter().zip(&portfolio.lines) {
        let mut rows = Vec::with_capacity(size - 1);
        for i in 2..=size {
            let n_obs = size + 1 - i;
            let observed: Vec<f64> = (1..=n_obs).map(|j| m.scaled_innovation(i, j, line.ratio(i, j))).collect();
            let (mean, chol) = conditional_factor(m.rho, i, size, &observed)?;
            let tables = tables.by_ref().take(i - 1).collect();
            rows.push(RowPlan { mean, chol, tables, premium: line.premium(i) });
        }
        plans.push(rows);
    }
    Ok(plans)
}

/// Simulates `n_scenarios` completions of every line's lower triangle.
pub fn complete_triangles(
    portfolio: &Portfolio,
    models: &[MarginalModel],
    tree: &CopulaTree,
    config: &ScenarioConfig,
) -> Result<(ScenarioSet, Option<SimulationStats>)> {
    config.validate()?;
    let column = check_inputs(portfolio, models, tree)?;
    let size = portfolio.index().semesters();
    if size < 2 {
        return Err(Error::Config("a triangle of size 1 has no unobserved cells".into()));
    }
    let (n, k, periods) = (config.n_scenarios, models.len(), size - 1);
    let m = config
        .n_scenarios
        .checked_mul(config.oversample_factor)
        .ok_or_else(|| Error::Config("innovation pool size overflows".into()))?;

    let plans = row_plans(portfolio, models)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pool = simulate_innovation_matrix(tree, m, &mut rng)?;
    log::info!("innovation pool of {m} rows ready");

    let normal = Normal::standard();
    let mut cash = vec![0.0; n * k * periods];
    let mut stats = config.collect_stats.then(|| SimulationStats::new(k, size));
    let mut stream = 1u64;
    for i in 2..=size {
        let n_obs = size + 1 - i;
        let dim = i - 1;
        // one subsample of pool rows per lower cell of this accident semester
        let picks: Vec<Vec<usize>> = (0..dim)
            .map(|_| {
                let mut r = ChaCha8Rng::seed_from_u64(config.seed);
                r.set_stream(stream);
                stream += 1;
                index::sample(&mut r, m, n).into_vec()
            })
            .collect();
        let chunk_stats: Vec<Option<Vec<(Vec<CellMoments>, RowMoments, RowMoments)>>> = cash
            .par_chunks_mut(CHUNK * k * periods)
            .enumerate()
            .map(|(c, block)| {
                let mut local = stats
                    .as_ref()
                    .map(|_| vec![(vec![CellMoments::default(); dim], RowMoments::new(dim), RowMoments::new(dim)); k]);
                let mut u = vec![0.0; dim];
                let mut y = vec![0.0; dim];
                let mut ratios = vec![0.0; dim];
                for (o, flows) in block.chunks_mut(k * periods).enumerate() {
                    let s = c * CHUNK + o;
                    for (line, plan) in plans.iter().enumerate() {
                        let row = &plan[i - 2];
                        for (l, pick) in picks.iter().enumerate() {
                            u[l] = pool.row(pick[s])[column[line]];
                        }
                        for a in 0..dim {
                            let mut v = row.mean[a];
                            for b in 0..=a {
                                v += row.chol[(a, b)] * u[b];
                            }
                            y[a] = v;
                        }
                        let out = &mut flows[line * periods..(line + 1) * periods];
                        for l in 0..dim {
                            let level = normal.cdf(y[l]).clamp(f64::MIN_POSITIVE, U_MAX);
                            let ratio = row.tables[l].quantile(level).expect("level clamped into (0, 1)");
                            // lag n_obs + 1 + l pays in period l + 1
                            out[l] += ratio * row.premium;
                            ratios[l] = ratio;
                        }
                        if let Some(st) = local.as_mut() {
                            for (c, &r) in st[line].0.iter_mut().zip(&ratios) {
                                c.add(r);
                            }
                            st[line].1.add(&y);
                            st[line].2.add(&ratios);
                        }
                    }
                }
                local
            })
            .collect();
        if let Some(st) = stats.as_mut() {
            for local in chunk_stats.into_iter().flatten() {
                for (line, (cells, row, ratio_row)) in local.iter().enumerate() {
                    for (a, b) in st.cells[line][i - 1].iter_mut().zip(cells) {
                        a.merge(b);
                    }
                    st.rows[line][i - 1].merge(row);
                    st.ratio_rows[line][i - 1].merge(ratio_row);
                }
            }
        }
        log::debug!("accident semester {i} of {size} simulated ({n_obs} observed lags)");
    }
    let ids = models.iter().map(|m| m.line_id.clone()).collect();
    Ok((ScenarioSet::new(ids, size, config.seed, config.discount_rate, cash)?, stats))
}

