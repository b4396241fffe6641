//! Iman-Conover reordering of independent normal columns into the joint
//! ranks of a hierarchical copula.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dependence::gof::ranks;
use crate::dependence::{CopulaFamily, CopulaTree};
use crate::error::{Error, Result};

/// Row `r` of the output pairs the `ranks[r].0`-th smallest `x` with the
/// `ranks[r].1`-th smallest `y` (ranks are 1-based).
pub fn reorder_pairs(x: &[f64], y: &[f64], ranks: &[(usize, usize)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    if y.len() != n || ranks.len() != n {
        return Err(Error::Config("reordering needs samples and ranks of equal length".into()));
    }
    if ranks.iter().any(|&(a, b)| a == 0 || b == 0 || a > n || b > n) {
        return Err(Error::Config(format!("ranks must lie in 1..={n}")));
    }
    let (ox, oy) = (sorted(x), sorted(y));
    Ok(ranks.iter().map(|&(a, b)| (ox[a - 1], oy[b - 1])).unzip())
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn argsort(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    order
}

/// `m` joint draws of standard-normal innovations, one column per leaf of the
/// tree in leaf order, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationPool {
    pub line_ids: Vec<String>,
    m: usize,
    data: Vec<f64>,
}

impl InnovationPool {
    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn lines(&self) -> usize {
        self.line_ids.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let k = self.lines();
        &self.data[r * k..(r + 1) * k]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.m).map(|r| self.row(r)[c]).collect()
    }
}

/// Columns of one subtree, kept column-major while reordering.
struct Block {
    ids: Vec<String>,
    cols: Vec<Vec<f64>>,
    sum: Vec<f64>,
}

impl Block {
    fn permuted(self, order: impl Fn(usize) -> usize, m: usize) -> Block {
        let cols = self.cols.iter().map(|c| (0..m).map(|r| c[order(r)]).collect()).collect();
        let sum = (0..m).map(|r| self.sum[order(r)]).collect();
        Block { ids: self.ids, cols, sum }
    }
}

fn build<R: Rng + ?Sized>(tree: &CopulaTree, m: usize, rng: &mut R) -> Block {
    match tree {
        CopulaTree::Leaf(id) => {
            let col: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            Block { ids: vec![id.clone()], sum: col.clone(), cols: vec![col] }
        }
        CopulaTree::Node { spec, children } => {
            let left = build(&children[0], m, rng);
            let right = build(&children[1], m, rng);
            let (left, right) = match spec.family {
                // independent children are already in independent order
                CopulaFamily::Independence => (left, right),
                family @ CopulaFamily::StudentT { .. } => {
                    let (a, b) = family.sample_latent(m, rng);
                    let (ra, rb) = (ranks(&a), ranks(&b));
                    let (ol, or) = (argsort(&left.sum), argsort(&right.sum));
                    (left.permuted(|r| ol[ra[r] - 1], m), right.permuted(|r| or[rb[r] - 1], m))
                }
            };
            let sum = left.sum.iter().zip(&right.sum).map(|(a, b)| a + b).collect();
            let mut ids = left.ids;
            ids.extend(right.ids);
            let mut cols = left.cols;
            cols.extend(right.cols);
            Block { ids, cols, sum }
        }
    }
}

/// Simulates independent normal columns and reorders them node by node so
/// that the ranks of each node's two subtree sums follow that node's copula.
/// Rows are moved whole, so every column stays a permutation of its draws.
pub fn simulate_innovation_matrix<R: Rng + ?Sized>(tree: &CopulaTree, m: usize, rng: &mut R) -> Result<InnovationPool> {
    tree.validate()?;
    if m == 0 {
        return Err(Error::Config("innovation pool needs at least one row".into()));
    }
    let b = build(tree, m, rng);
    let k = b.cols.len();
    let mut data = vec![0.0; m * k];
    for (c, col) in b.cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            data[r * k + c] = *v;
        }
    }
    Ok(InnovationPool { line_ids: b.ids, m, data })
}
