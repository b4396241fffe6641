//! Hierarchical copula tree built by agglomerating clusters of lines.
//!
//! First-level pairs are given. Afterwards the two clusters whose summed
//! decorrelated innovations have the largest absolute Kendall tau are joined,
//! until one cluster remains. Pseudo-uniforms are re-ranked at every node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::copula::CopulaFamily;
use super::fit::{fit_bivariate, CopulaSpec};
use super::gof::gof_cvm;
use super::innovations::{pseudo_uniforms, InnovationPanel};
use super::kendall::kendall_tau;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CopulaTree {
    Leaf(String),
    Node {
        #[serde(flatten)]
        spec: CopulaSpec,
        children: Vec<CopulaTree>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeOptions {
    /// Bootstrap replicates for the goodness-of-fit p-value at each node; 0 skips it.
    pub n_bootstrap: usize,
    pub seed: u64,
}

impl CopulaTree {
    pub fn node(spec: CopulaSpec, left: CopulaTree, right: CopulaTree) -> Self {
        CopulaTree::Node { spec, children: vec![left, right] }
    }

    /// Line ids in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            CopulaTree::Leaf(id) => out.push(id),
            CopulaTree::Node { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    /// Internal nodes in post-order.
    pub fn specs(&self) -> Vec<&CopulaSpec> {
        let mut out = Vec::new();
        self.collect_specs(&mut out);
        out
    }

    fn collect_specs<'a>(&'a self, out: &mut Vec<&'a CopulaSpec>) {
        if let CopulaTree::Node { spec, children } = self {
            children.iter().for_each(|c| c.collect_specs(out));
            out.push(spec);
        }
    }

    /// Checks the binary shape and that leaves are distinct.
    pub fn validate(&self) -> Result<()> {
        fn walk(t: &CopulaTree) -> Result<()> {
            if let CopulaTree::Node { spec, children } = t {
                if children.len() != 2 {
                    return Err(Error::Config(format!("copula tree node has {} children, expected 2", children.len())));
                }
                if let CopulaFamily::StudentT { nu, rho } = spec.family {
                    CopulaFamily::student_t(nu, rho)?;
                }
                children.iter().try_for_each(walk)?;
            }
            Ok(())
        }
        walk(self)?;
        let mut ids = self.leaves();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("line {} appears twice in the copula tree", w[0])));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: CopulaTree = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    /// Nested-parenthesis rendering of the shape.
    pub fn shape(&self) -> String {
        match self {
            CopulaTree::Leaf(id) => id.clone(),
            CopulaTree::Node { children, .. } => {
                format!("({})", children.iter().map(|c| c.shape()).collect::<Vec<_>>().join(", "))
            }
        }
    }
}

struct Cluster {
    tree: CopulaTree,
    sum: Vec<f64>,
}

fn fit_node(a: &Cluster, b: &Cluster, options: &TreeOptions, node: usize) -> Result<CopulaSpec> {
    let (u, v) = (pseudo_uniforms(&a.sum), pseudo_uniforms(&b.sum));
    let mut spec = fit_bivariate(&u, &v)?;
    if options.n_bootstrap > 0 {
        let seed = options.seed.wrapping_add(node as u64);
        spec.p_value = Some(gof_cvm(&spec.family, &u, &v, options.n_bootstrap, seed)?);
    }
    Ok(spec)
}

fn join(a: Cluster, b: Cluster, spec: CopulaSpec) -> Cluster {
    let sum = a.sum.iter().zip(&b.sum).map(|(x, y)| x + y).collect();
    Cluster { tree: CopulaTree::node(spec, a.tree, b.tree), sum }
}

/// Builds the tree from per-line panels. Lines absent from `pairing` enter
/// the agglomeration as single-line clusters.
pub fn build_tree(panels: &[InnovationPanel], pairing: &[(String, String)], options: &TreeOptions) -> Result<CopulaTree> {
    if panels.len() < 2 {
        return Err(Error::Config(format!("a copula tree needs at least 2 lines, got {}", panels.len())));
    }
    let n = panels[0].decorrelated.len();
    if let Some(p) = panels.iter().find(|p| p.decorrelated.len() != n) {
        return Err(Error::Config(format!("line {} has {} innovations, expected {n}", p.line_id, p.decorrelated.len())));
    }
    let position = |id: &str| {
        panels
            .iter()
            .position(|p| p.line_id == id)
            .ok_or_else(|| Error::Config(format!("pairing names unknown line {id}")))
    };
    let mut used = vec![false; panels.len()];
    let mut pairs = Vec::with_capacity(pairing.len());
    for (a, b) in pairing {
        let (ia, ib) = (position(a)?, position(b)?);
        if ia == ib || used[ia] || used[ib] {
            return Err(Error::Config(format!("line appears in more than one first-level pair: ({a}, {b})")));
        }
        used[ia] = true;
        used[ib] = true;
        pairs.push((ia, ib));
    }
    let leaf = |k: usize| Cluster { tree: CopulaTree::Leaf(panels[k].line_id.clone()), sum: panels[k].decorrelated.clone() };

    let first: Vec<CopulaSpec> = pairs
        .par_iter()
        .enumerate()
        .map(|(node, &(a, b))| fit_node(&leaf(a), &leaf(b), options, node))
        .collect::<Result<_>>()?;
    let mut clusters: Vec<Cluster> = pairs.iter().zip(first).map(|(&(a, b), spec)| join(leaf(a), leaf(b), spec)).collect();
    clusters.extend((0..panels.len()).filter(|&k| !used[k]).map(leaf));

    let mut node = pairs.len();
    while clusters.len() > 1 {
        let mut best = (0, 1, f64::NEG_INFINITY);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let tau = kendall_tau(&clusters[a].sum, &clusters[b].sum).abs();
                if tau > best.2 {
                    best = (a, b, tau);
                }
            }
        }
        let (a, b, tau) = best;
        log::debug!("joining {} and {} at |tau| = {tau:.4}", clusters[a].tree.shape(), clusters[b].tree.shape());
        let spec = fit_node(&clusters[a], &clusters[b], options, node)?;
        node += 1;
        let cb = clusters.remove(b);
        let ca = clusters.remove(a);
        clusters.insert(a, join(ca, cb, spec));
    }
    Ok(clusters.pop().expect("one cluster remains").tree)
}
