//! The three subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use triangle_risk_core::dependence::{build_tree, compute_innovations, CopulaFamily, CopulaSpec, CopulaTree, TreeOptions};
use triangle_risk_core::marginal::{default_p_grid, fit as fit_line, select_p_with, FitOptions, MarginalModel};
use triangle_risk_core::risk::capital_report;
use triangle_risk_core::simulate::{
    complete_triangles, discount_losses, load_scenarios, period_losses, save_scenarios, write_summary_csv,
};
use triangle_risk_core::triangles::{LossTriangle, Portfolio};

use crate::config::{PChoice, RunConfig};
use crate::error::{CliError, CliResult};

/// One fitted line as listed in the fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSummary {
    pub line_id: String,
    pub p: f64,
    pub p_from_grid: bool,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    /// Independence log-likelihood at each grid value of p; `None` where the fit failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_profile: Vec<(f64, Option<f64>)>,
}

/// One copula node as listed in the fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub group: String,
    pub shape: String,
    pub spec: CopulaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub lines: Vec<LineSummary>,
    pub copulas: Vec<NodeSummary>,
}

fn load_portfolio(c: &RunConfig) -> CliResult<Portfolio> {
    let (portfolio, clamped) = Portfolio::load_csv(c.input()?)?;
    if clamped > 0 {
        log::warn!("{clamped} negative incremental claims were set to zero");
    }
    Ok(portfolio)
}

fn fit_one(t: &LossTriangle, c: &RunConfig) -> CliResult<(MarginalModel, LineSummary)> {
    let line = |source| CliError::Line { line: t.line_id.clone(), source };
    let options = FitOptions::default();
    let (p, profile) = match (c.p_overrides.get(&t.line_id), &c.p) {
        (Some(p), _) | (None, PChoice::Fixed(p)) => (*p, Vec::new()),
        (None, PChoice::Grid(_)) => {
            let s = select_p_with(t, &default_p_grid(), &options).map_err(line)?;
            (s.p, s.profile)
        }
    };
    let model = fit_line(t, p, &options).map_err(line)?;
    let d = &model.diagnostics;
    let summary = LineSummary {
        line_id: t.line_id.clone(),
        p,
        p_from_grid: !profile.is_empty(),
        rho: model.rho,
        iterations: d.iterations,
        converged: d.converged,
        log_likelihood: d.log_likelihood,
        p_profile: profile,
    };
    Ok((model, summary))
}

/// Lines that share a region and are its only two lines.
fn region_pairs(portfolio: &Portfolio) -> Vec<(String, String)> {
    let mut regions: Vec<(&str, Vec<&str>)> = Vec::new();
    for l in &portfolio.lines {
        match regions.iter_mut().find(|(r, _)| *r == l.region) {
            Some((_, ids)) => ids.push(&l.line_id),
            None => regions.push((&l.region, vec![&l.line_id])),
        }
    }
    regions
        .into_iter()
        .filter(|(r, ids)| !r.is_empty() && ids.len() == 2)
        .map(|(_, ids)| (ids[0].to_string(), ids[1].to_string()))
        .collect()
}

/// `ON`, `AB+ATL`: the distinct id prefixes before `_` of the node's lines.
fn group_label(tree: &CopulaTree) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for id in tree.leaves() {
        let prefix = id.split_once('_').map_or(id, |(r, _)| r);
        if !parts.contains(&prefix) {
            parts.push(prefix);
        }
    }
    parts.join("+")
}

fn node_summaries(tree: &CopulaTree, out: &mut Vec<NodeSummary>) {
    if let CopulaTree::Node { spec, children } = tree {
        for c in children {
            node_summaries(c, out);
        }
        out.push(NodeSummary { group: group_label(tree), shape: tree.shape(), spec: spec.clone() });
    }
}

impl FitReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>6} {:>7} {:>10} {:>9} {:>15}", "Line", "p", "rho", "Iterations", "Converged", "Log-likelihood");
        for l in &self.lines {
            let src = if l.p_from_grid { "*" } else { " " };
            let _ = writeln!(
                s,
                "{:<12} {:>5.3}{src} {:>7.3} {:>10} {:>9} {:>15.3}",
                l.line_id,
                l.p,
                l.rho,
                l.iterations,
                if l.converged { "yes" } else { "no" },
                l.log_likelihood
            );
        }
        if self.lines.iter().any(|l| l.p_from_grid) {
            let _ = writeln!(s, "* p selected on the grid");
        }
        if self.copulas.is_empty() {
            return s;
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<14} {:<15} {:<24} {:>22} {:>8}",
            "Group", "Copula family", "Dependence parameters", "Standard error of rho", "p-value"
        );
        for n in &self.copulas {
            let (family, params) = match n.spec.family {
                CopulaFamily::StudentT { nu, rho } => ("t", format!("nu={nu}, rho={rho:.3}")),
                CopulaFamily::Independence => ("Independence", "-".to_string()),
            };
            let se = n.spec.rho_se.map_or("-".to_string(), |v| format!("{v:.3}"));
            let p = n.spec.p_value.map_or("-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(s, "{:<14} {:<15} {:<24} {:>22} {:>8}", n.group, family, params, se, p);
        }
        s
    }
}

/// Writes every file or none: on failure the files already written are removed.
fn write_all(files: &[(PathBuf, String)]) -> CliResult<()> {
    let mut done: Vec<&Path> = Vec::new();
    for (path, text) in files {
        let result = path
            .parent()
            .map_or(Ok(()), std::fs::create_dir_all)
            .and_then(|_| std::fs::write(path, text));
        if let Err(source) = result {
            for p in done {
                let _ = std::fs::remove_file(p);
            }
            return Err(CliError::Write { path: path.clone(), source });
        }
        done.push(path);
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(triangle_risk_core::Error::from)?;
    s.push('\n');
    Ok(s)
}

pub fn fit(c: &RunConfig) -> CliResult<FitReport> {
    let portfolio = load_portfolio(c)?;
    let fitted: Vec<(MarginalModel, LineSummary)> =
        portfolio.lines.par_iter().map(|t| fit_one(t, c)).collect::<CliResult<_>>()?;
    let tree = if portfolio.len() == 1 {
        CopulaTree::Leaf(portfolio.lines[0].line_id.clone())
    } else {
        let panels = fitted
            .iter()
            .zip(&portfolio.lines)
            .map(|((m, _), t)| compute_innovations(m, t))
            .collect::<Result<Vec<_>, _>>()?;
        let pairing = c.pairing.clone().unwrap_or_else(|| region_pairs(&portfolio));
        build_tree(&panels, &pairing, &TreeOptions { n_bootstrap: c.n_bootstrap, seed: c.seed })?
    };
    let mut copulas = Vec::new();
    node_summaries(&tree, &mut copulas);
    let report = FitReport { lines: fitted.iter().map(|(_, s)| s.clone()).collect(), copulas };

    let dir = c.models_dir();
    let mut files = Vec::new();
    for (m, _) in &fitted {
        files.push((dir.join(format!("{}.json", m.line_id)), to_json(m)?));
    }
    files.push((dir.join("tree.json"), tree.to_json()? + "\n"));
    files.push((c.output_dir().join("fit_report.json"), to_json(&report)?));
    files.push((c.output_dir().join("fit_report.txt"), report.to_text()));
    write_all(&files)?;
    Ok(report)
}

fn read_text(path: &Path) -> CliResult<String> {
    if !path.is_file() {
        return Err(CliError::MissingModel(path.into()));
    }
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })
}

/// Models of the portfolio's lines and the copula tree, from `models_dir`.
pub fn load_models(c: &RunConfig, portfolio: &Portfolio) -> CliResult<(Vec<MarginalModel>, CopulaTree)> {
    let dir = c.models_dir();
    let models = portfolio
        .lines
        .iter()
        .map(|l| Ok(MarginalModel::from_json(&read_text(&dir.join(format!("{}.json", l.line_id)))?)?))
        .collect::<CliResult<Vec<_>>>()?;
    let tree = CopulaTree::from_json(&read_text(&dir.join("tree.json"))?)?;
    Ok((models, tree))
}

pub struct SimulateSummary {
    pub scenarios: usize,
    pub seconds: f64,
    pub path: PathBuf,
}

pub fn simulate(c: &RunConfig) -> CliResult<SimulateSummary> {
    let portfolio = load_portfolio(c)?;
    let (models, tree) = load_models(c, &portfolio)?;
    let start = Instant::now();
    let (set, _) = complete_triangles(&portfolio, &models, &tree, &c.scenario_config())?;
    let seconds = start.elapsed().as_secs_f64();
    let path = c.scenario_path();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Write { path: parent.into(), source })?;
    }
    save_scenarios(&set, &path)?;
    let csv = c.output_dir().join("scenarios.csv");
    let file = std::fs::File::create(&csv).map_err(|source| CliError::Write { path: csv.clone(), source })?;
    write_summary_csv(&set, std::io::BufWriter::new(file))?;
    Ok(SimulateSummary { scenarios: set.scenarios(), seconds, path })
}

pub fn report(c: &RunConfig) -> CliResult<triangle_risk_core::risk::CapitalReport> {
    let path = c.scenario_path();
    if !path.is_file() {
        return Err(CliError::Read {
            path: path.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no scenario file; run `triangle-risk simulate` first"),
        });
    }
    let set = load_scenarios(&path)?;
    let losses = discount_losses(&set, c.report.discount_rate)?;
    let periods = period_losses(&set)?;
    let report = capital_report(&losses, &periods, &c.report)?;
    write_all(&[
        (c.output_dir().join("report.json"), to_json(&report)?),
        (c.output_dir().join("report.txt"), report.to_text()),
    ])?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(id: &str) -> CopulaTree {
        CopulaTree::Leaf(id.into())
    }

    #[test]
    fn group_labels_use_region_prefixes() {
        let on = CopulaTree::node(CopulaSpec::independence(), leaf("ON_PA"), leaf("ON_CA"));
        let ab = CopulaTree::node(CopulaSpec::independence(), leaf("AB_PA"), leaf("AB_CA"));
        let atl = CopulaTree::node(CopulaSpec::independence(), leaf("ATL_PA"), leaf("ATL_CA"));
        let rest = CopulaTree::node(CopulaSpec::independence(), ab, atl);
        assert_eq!(group_label(&rest), "AB+ATL");
        let root = CopulaTree::node(CopulaSpec::independence(), on, rest);
        assert_eq!(group_label(&root), "ON+AB+ATL");
        let mut nodes = Vec::new();
        node_summaries(&root, &mut nodes);
        let groups: Vec<&str> = nodes.iter().map(|n| n.group.as_str()).collect();
        assert_eq!(groups, ["ON", "AB", "ATL", "AB+ATL", "ON+AB+ATL"]);
        assert_eq!(group_label(&leaf("plain")), "plain");
    }

    #[test]
    fn failed_writes_leave_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("a.json");
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let files = vec![(ok.clone(), "{}".to_string()), (blocker.join("b.json"), "{}".to_string())];
        assert!(matches!(write_all(&files), Err(CliError::Write { .. })));
        assert!(!ok.exists());
    }
}
