//! Shared inputs for the benchmarks.

use std::path::{Path, PathBuf};

use triangle_risk_core::dependence::CopulaTree;
use triangle_risk_core::marginal::MarginalModel;
use triangle_risk_core::triangles::Portfolio;
use triangle_risk_core::Result;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

/// The bundled portfolio with its reference models and copula tree.
pub fn fixture_inputs() -> Result<(Portfolio, Vec<MarginalModel>, CopulaTree)> {
    let dir = fixture_dir();
    let (portfolio, _) = Portfolio::load_csv(dir.join("portfolio.csv"))?;
    let models = portfolio
        .lines
        .iter()
        .map(|l| MarginalModel::from_json(&std::fs::read_to_string(dir.join("models").join(format!("{}.json", l.line_id)))?))
        .collect::<Result<Vec<_>>>()?;
    let tree = CopulaTree::from_json(&std::fs::read_to_string(dir.join("models/tree.json"))?)?;
    Ok((portfolio, models, tree))
}
