//! Writes `fixtures/portfolio.csv`: one synthetic 30 x 30 triangle per
//! fixture model, with cross-line innovation correlation taken from the
//! fixture copula parameters.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use triangle_risk_core::marginal::MarginalModel;
use triangle_risk_core::synth::simulate_portfolio;
use triangle_risk_core::triangles::{Portfolio, Semester};

const LINES: [(&str, f64); 6] =
    [("ON_PA", 2000.0), ("ON_CA", 600.0), ("AB_PA", 700.0), ("AB_CA", 200.0), ("ATL_PA", 400.0), ("ATL_CA", 80.0)];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let models = LINES
        .iter()
        .map(|(id, _)| MarginalModel::from_json(&std::fs::read_to_string(dir.join("models").join(format!("{id}.json")))?))
        .collect::<Result<Vec<_>, _>>()?;
    let size = models[0].size();
    // earned premium per semester, growing 1.5% per semester
    let premiums = LINES.iter().map(|(_, p)| (0..size).map(|i| p * 1.015f64.powi(i as i32)).collect()).collect();
    let mut cross = DMatrix::identity(6, 6);
    for (a, b, r) in [(0, 1, 0.166), (2, 3, 0.29), (2, 4, 0.228), (2, 5, 0.228), (3, 4, 0.228), (3, 5, 0.228)] {
        cross[(a, b)] = r;
        cross[(b, a)] = r;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2003);
    let sim = simulate_portfolio(&models, premiums, &cross, &mut rng)?;
    let origin = Semester::parse("2003-1").expect("valid semester");
    let lines = sim
        .lines
        .into_iter()
        .map(|t| {
            let (region, coverage) = t.line_id.split_once('_').expect("REGION_COVERAGE id");
            let (region, coverage) = (region.to_string(), coverage.to_string());
            t.with_metadata(&region, &coverage, origin)
        })
        .collect();
    let out = dir.join("portfolio.csv");
    Portfolio::new(lines)?.save_csv(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
