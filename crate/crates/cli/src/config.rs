//! Run configuration: JSON file, then command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use triangle_risk_core::dependence::DEFAULT_BOOTSTRAP;
use triangle_risk_core::risk::ReportConfig;
use triangle_risk_core::simulate::{ScenarioConfig, DEFAULT_OVERSAMPLE};
use triangle_risk_core::tweedie::check_p;

use crate::error::{CliError, CliResult};

/// Tweedie index choice for the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PChoice {
    Fixed(f64),
    /// Must be the string `"grid"`.
    Grid(String),
}

impl PChoice {
    pub fn parse(s: &str) -> CliResult<Self> {
        if s == "grid" {
            return Ok(PChoice::Grid(s.into()));
        }
        s.parse()
            .map(PChoice::Fixed)
            .map_err(|_| CliError::Usage(format!("--p expects `grid` or a number, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Portfolio CSV, one row per observed cell.
    pub input: Option<PathBuf>,
    /// `out` in the working directory if unset.
    pub output_dir: Option<PathBuf>,
    /// Where `fit` writes and `simulate` reads the models; `<output_dir>/models` if unset.
    pub models_dir: Option<PathBuf>,
    /// Scenario file; `<output_dir>/scenarios.bin` if unset.
    pub scenarios: Option<PathBuf>,
    pub p: PChoice,
    /// Per-line index, taking precedence over `p`.
    pub p_overrides: BTreeMap<String, f64>,
    /// First-level pairs of the copula tree; lines sharing a region if unset.
    pub pairing: Option<Vec<(String, String)>>,
    pub n_bootstrap: usize,
    pub n_scenarios: usize,
    pub oversample_factor: usize,
    pub seed: u64,
    pub report: ReportConfig,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output_dir: None,
            models_dir: None,
            scenarios: None,
            p: PChoice::Grid("grid".into()),
            p_overrides: BTreeMap::new(),
            pairing: None,
            n_bootstrap: DEFAULT_BOOTSTRAP,
            n_scenarios: 100_000,
            oversample_factor: DEFAULT_OVERSAMPLE,
            seed: 0,
            report: ReportConfig::default(),
            threads: None,
        }
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub threads: Option<usize>,
    pub p: Option<PChoice>,
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reads `path` (or starts from defaults) and applies `overrides`.
    /// Relative paths in the file are taken from the file's directory.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut c = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| CliError::Read { path: p.into(), source })?;
                let mut c: RunConfig =
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                c.rebase(base);
                c
            }
            None => RunConfig::default(),
        };
        c.apply(overrides);
        c.validate()?;
        Ok(c)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.input.as_mut() {
            join(p);
        }
        if let Some(p) = self.output_dir.as_mut() {
            join(p);
        }
        if let Some(p) = self.models_dir.as_mut() {
            join(p);
        }
        if let Some(p) = self.scenarios.as_mut() {
            join(p);
        }
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.n {
            self.n_scenarios = v;
        }
        if let Some(v) = o.alpha {
            self.report.capital_alpha = v;
        }
        if let Some(v) = o.threads {
            self.threads = Some(v);
        }
        if let Some(v) = &o.p {
            self.p = v.clone();
        }
        if let Some(v) = &o.input {
            self.input = Some(v.clone());
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = Some(v.clone());
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        match &self.p {
            PChoice::Grid(s) if s != "grid" => return bad(format!("p must be `grid` or a number, got `{s}`")),
            PChoice::Fixed(p) => check_p(*p)?,
            _ => {}
        }
        for p in self.p_overrides.values() {
            check_p(*p)?;
        }
        if self.n_scenarios == 0 {
            return bad("n_scenarios must be at least 1".into());
        }
        let r = &self.report;
        for (name, a) in [("capital_alpha", r.capital_alpha), ("adjustment_alpha", r.adjustment_alpha), ("capital_level", r.capital_level)] {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {a}"));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if let Some(p) = &self.input {
            if !p.is_file() {
                return bad(format!("input {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn input(&self) -> CliResult<&Path> {
        self.input.as_deref().ok_or_else(|| CliError::Config("no input portfolio; set `input` or pass --input".into()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.models_dir.clone().unwrap_or_else(|| self.output_dir().join("models"))
    }

    pub fn scenario_path(&self) -> PathBuf {
        self.scenarios.clone().unwrap_or_else(|| self.output_dir().join("scenarios.bin"))
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            n_scenarios: self.n_scenarios,
            oversample_factor: self.oversample_factor,
            seed: self.seed,
            discount_rate: self.report.discount_rate,
            collect_stats: false,
        }
    }
}
