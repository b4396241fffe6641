//! Capital report: TVaR capital and its allocation, risk adjustments and the
//! cost-of-capital sensitivity, as JSON and aligned text tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::allocation::{euler_allocation, LossSample};
use super::coc::{coc_risk_adjustment, CocAssumptions, DEFAULT_CAPITAL_LEVEL, DEFAULT_COST_RATE, DEFAULT_DISCOUNT_RATE};
use super::measures::{equivalent_alpha, mean, tvar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub capital_alpha: f64,
    pub adjustment_alpha: f64,
    pub cost_rate: f64,
    pub discount_rate: f64,
    pub capital_level: f64,
    pub sensitivity_rates: Vec<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            capital_alpha: 0.99,
            adjustment_alpha: 0.87,
            cost_rate: DEFAULT_COST_RATE,
            discount_rate: DEFAULT_DISCOUNT_RATE,
            capital_level: DEFAULT_CAPITAL_LEVEL,
            sensitivity_rates: vec![0.04, 0.05, 0.06],
        }
    }
}

impl ReportConfig {
    fn coc(&self, horizon: usize, rate: f64) -> CocAssumptions {
        CocAssumptions { capital_level: self.capital_level, ..CocAssumptions::flat(horizon, rate, self.discount_rate) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapitalTable {
    pub alpha: f64,
    /// Euler allocation of the aggregate TVaR.
    pub aggregate: Vec<f64>,
    pub aggregate_total: f64,
    /// Standalone TVaR of each line.
    pub silo: Vec<f64>,
    pub silo_total: f64,
    pub diversification_benefit: f64,
    pub tail_count: usize,
    pub tail_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentTable {
    pub alpha: f64,
    pub expected: Vec<f64>,
    pub expected_total: f64,
    /// Euler allocation of `TVaR(S) - E(S)`.
    pub aggregate: Vec<f64>,
    pub aggregate_total: f64,
    pub silo: Vec<f64>,
    pub silo_total: f64,
    /// Cost-of-capital risk adjustment per line (standalone capital).
    pub coc: Vec<f64>,
    /// Cost-of-capital risk adjustment of the portfolio.
    pub coc_total: f64,
    /// Level at which `VaR(X) - E(X)` equals the line's cost-of-capital amount.
    pub equivalent_alpha: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub cost_rate: f64,
    pub lines: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapitalReport {
    pub line_ids: Vec<String>,
    pub n_scenarios: usize,
    pub config: ReportConfig,
    pub capital: CapitalTable,
    pub risk_adjustment: AdjustmentTable,
    pub sensitivity: Vec<SensitivityRow>,
}

struct CocPanel {
    lines: Vec<f64>,
    total: f64,
}

fn coc_panel(periods: &[LossSample], a: &CocAssumptions) -> Result<CocPanel> {
    let k = periods[0].lines();
    let lines = (0..k)
        .map(|l| {
            let x: Vec<Vec<f64>> = periods.iter().map(|p| p.line(l)).collect();
            Ok(coc_risk_adjustment(&x, a)?.adjustment)
        })
        .collect::<Result<Vec<f64>>>()?;
    let agg: Vec<Vec<f64>> = periods.iter().map(|p| p.aggregate().to_vec()).collect();
    Ok(CocPanel { lines, total: coc_risk_adjustment(&agg, a)?.adjustment })
}

/// `losses` holds the discounted loss of each line; `periods[t - 1]` the
/// nominal losses paid in period `t`.
pub fn capital_report(losses: &LossSample, periods: &[LossSample], config: &ReportConfig) -> Result<CapitalReport> {
    if periods.is_empty() {
        return Err(Error::Config("cost-of-capital needs at least one payment period".into()));
    }
    if periods.iter().any(|p| p.line_ids != losses.line_ids || p.scenarios() != losses.scenarios()) {
        return Err(Error::Config("period losses must cover the same lines and scenarios".into()));
    }
    let k = losses.lines();
    let lines: Vec<Vec<f64>> = (0..k).map(|l| losses.line(l)).collect();
    let s = losses.aggregate();

    let e = euler_allocation(losses, config.capital_alpha)?;
    let silo = lines.iter().map(|x| tvar(x, config.capital_alpha)).collect::<Result<Vec<f64>>>()?;
    let silo_total: f64 = silo.iter().sum();
    let aggregate_total = tvar(s, config.capital_alpha)?;
    let capital = CapitalTable {
        alpha: config.capital_alpha,
        aggregate: e.allocation,
        aggregate_total,
        silo,
        silo_total,
        diversification_benefit: silo_total - aggregate_total,
        tail_count: e.tail_count,
        tail_mean: e.tail_mean,
    };

    let a = config.adjustment_alpha;
    let expected = lines.iter().map(|x| mean(x)).collect::<Result<Vec<f64>>>()?;
    let expected_total = mean(s)?;
    let ea = euler_allocation(losses, a)?;
    let silo_ra = lines
        .iter()
        .zip(&expected)
        .map(|(x, m)| Ok(tvar(x, a)? - m))
        .collect::<Result<Vec<f64>>>()?;
    let horizon = periods.len();
    let coc = coc_panel(periods, &config.coc(horizon, config.cost_rate))?;
    let equivalent = lines
        .iter()
        .zip(&coc.lines)
        .map(|(x, &c)| equivalent_alpha(x, c).ok())
        .collect();
    let risk_adjustment = AdjustmentTable {
        alpha: a,
        aggregate: ea.allocation.iter().zip(&expected).map(|(x, m)| x - m).collect(),
        aggregate_total: tvar(s, a)? - expected_total,
        silo_total: silo_ra.iter().sum(),
        silo: silo_ra,
        expected,
        expected_total,
        coc: coc.lines,
        coc_total: coc.total,
        equivalent_alpha: equivalent,
    };

    let sensitivity = config
        .sensitivity_rates
        .iter()
        .map(|&r| {
            let p = coc_panel(periods, &config.coc(horizon, r))?;
            Ok(SensitivityRow { cost_rate: r, lines: p.lines, total: p.total })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CapitalReport {
        line_ids: losses.line_ids.clone(),
        n_scenarios: losses.scenarios(),
        config: config.clone(),
        capital,
        risk_adjustment,
        sensitivity,
    })
}

/// Thousands-separated amount, two decimals below 1000 in magnitude.
pub fn format_amount(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x.abs() < 1000.0 {
        return format!("{x:.2}");
    }
    let digits = format!("{:.0}", x.abs());
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    if x < 0.0 {
        out.insert(0, '-');
    }
    out
}

fn percent(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

struct Table {
    label_width: usize,
    widths: Vec<usize>,
    out: String,
}

impl Table {
    fn new(header: &[String], label_width: usize, body: &[Vec<String>]) -> Self {
        let widths = (0..header.len())
            .map(|c| body.iter().map(|r| r.get(c).map_or(0, String::len)).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let mut t = Table { label_width, widths, out: String::new() };
        t.row("", header);
        t.rule();
        t
    }

    fn row(&mut self, label: &str, cells: &[String]) {
        let _ = write!(self.out, "{label:<w$}", w = self.label_width);
        for (c, w) in self.widths.iter().enumerate() {
            let _ = write!(self.out, "  {:>w$}", cells.get(c).map_or("", String::as_str), w = w);
        }
        self.out.truncate(self.out.trim_end().len());
        self.out.push('\n');
    }

    fn rule(&mut self) {
        let n = self.label_width + self.widths.iter().map(|w| w + 2).sum::<usize>();
        self.out.push_str(&"-".repeat(n));
        self.out.push('\n');
    }
}

impl CapitalReport {
    fn header(&self) -> Vec<String> {
        self.line_ids.iter().cloned().chain(["Total".to_string()]).collect()
    }

    fn amounts(values: &[f64], total: Option<f64>) -> Vec<String> {
        values.iter().copied().chain(total).map(format_amount).collect()
    }

    /// Economic capital and its allocation to lines.
    pub fn capital_table(&self) -> String {
        let c = &self.capital;
        let level = percent(c.alpha);
        let rows = vec![Self::amounts(&c.aggregate, Some(c.aggregate_total)), Self::amounts(&c.silo, Some(c.silo_total))];
        let label_a = format!("TVaR_{level}%  Aggregate");
        let label_s = format!("{:w$}  Silo", "", w = format!("TVaR_{level}%").len());
        let lw = label_a.len().max(label_s.len());
        let mut t = Table::new(&self.header(), lw, &rows);
        t.row(&label_a, &rows[0]);
        t.row(&label_s, &rows[1]);
        t.rule();
        let mut out = format!("Economic capital and allocation to business lines\n\n{}", t.out);
        let _ = writeln!(out, "Diversification benefit: {}", format_amount(c.diversification_benefit));
        out
    }

    /// Risk adjustments by TVaR and by cost of capital, with equivalent levels.
    pub fn adjustment_table(&self) -> String {
        let r = &self.risk_adjustment;
        let level = percent(r.alpha);
        let rows = vec![
            Self::amounts(&r.expected, Some(r.expected_total)),
            Self::amounts(&r.aggregate, Some(r.aggregate_total)),
            Self::amounts(&r.silo, Some(r.silo_total)),
            Self::amounts(&r.coc, Some(r.coc_total)),
            r.equivalent_alpha.iter().map(|a| a.map_or("n/a".into(), percent)).collect(),
        ];
        let tv = format!("TVaR_{level}%(X) - E(X)");
        let labels = [
            "E(X)".to_string(),
            format!("{tv}  Aggregate"),
            format!("{:w$}  Silo", "", w = tv.len()),
            "CoC".to_string(),
            "Equivalent alpha for VaR_a(X) - E(X) (%)".to_string(),
        ];
        let lw = labels.iter().map(String::len).max().unwrap_or(0);
        let mut t = Table::new(&self.header(), lw, &rows);
        for (k, (l, row)) in labels.iter().zip(&rows).enumerate() {
            t.row(l, row);
            if k == 0 || k == 2 {
                t.rule();
            }
        }
        t.rule();
        format!("Risk adjustments for non-financial risks and allocation to business lines\n\n{}", t.out)
    }

    /// Cost-of-capital risk adjustment over the sensitivity rates.
    pub fn sensitivity_table(&self) -> String {
        let rows: Vec<Vec<String>> = self.sensitivity.iter().map(|s| Self::amounts(&s.lines, Some(s.total))).collect();
        let labels: Vec<String> = self.sensitivity.iter().map(|s| format!("{}%", percent(s.cost_rate))).collect();
        let lw = labels.iter().map(String::len).chain(["Cost of capital rate".len()]).max().unwrap_or(0);
        let mut t = Table::new(&self.header(), lw, &rows);
        // first header cell carries the row label
        t.out = t.out.replacen(&" ".repeat("Cost of capital rate".len()), "Cost of capital rate", 1);
        for (l, row) in labels.iter().zip(&rows) {
            t.row(l, row);
        }
        t.rule();
        format!("Sensitivity of the risk adjustment to the cost of capital rate\n\n{}", t.out)
    }

    pub fn to_text(&self) -> String {
        format!(
            "{}\n{}\n{}\nScenarios: {}\n",
            self.capital_table(),
            self.adjustment_table(),
            self.sensitivity_table(),
            self.n_scenarios
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn sample(n: usize) -> (LossSample, Vec<LossSample>) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ids: Vec<String> = ["ON_PA", "ON_CA", "AB_PA"].iter().map(|s| s.to_string()).collect();
        let periods: Vec<LossSample> = (0..4)
            .map(|t| {
                let g = Gamma::new(2.0, 100.0 / (t + 1) as f64).unwrap();
                let data = (0..n * 3).map(|_| g.sample(&mut rng)).collect();
                LossSample::new(ids.clone(), data).unwrap()
            })
            .collect();
        let data = (0..n)
            .flat_map(|s| {
                let periods = &periods;
                (0..3).map(move |k| periods.iter().enumerate().map(|(t, p)| p.row(s)[k] / 1.02f64.powi(t as i32 + 1)).sum())
            })
            .collect();
        (LossSample::new(ids, data).unwrap(), periods)
    }

    #[test]
    fn report_is_consistent() {
        let (l, p) = sample(20_000);
        let r = capital_report(&l, &p, &ReportConfig::default()).unwrap();
        let c = &r.capital;
        assert!((c.aggregate.iter().sum::<f64>() - c.tail_mean).abs() <= 1e-9 * c.tail_mean);
        assert!(c.silo_total >= c.aggregate_total);
        assert!((c.diversification_benefit - (c.silo_total - c.aggregate_total)).abs() < 1e-9);
        let totals: Vec<f64> = r.sensitivity.iter().map(|s| s.total).collect();
        assert!(totals.windows(2).all(|w| w[0] < w[1]));
        assert!(r.risk_adjustment.equivalent_alpha.iter().all(|a| a.is_some_and(|a| a > 0.5 && a < 1.0)));
        let json = serde_json::to_string(&r).unwrap();
        let back: CapitalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn text_tables_have_the_expected_headers() {
        let (l, p) = sample(2000);
        let r = capital_report(&l, &p, &ReportConfig::default()).unwrap();
        let t = r.capital_table();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Economic capital and allocation to business lines");
        let header: Vec<&str> = lines[2].split_whitespace().collect();
        assert_eq!(header, ["ON_PA", "ON_CA", "AB_PA", "Total"]);
        assert!(lines[4].starts_with("TVaR_99.00%  Aggregate"));
        assert!(lines[5].trim_start().starts_with("Silo"));

        let a = r.adjustment_table();
        let labels: Vec<&str> = a.lines().skip(4).filter(|l| !l.starts_with('-')).collect();
        assert!(labels[0].starts_with("E(X)"));
        assert!(labels[1].starts_with("TVaR_87.00%(X) - E(X)  Aggregate"));
        assert!(labels[2].trim_start().starts_with("Silo"));
        assert!(labels[3].starts_with("CoC"));
        assert!(labels[4].starts_with("Equivalent alpha for VaR_a(X) - E(X) (%)"));

        let s = r.sensitivity_table();
        let rows: Vec<&str> = s.lines().collect();
        assert!(rows[2].starts_with("Cost of capital rate"));
        assert!(rows[2].ends_with("Total"));
        assert!(rows[4].starts_with("4.00%") && rows[5].starts_with("5.00%") && rows[6].starts_with("6.00%"));
    }

    #[test]
    fn amounts_are_grouped() {
        assert_eq!(format_amount(115_647.4), "115,647");
        assert_eq!(format_amount(-1_234_567.0), "-1,234,567");
        assert_eq!(format_amount(637.0), "637.00");
        assert_eq!(format_amount(0.5), "0.50");
    }

    #[test]
    fn mismatched_periods_are_rejected() {
        let (l, p) = sample(100);
        assert!(capital_report(&l, &[], &ReportConfig::default()).is_err());
        let other = LossSample::new(vec!["A".into(), "B".into(), "C".into()], p[0].row(0).repeat(100)).unwrap();
        assert!(capital_report(&l, &[other], &ReportConfig::default()).is_err());
    }
}
