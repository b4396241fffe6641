//! Risk measures on simulated losses: VaR, TVaR, Euler allocation,
//! diversification benefit and cost-of-capital risk adjustment.

mod allocation;
mod coc;
mod measures;
mod report;

pub use allocation::{diversification_benefit, euler_allocation, EulerAllocation, LossSample};
pub use coc::{
    coc_from_capital, coc_risk_adjustment, CocAssumptions, CocResult, DEFAULT_CAPITAL_LEVEL, DEFAULT_COST_RATE,
    DEFAULT_DISCOUNT_RATE,
};
pub use measures::{equivalent_alpha, mean, sorted, tvar, tvar_sorted, var, var_index, var_sorted};
pub use report::{capital_report, format_amount, AdjustmentTable, CapitalReport, CapitalTable, ReportConfig, SensitivityRow};
