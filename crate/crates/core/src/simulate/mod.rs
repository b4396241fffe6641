//! Scenario generation: hierarchical-copula innovations by Iman-Conover
//! reordering, conditional AR(1) coloring and Tweedie quantile transform.

mod conditional;
mod io;
mod reorder;
mod scenarios;

pub use conditional::{conditional_cell_law, conditional_factor, conditional_innovation_params, CellLaw};
pub use io::{load_scenarios, read_scenarios, save_scenarios, write_scenarios, write_summary_csv, MAGIC};
pub use reorder::{reorder_pairs, simulate_innovation_matrix, InnovationPool};
pub use scenarios::{
    complete_triangles, discount_losses, period_losses, CellMoments, RowMoments, ScenarioConfig, ScenarioSet,
    SimulationStats, DEFAULT_OVERSAMPLE,
};
