//! Innovations, pseudo-uniforms and the hierarchical copula.

pub mod ar;
mod copula;
mod fit;
pub(crate) mod gof;
mod innovations;
mod kendall;
mod tree;

pub use ar::ARCorrelation;
pub use copula::{bvt_lower, CopulaFamily, MAX_NU};
pub use fit::{fit_bivariate, CopulaSpec, LR_CRITICAL, MIN_PAIRS};
pub use gof::{cvm_statistic, gof_cvm, DEFAULT_BOOTSTRAP};
pub use innovations::{compute_innovations, pseudo_uniforms, InnovationPanel};
pub use kendall::kendall_tau;
pub use tree::{build_tree, CopulaTree, TreeOptions};
