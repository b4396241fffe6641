pub mod dependence;
pub mod error;
pub mod marginal;
pub mod optim;
pub mod quadrature;
pub mod risk;
pub mod simulate;
pub mod synth;
pub mod triangles;
pub mod tweedie;

pub use error::{Error, Result};
