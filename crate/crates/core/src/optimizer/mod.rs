//! Per-image search over foreground/background edit parameters.

mod config;
mod objective;
mod search;

pub use config::{ObjectiveConfig, OptimizerConfig};
pub use objective::{objective, regularization, ObjectiveBreakdown, Problem};
pub use search::{
    descend, finite_diff_gradient, multi_style, optimize, prepare_inputs, OptimizationResult,
};
