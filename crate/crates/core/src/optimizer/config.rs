use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Mode;

/// Weights and resolution of the per-image objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    /// Weight of the attention term.
    pub attention_weight: f64,
    /// Weight of the mean absolute pixel change.
    pub fidelity_weight: f64,
    /// Weight of the squared, range-normalised distance from identity.
    pub regularization_weight: f64,
    pub mode: Mode,
    /// Longest side the optimizer works at.
    pub working_resolution: usize,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            attention_weight: 2.5e4,
            fidelity_weight: 10.0,
            regularization_weight: 0.1,
            mode: Mode::Increase,
            working_resolution: 224,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("attention_weight", self.attention_weight),
            ("fidelity_weight", self.fidelity_weight),
            ("regularization_weight", self.regularization_weight),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.working_resolution < 64 {
            return Err(Error::InvalidConfig(format!(
                "working resolution must be at least 64, got {}",
                self.working_resolution
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub iterations: usize,
    /// Largest per-iteration move of any parameter, in half-width units.
    pub step_size: f64,
    pub momentum: f64,
    /// Finite-difference step as a fraction of each parameter's half-width.
    pub fd_step: f64,
    pub seed: u64,
    /// Independent starts; the best result wins. The first start is identity.
    pub restarts: usize,
    /// Spread of restart perturbations as a fraction of each half-width.
    pub restart_sigma: f64,
    /// Evaluate finite differences on the rayon pool.
    pub parallel: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            iterations: 100,
            step_size: 0.02,
            momentum: 0.9,
            fd_step: 0.01,
            seed: 0,
            restarts: 1,
            restart_sigma: 0.1,
            parallel: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "finite-difference step must be positive, got {}",
                self.fd_step
            )));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if !(self.restart_sigma.is_finite() && self.restart_sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "restart sigma must be nonnegative, got {}",
                self.restart_sigma
            )));
        }
        Ok(())
    }
}
