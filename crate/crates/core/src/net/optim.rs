use serde::{Deserialize, Serialize};

use super::{DenseNet, Gradients};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_weight_decay() -> f64 {
    5e-4
}

impl Default for OptimizerState {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: default_weight_decay(),
            momentum: default_momentum(),
        }
    }
}

impl OptimizerState {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be ≥ 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be ≥ 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Plain SGD with L2 weight decay and heavy-ball momentum:
/// `v ← μ·v + (g + wd·w)`, `w ← w − lr·v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    state: OptimizerState,
    velocity: Option<Vec<f64>>,
}

impl Sgd {
    pub fn new(state: OptimizerState) -> Result<Self> {
        state.validate()?;
        Ok(Self {
            state,
            velocity: None,
        })
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// Applies one update in place. A non-finite gradient leaves the network
    /// untouched and returns an error.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers().len() {
            return Err(Error::Mismatch("gradient/network layer count".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients".into()));
        }
        let OptimizerState {
            learning_rate: lr,
            weight_decay: wd,
            momentum: mu,
        } = self.state;
        let flat_grad = grads.flatten();
        let mut params = net.parameters();
        if flat_grad.len() != params.len() {
            return Err(Error::Mismatch("gradient/network parameter count".into()));
        }
        let velocity = self.velocity.get_or_insert_with(|| vec![0.0; params.len()]);
        for ((w, g), v) in params.iter_mut().zip(&flat_grad).zip(velocity.iter_mut()) {
            let step = g + wd * *w;
            *v = mu * *v + step;
            *w -= lr * *v;
        }
        net.set_parameters(&params)?;
        net.check_finite()
    }
}
