//! Dense feedforward network with exact reverse-mode gradients.
//!
//! The network is split into a representation `Φ` (layers up to and including
//! `repr_layer`) and a classifier head `h` (the remaining layers). Losses can
//! inject gradients at either output; `backward` merges them.

mod gradcheck;
mod network;
mod optim;

pub use gradcheck::grad_check;
pub use network::{Activation, DenseNet, Forward, Gradients, Layer, LayerGrad, Upstream};
pub use optim::{OptimizerState, Sgd};
