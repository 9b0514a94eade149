//! Small feed-forward network engine with exact reverse-mode gradients.

mod gradcheck;
mod network;
mod optim;

pub use gradcheck::{grad_check, grad_check_report, GradCheckReport, GradFault};
pub use network::{Activation, ForwardTape, Gradients, Layer, LayerGradients, Network};
pub use optim::OptimizerState;
