//! Minimal dense f64 neural stack with manual backpropagation.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod mat;
pub mod net;

pub use adam::Adam;
pub use gradcheck::grad_check;
pub use layers::Params;
pub use loss::{masked_loss, masked_loss_logits_grad, LossKind};
pub use mat::Mat;
pub use net::{Backbone, BackboneKind, ForwardCache, HeadKind, NetConfig, Network, INPUT_FEATURES};
