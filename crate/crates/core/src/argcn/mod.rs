//! Adversarially regularized graph convolutional network.
//!
//! A two-layer GCN encoder maps node features to embeddings `Z`; an MLP
//! decoder turns each embedding into a speed histogram (regression) or class
//! probabilities (classification); an MLP discriminator tries to tell `Z`
//! apart from standard normal samples, and the encoder is trained to fool it.
//! Each optimization step runs three phases on three parameter groups:
//!
//! 1. task loss → encoder + decoder,
//! 2. discriminator loss (embeddings held fixed) → discriminator,
//! 3. adversarial loss (discriminator held fixed) → encoder.

mod config;
mod model;

pub use config::{Activation, ArgcnConfig};
pub use model::{train, write_loss_trace, ArgcnModel, GraphInput, Group, StepLosses, Targets};
