use serde::{Deserialize, Serialize};

/// Activation applied to the encoder's second graph convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgcnConfig {
    /// Width of the first graph convolution.
    pub hidden: usize,
    /// Embedding width `M`; also the width of the prior samples.
    pub embedding: usize,
    pub decoder_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub decoder_dropout: f64,
    pub discriminator_dropout: f64,
    pub noise_std: f64,
    pub encoder_activation: Activation,
    /// Encoder + decoder on the task loss.
    pub gcn_lr: f64,
    pub discriminator_lr: f64,
    /// Encoder on the adversarial loss.
    pub generator_lr: f64,
    pub epochs: usize,
    /// When false only the task phase runs.
    pub adversarial: bool,
}

impl ArgcnConfig {
    /// Road-network histogram regression settings.
    pub fn road() -> Self {
        ArgcnConfig {
            hidden: 32,
            embedding: 16,
            decoder_hidden: vec![256, 256],
            discriminator_hidden: vec![64, 32],
            decoder_dropout: 0.3,
            discriminator_dropout: 0.3,
            noise_std: 0.1,
            encoder_activation: Activation::Linear,
            gcn_lr: 1e-3,
            discriminator_lr: 1e-4,
            generator_lr: 1e-4,
            epochs: 2000,
            adversarial: true,
        }
    }

    /// Citation-network classification settings.
    pub fn cora() -> Self {
        ArgcnConfig {
            hidden: 32,
            embedding: 32,
            decoder_hidden: vec![16, 16],
            discriminator_hidden: vec![64, 32],
            decoder_dropout: 0.2,
            discriminator_dropout: 0.5,
            noise_std: 0.1,
            encoder_activation: Activation::Linear,
            gcn_lr: 1e-4,
            discriminator_lr: 1e-5,
            generator_lr: 1e-5,
            epochs: 2000,
            adversarial: true,
        }
    }

    pub fn without_adversarial(mut self) -> Self {
        self.adversarial = false;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }
}
