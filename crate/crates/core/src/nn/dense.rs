use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::glorot_uniform;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Fully connected layer `x·W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Array2<f64>,
    /// 1×out row.
    pub bias: Array2<f64>,
}

/// Tape handles for one layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct DenseVars {
    pub weight: Var,
    pub bias: Var,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        Dense {
            weight: glorot_uniform(fan_in, fan_out, rng),
            bias: Array2::zeros((1, fan_out)),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array2::zeros((1, fan_out)),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }

    /// Places the parameters on `tape`, trainable or frozen.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> DenseVars {
        let (w, b) = (self.weight.clone(), self.bias.clone());
        if trainable {
            DenseVars {
                weight: tape.param(w),
                bias: tape.param(b),
            }
        } else {
            DenseVars {
                weight: tape.constant(w),
                bias: tape.constant(b),
            }
        }
    }
}

impl DenseVars {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let y = tape.matmul(x, self.weight)?;
        tape.add_bias(y, self.bias)
    }
}
