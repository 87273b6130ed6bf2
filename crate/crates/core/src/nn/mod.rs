//! Numerical substrate: a small reverse-mode autodiff tape, dense layers,
//! initialization, Adam, and checkpoints.

mod adam;
mod checkpoint;
mod dense;
mod init;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::Checkpoint;
pub use dense::{Dense, DenseVars};
pub use init::glorot_uniform;
pub use tape::{softmax_rows, Gradients, Tape, Var, LOG_FLOOR};
