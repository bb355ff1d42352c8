#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cgm;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod legendre;
mod linalg;
pub mod pipeline;
pub mod pred_ega;
pub mod synth;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
