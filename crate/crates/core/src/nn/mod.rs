//! Minimal dense-network engine: tape-based reverse mode, MLPs, Adam,
//! finite-difference gradient checks and a binary checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
pub mod params;
pub mod tape;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use gradcheck::{grad_check, GradCheckReport};
pub use mlp::{init_params, mlp_forward, Activation, Mlp, MlpPass, MlpSpec};
pub use params::{Gradients, ParamId, ParamStore, Tensor};
pub use tape::{Adjoints, NodeId, Tape};
