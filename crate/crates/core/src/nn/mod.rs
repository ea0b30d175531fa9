//! Small reverse-mode differentiation substrate: parameters, a tape of
//! vector ops, finite-difference checking, checkpoints and optimizers.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;

pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT_VERSION};
pub use gradcheck::{grad_check, rel_error, GradCheck};
pub use optim::{Group, OptimConfig, Optimizer, OptimizerKind, OptimizerState};
pub use params::{Gradients, ParamId, ParamSet, ParamTensor};
pub use tape::{masked_softmax, Tape, Var};
