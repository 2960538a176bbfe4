//! Sine-activated MLP with exact time derivatives, reverse-mode parameter
//! gradients, hard/soft initial-condition wrapping, and Adam.

pub mod adam;
pub mod checkpoint;
pub mod constraint;
pub mod dual;
pub mod network;

pub use adam::{adam_step, AdamState};
pub use checkpoint::Checkpoint;
pub use constraint::{envelope, wrap_batch, wrap_hard_constraint, wrap_point, ConstraintMode, WrappedBatch, WrappedPoint};
pub use dual::Dual;
pub use network::{
    backward_batch, forward, forward_batch, forward_with_time_derivative, init_params, loss_gradient,
    BatchOutputs, ForwardTape, NetworkParams, ParamGrads,
};
