//! Dense tensors, reverse-mode differentiation, AdamW, the warm-up/decay
//! learning-rate schedule, and finite-difference gradient checking.

mod gradcheck;
mod graph;
#[cfg(test)]
mod op_grads;
mod optim;
mod params;
mod schedule;
mod tensor;

pub use gradcheck::{
    finite_diff_check, finite_diff_check_coords, graph_grad_check, Coordinates, GradCheckReport,
};
pub use graph::{bce_pair_value, Gradients, Graph, Var, PROB_CLAMP};
pub use optim::{AdamWConfig, AdamWState};
pub use params::{Param, ParamGrads, ParamId, ParamStore};
pub use schedule::{LrSchedule, WARMUP_FRACTION};
pub use tensor::{log_softmax, logsumexp, softmax, Tensor};
