//! Schema instances, candidate localization and repair, and the encoder
//! inputs each objective consumes.

mod candidates;
mod inputs;
mod instance;

pub use candidates::{
    detect_candidate_mismatch, localize_candidate, repair_candidate, CandidateSpan, MismatchReport,
    Overrides, RepairAction,
};
pub use inputs::{build_masked_input, build_sr_inputs, MaskedInput, SrInputPair};
pub use instance::{answer_balance, SchemaInstance, GAP};
