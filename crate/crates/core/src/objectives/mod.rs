//! The four objective heads and the shared pair-probability loss.

mod heads;
mod model;
mod pair;
#[cfg(test)]
mod tests;

pub use heads::{CssHead, Dense, Head, MasHead, WgsrHead, HEAD_PREFIX};
pub use model::{bwp_from_log_probs, objective_loss, prepare_example, Example, Model};
pub use pair::{
    css_similarity, max_mask, predict, Objective, Prediction, ProbPair, PAIR_TOLERANCE,
};
