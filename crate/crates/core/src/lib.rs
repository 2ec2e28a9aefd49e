//! Pronoun-resolution objective heads on a miniature masked-LM encoder.
//!
//! Everything here is allocation-only (`no_std` + `alloc`): numerics, the
//! encoder, schema handling, the four objective heads, the training loop and
//! the statistics. File formats and the command-line driver live in the
//! `corefbench` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod encoder;
pub mod error;
pub mod init;
pub mod numerics;
pub mod objectives;
pub mod schema;
pub mod stats;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
