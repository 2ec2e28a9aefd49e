use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not conform for the named operation.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// A single operand has a shape the operation cannot accept.
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
    },
    NotScalar {
        shape: Vec<usize>,
    },
    InvalidLabel(usize),
    InvalidProbability {
        p1: f64,
        p2: f64,
    },
    StepOutOfRange {
        step: usize,
        total: usize,
    },
    InvalidConfig(String),
    NonFinite(&'static str),
    EmptyCorpus,
    SequenceTooLong {
        len: usize,
        max: usize,
    },
    MultipleMasks(usize),
    MissingMask,
    InvalidInstance {
        id: String,
        reason: String,
    },
    CandidateNotFound {
        candidate: String,
    },
    Unrepairable {
        id: String,
    },
    Unlabeled {
        id: String,
    },
    NothingToEvaluate,
    InsufficientSamples {
        needed: usize,
        got: usize,
    },
    AllRunsDiverged,
    EmptyInput(&'static str),
    UnknownParam(String),
    UnknownObjective(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch between {lhs:?} and {rhs:?}")
            }
            Error::InvalidShape { op, shape } => write!(f, "{op}: invalid shape {shape:?}"),
            Error::NotScalar { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            Error::InvalidLabel(l) => write!(f, "label {l} is outside {{0, 1}}"),
            Error::InvalidProbability { p1, p2 } => {
                write!(f, "({p1}, {p2}) is not a probability pair")
            }
            Error::StepOutOfRange { step, total } => {
                write!(f, "step {step} outside schedule range 0..={total}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonFinite(ctx) => write!(f, "non-finite value in {ctx}"),
            Error::EmptyCorpus => f.write_str("corpus is empty"),
            Error::SequenceTooLong { len, max } => {
                write!(f, "sequence of {len} tokens exceeds maximum length {max}")
            }
            Error::MultipleMasks(n) => write!(f, "input has {n} mask tokens, at most one allowed"),
            Error::MissingMask => f.write_str("input has no mask token"),
            Error::InvalidInstance { id, reason } => write!(f, "instance {id}: {reason}"),
            Error::CandidateNotFound { candidate } => {
                write!(f, "candidate {candidate:?} not found in text")
            }
            Error::Unrepairable { id } => write!(f, "instance {id}: candidate cannot be repaired"),
            Error::Unlabeled { id } => write!(f, "instance {id} has no gold answer"),
            Error::NothingToEvaluate => f.write_str("no evaluable instances"),
            Error::InsufficientSamples { needed, got } => {
                write!(f, "need at least {needed} samples, got {got}")
            }
            Error::AllRunsDiverged => f.write_str("every run diverged"),
            Error::EmptyInput(what) => write!(f, "{what} is empty"),
            Error::UnknownParam(name) => write!(f, "unknown parameter {name}"),
            Error::UnknownObjective(name) => write!(
                f,
                "unknown objective {name:?} (valid: wg-sr, bwp, css, mas)"
            ),
        }
    }
}

impl core::error::Error for Error {}
