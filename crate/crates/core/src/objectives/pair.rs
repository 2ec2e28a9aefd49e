use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum-to-one tolerance for a [`ProbPair`].
pub const PAIR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "wg-sr")]
    WgSr,
    #[serde(rename = "bwp")]
    Bwp,
    #[serde(rename = "css")]
    Css,
    #[serde(rename = "mas")]
    Mas,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::WgSr,
        Objective::Bwp,
        Objective::Css,
        Objective::Mas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::WgSr => "wg-sr",
            Objective::Bwp => "bwp",
            Objective::Css => "css",
            Objective::Mas => "mas",
        }
    }

    /// Whether the head needs both candidates located in the text.
    pub fn needs_spans(self) -> bool {
        matches!(self, Objective::Css | Objective::Mas)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownObjective(s.into()))
    }
}

/// Probabilities of candidate (or sentence) 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbPair {
    pub p1: f64,
    pub p2: f64,
}

impl ProbPair {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let ok = p1.is_finite() && p2.is_finite() && p1 >= 0.0 && p2 >= 0.0;
        if !ok || (p1 + p2 - 1.0).abs() > PAIR_TOLERANCE {
            return Err(Error::InvalidProbability { p1, p2 });
        }
        Ok(ProbPair { p1, p2 })
    }

    /// Binary softmax of two scores.
    pub fn from_logits(a: f64, b: f64) -> Self {
        let m = a.max(b);
        let (ea, eb) = (libm::exp(a - m), libm::exp(b - m));
        ProbPair {
            p1: ea / (ea + eb),
            p2: eb / (ea + eb),
        }
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        match p {
            [a, b] => Self::new(*a, *b),
            _ => Err(Error::InvalidShape {
                op: "prob_pair",
                shape: alloc::vec![p.len()],
            }),
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        if index == 0 {
            self.p1
        } else {
            self.p2
        }
    }

    pub fn swapped(self) -> Self {
        ProbPair {
            p1: self.p2,
            p2: self.p1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub index: usize,
    pub tie: bool,
}

/// Argmax of the pair; an exact tie goes to index 0.
pub fn predict(probs: ProbPair) -> Prediction {
    let tie = probs.p1 == probs.p2;
    if tie {
        log::trace!("tied prediction {probs:?}, choosing candidate 1");
    }
    Prediction {
        index: usize::from(probs.p2 > probs.p1),
        tie,
    }
}

/// Max-masking: `M1[j] = 1` iff `A1[j] >= A2[j]`, and symmetrically, so
/// both masks are 1 at ties.
pub fn max_mask(a1: &[f64], a2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a1.len() != a2.len() {
        return Err(Error::ShapeMismatch {
            op: "max_mask",
            lhs: alloc::vec![a1.len()],
            rhs: alloc::vec![a2.len()],
        });
    }
    let m1 = a1
        .iter()
        .zip(a2)
        .map(|(x, y)| f64::from(u8::from(x >= y)))
        .collect();
    let m2 = a1
        .iter()
        .zip(a2)
        .map(|(x, y)| f64::from(u8::from(y >= x)))
        .collect();
    Ok((m1, m2))
}

/// `vᵀ tanh(W x + U y)` on plain values; `w` and `u` are row-major `d×d`.
pub fn css_similarity(x: &[f64], y: &[f64], v: &[f64], w: &[f64], u: &[f64]) -> Result<f64> {
    let d = v.len();
    if x.len() != d || y.len() != d || w.len() != d * d || u.len() != d * d {
        return Err(Error::ShapeMismatch {
            op: "css_similarity",
            lhs: alloc::vec![x.len(), y.len()],
            rhs: alloc::vec![d, w.len(), u.len()],
        });
    }
    let mut s = 0.0;
    for i in 0..d {
        let mut z = 0.0;
        for j in 0..d {
            z += w[i * d + j] * x[j] + u[i * d + j] * y[j];
        }
        s += v[i] * libm::tanh(z);
    }
    Ok(s)
}
