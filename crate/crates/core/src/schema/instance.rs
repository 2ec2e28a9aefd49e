use alloc::string::String;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The gap marker standing in for the ambiguous pronoun.
pub const GAP: char = '_';

/// One pronoun-resolution example in the unified interchange format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaInstance {
    pub id: String,
    /// Sentence with exactly one `_` where the pronoun was.
    pub text: String,
    pub candidate1: String,
    pub candidate2: String,
    /// Gold candidate, `1` or `2`; absent for unlabeled data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<u8>,
}

impl SchemaInstance {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        candidate1: impl Into<String>,
        candidate2: impl Into<String>,
        answer: Option<u8>,
    ) -> Result<Self> {
        let inst = SchemaInstance {
            id: id.into(),
            text: text.into(),
            candidate1: candidate1.into(),
            candidate2: candidate2.into(),
            answer,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn invalid(&self, reason: &str) -> Error {
        Error::InvalidInstance {
            id: self.id.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gaps = self.text.chars().filter(|&c| c == GAP).count();
        if gaps != 1 {
            return Err(self.invalid(&alloc::format!("expected one gap marker, found {gaps}")));
        }
        let (c1, c2) = (self.candidate1.trim(), self.candidate2.trim());
        if c1.is_empty() || c2.is_empty() {
            return Err(self.invalid("empty candidate"));
        }
        if c1 == c2 {
            return Err(self.invalid("candidates are identical"));
        }
        if let Some(a) = self.answer {
            if a != 1 && a != 2 {
                return Err(self.invalid(&alloc::format!("answer {a} is not 1 or 2")));
            }
        }
        Ok(())
    }

    /// Candidate `index` in `{0, 1}`.
    pub fn candidate(&self, index: usize) -> &str {
        if index == 0 {
            &self.candidate1
        } else {
            &self.candidate2
        }
    }

    pub fn candidate_mut(&mut self, index: usize) -> &mut String {
        if index == 0 {
            &mut self.candidate1
        } else {
            &mut self.candidate2
        }
    }

    /// Zero-based gold index.
    pub fn label(&self) -> Result<usize> {
        match self.answer {
            Some(a @ (1 | 2)) => Ok(a as usize - 1),
            Some(_) => Err(self.invalid("answer is not 1 or 2")),
            None => Err(Error::Unlabeled {
                id: self.id.clone(),
            }),
        }
    }

    /// Byte offset of the gap marker.
    pub fn gap_offset(&self) -> usize {
        self.text.find(GAP).expect("validated instance has a gap")
    }

    /// Text with the gap replaced by `fill`.
    pub fn filled(&self, fill: &str) -> String {
        let g = self.gap_offset();
        let mut s = String::with_capacity(self.text.len() + fill.len());
        s.push_str(&self.text[..g]);
        s.push_str(fill);
        s.push_str(&self.text[g + GAP.len_utf8()..]);
        s
    }

    /// The same instance with the candidates (and answer) swapped.
    pub fn swapped(&self) -> Self {
        SchemaInstance {
            id: self.id.clone(),
            text: self.text.clone(),
            candidate1: self.candidate2.clone(),
            candidate2: self.candidate1.clone(),
            answer: self.answer.map(|a| 3 - a),
        }
    }
}

/// Count of labeled instances per gold answer, `[answer 1, answer 2]`.
pub fn answer_balance(data: &[SchemaInstance]) -> [usize; 2] {
    let mut out = [0; 2];
    for inst in data {
        if let Ok(l) = inst.label() {
            out[l] += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ok = SchemaInstance::new("a", "The _ is small.", "garage", "backyard", Some(1));
        assert!(ok.is_ok());
        assert!(SchemaInstance::new("b", "no gap", "x", "y", None).is_err());
        assert!(SchemaInstance::new("c", "_ and _", "x", "y", None).is_err());
        assert!(SchemaInstance::new("d", "_ is", "x", "x", None).is_err());
        assert!(SchemaInstance::new("e", "_ is", "x", "y", Some(3)).is_err());
    }

    #[test]
    fn labels_fill_and_swap() {
        let inst =
            SchemaInstance::new("a", "The _ is small.", "garage", "backyard", Some(2)).unwrap();
        assert_eq!(inst.label(), Ok(1));
        assert_eq!(inst.filled("garage"), "The garage is small.");
        let s = inst.swapped();
        assert_eq!((s.candidate1.as_str(), s.answer), ("backyard", Some(1)));
        let unlabeled = SchemaInstance {
            answer: None,
            ..inst
        };
        assert!(matches!(unlabeled.label(), Err(Error::Unlabeled { .. })));
    }
}
