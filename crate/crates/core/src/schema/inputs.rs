use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::candidates::{localize_candidate, CandidateSpan};
use super::instance::{SchemaInstance, GAP};
use crate::encoder::{normalized_words, Vocab, BOS_ID, EOS_ID, MASK, MASK_ID, UNK_ID};
use crate::error::{Error, Result};

/// Encoder input for the mask-based objectives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedInput {
    pub id: String,
    /// `<s> text-with-<mask> </s>`.
    pub ids: Vec<u32>,
    pub mask_position: usize,
    /// Word ids of each candidate, tokenized on its own.
    pub candidate_ids: [Vec<u32>; 2],
    /// Where each candidate occurs in `ids`, when it could be located.
    pub spans: [Option<CandidateSpan>; 2],
    pub label: Option<usize>,
}

impl MaskedInput {
    /// Both spans, or the first localization failure.
    pub fn require_spans(&self, instance_candidates: [&str; 2]) -> Result<[CandidateSpan; 2]> {
        match self.spans {
            [Some(a), Some(b)] => Ok([a, b]),
            [None, _] => Err(Error::CandidateNotFound {
                candidate: instance_candidates[0].into(),
            }),
            _ => Err(Error::CandidateNotFound {
                candidate: instance_candidates[1].into(),
            }),
        }
    }

    /// Whether any candidate word is outside the vocabulary.
    pub fn has_unknown_candidate_token(&self) -> bool {
        self.candidate_ids.iter().flatten().any(|&i| i == UNK_ID)
    }
}

/// Replace the gap with `<mask>`, tokenize both candidates, and locate them
/// in the masked sentence.
pub fn build_masked_input(instance: &SchemaInstance, vocab: &Vocab) -> Result<MaskedInput> {
    instance.validate()?;
    let text = instance.filled(MASK);
    let words = normalized_words(&text);
    let mut ids = Vec::with_capacity(words.len() + 2);
    ids.push(BOS_ID);
    ids.extend(
        words
            .iter()
            .map(|w| if w == MASK { MASK_ID } else { vocab.word_id(w) }),
    );
    ids.push(EOS_ID);
    let mask_position = ids
        .iter()
        .position(|&i| i == MASK_ID)
        .ok_or(Error::MissingMask)?;
    let candidate_ids = [0, 1].map(|i| vocab.encode_words(instance.candidate(i)));
    if candidate_ids.iter().any(|c| c.is_empty()) {
        return Err(Error::InvalidInstance {
            id: instance.id.clone(),
            reason: "candidate has no tokens".into(),
        });
    }
    let spans = [0, 1].map(|i| {
        localize_candidate(&words, instance.candidate(i))
            .ok()
            .map(|s| s.shifted(1))
    });
    let input = MaskedInput {
        id: instance.id.clone(),
        ids,
        mask_position,
        candidate_ids,
        spans,
        label: instance.label().ok(),
    };
    if input.has_unknown_candidate_token() {
        log::warn!(
            "instance {}: candidate word outside the vocabulary, scored as <unk>",
            instance.id
        );
    }
    Ok(input)
}

/// The two candidate-substituted sequences for sequence ranking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrInputPair {
    pub id: String,
    /// `<s> prefix </s> </s> candidate-and-suffix </s>` for each candidate.
    pub sequences: [Vec<u32>; 2],
    /// Index of the correct sequence, when labeled.
    pub correct_index: Option<usize>,
}

/// Split the text just before the gap and substitute each candidate into
/// the second segment.
pub fn build_sr_inputs(instance: &SchemaInstance, vocab: &Vocab) -> Result<SrInputPair> {
    instance.validate()?;
    let gap = instance.gap_offset();
    let prefix = vocab.encode_words(&instance.text[..gap]);
    let suffix = &instance.text[gap + GAP.len_utf8()..];
    let sequences = [0, 1].map(|i| {
        let mut second = String::from(instance.candidate(i));
        second.push_str(suffix);
        let mut seq = Vec::with_capacity(prefix.len() + 8);
        seq.push(BOS_ID);
        seq.extend_from_slice(&prefix);
        seq.extend([EOS_ID, EOS_ID]);
        seq.extend(vocab.encode_words(&second));
        seq.push(EOS_ID);
        seq
    });
    Ok(SrInputPair {
        id: instance.id.clone(),
        sequences,
        correct_index: instance.label().ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::build_vocab;

    const COUNCIL: &str =
        "The city councilmen refused the demonstrators a permit because _ feared violence.";

    fn council() -> (SchemaInstance, Vocab) {
        let inst = SchemaInstance::new(
            "c",
            COUNCIL,
            "the city councilmen",
            "the demonstrators",
            Some(1),
        )
        .unwrap();
        let vocab = build_vocab(&[COUNCIL], 1).unwrap();
        (inst, vocab)
    }

    fn words_of(vocab: &Vocab, ids: &[u32]) -> Vec<String> {
        vocab.decode(ids).into_iter().map(String::from).collect()
    }

    #[test]
    fn masked_input_for_councilmen() {
        let (inst, vocab) = council();
        let m = build_masked_input(&inst, &vocab).unwrap();
        let toks = words_of(&vocab, &m.ids);
        let because = toks.iter().position(|t| t == "because").unwrap();
        assert_eq!(m.mask_position, because + 1);
        assert_eq!(m.ids.iter().filter(|&&i| i == MASK_ID).count(), 1);
        assert_eq!(m.candidate_ids[0].len(), 3);
        assert_eq!(m.candidate_ids[1].len(), 2);
        let [s1, s2] = m.require_spans(["", ""]).unwrap();
        assert_eq!(&toks[s1.start..=s1.end], ["the", "city", "councilmen"]);
        assert_eq!(&toks[s2.start..=s2.end], ["the", "demonstrators"]);
    }

    #[test]
    fn single_token_candidates() {
        let text = "The trophy does not fit in the suitcase because _ is too big.";
        let inst = SchemaInstance::new("t", text, "trophy", "suitcase", Some(1)).unwrap();
        let vocab = build_vocab(&[text], 1).unwrap();
        let m = build_masked_input(&inst, &vocab).unwrap();
        assert_eq!(m.candidate_ids.map(|c| c.len()), [1, 1]);
    }

    #[test]
    fn sr_inputs_for_councilmen() {
        let (inst, vocab) = council();
        let pair = build_sr_inputs(&inst, &vocab).unwrap();
        let a = words_of(&vocab, &pair.sequences[0]);
        let b = words_of(&vocab, &pair.sequences[1]);
        let prefix = "<s> the city councilmen refused the demonstrators a permit because </s> </s>";
        assert_eq!(
            a.join(" "),
            alloc::format!("{prefix} the city councilmen feared violence . </s>")
        );
        assert_eq!(
            b.join(" "),
            alloc::format!("{prefix} the demonstrators feared violence . </s>")
        );
        assert_eq!(pair.correct_index, Some(0));
    }

    #[test]
    fn sr_inputs_differ_only_after_separator() {
        let (inst, vocab) = council();
        let pair = build_sr_inputs(&inst, &vocab).unwrap();
        let sep = |s: &[u32]| s.windows(2).position(|w| w == [EOS_ID, EOS_ID]).unwrap() + 2;
        let (a, b) = (&pair.sequences[0], &pair.sequences[1]);
        assert_eq!(sep(a), sep(b));
        assert_eq!(a[..sep(a)], b[..sep(b)]);
    }

    #[test]
    fn gap_first_has_empty_prefix() {
        let text = "_ is small.";
        let inst = SchemaInstance::new("g", text, "garage", "backyard", Some(1)).unwrap();
        let vocab = build_vocab(&["garage backyard is small ."], 1).unwrap();
        let pair = build_sr_inputs(&inst, &vocab).unwrap();
        for seq in &pair.sequences {
            assert_eq!(&seq[..3], [BOS_ID, EOS_ID, EOS_ID]);
            assert_eq!(*seq.last().unwrap(), EOS_ID);
            assert_eq!(seq.len(), 3 + 4 + 1);
        }
    }
}
