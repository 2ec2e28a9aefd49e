//! Locating candidate strings in the text, and repairing candidates that do
//! not occur there verbatim.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::instance::{SchemaInstance, GAP};
use crate::encoder::split_words;
use crate::error::{Error, Result};

/// Inclusive token range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSpan {
    pub start: usize,
    pub end: usize,
}

impl CandidateSpan {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn positions(&self) -> core::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn shifted(self, by: usize) -> Self {
        CandidateSpan {
            start: self.start + by,
            end: self.end + by,
        }
    }
}

fn lower_words(text: &str) -> Vec<String> {
    split_words(text)
        .iter()
        .map(|w| w.text.to_lowercase())
        .collect()
}

fn match_positions(words: &[String], cand: &[String]) -> Vec<usize> {
    if cand.is_empty() || cand.len() > words.len() {
        return Vec::new();
    }
    let last = cand.len() - 1;
    (0..=words.len() - cand.len())
        .filter(|&i| {
            words[i..i + cand.len()]
                .iter()
                .zip(cand)
                .enumerate()
                .all(|(k, (w, c))| {
                    w.eq_ignore_ascii_case(c) || (k == last && is_possessive_of(w, c))
                })
        })
        .collect()
}

/// `Dennis's` for `Dennis`.
fn is_possessive_of(word: &str, base: &str) -> bool {
    word.len() == base.len() + 2
        && word.is_char_boundary(base.len())
        && word[..base.len()].eq_ignore_ascii_case(base)
        && word[base.len()..].eq_ignore_ascii_case("'s")
}

/// First exact, case-insensitive match of `candidate`'s words in `words`.
pub fn localize_candidate<S: AsRef<str>>(words: &[S], candidate: &str) -> Result<CandidateSpan> {
    let words: Vec<String> = words.iter().map(|w| w.as_ref().to_lowercase()).collect();
    let cand = lower_words(candidate);
    if cand.is_empty() {
        return Err(Error::EmptyInput("candidate"));
    }
    match match_positions(&words, &cand).first() {
        Some(&start) => Ok(CandidateSpan {
            start,
            end: start + cand.len() - 1,
        }),
        None => Err(Error::CandidateNotFound {
            candidate: candidate.to_string(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub id: String,
    pub c1_found: bool,
    pub c2_found: bool,
    /// Number of exact occurrences of each candidate in the text.
    pub occurrences: [usize; 2],
}

impl MismatchReport {
    pub fn is_clean(&self) -> bool {
        self.c1_found && self.c2_found
    }

    pub fn found(&self, index: usize) -> bool {
        if index == 0 {
            self.c1_found
        } else {
            self.c2_found
        }
    }
}

/// Check that both candidates occur verbatim in the gapped text.
pub fn detect_candidate_mismatch(instance: &SchemaInstance) -> MismatchReport {
    let words = lower_words(&instance.text);
    let occ = |i: usize| match_positions(&words, &lower_words(instance.candidate(i))).len();
    let occurrences = [occ(0), occ(1)];
    if occurrences.iter().any(|&n| n > 1) {
        log::debug!(
            "instance {}: candidate occurrences {:?}, using first",
            instance.id,
            occurrences
        );
    }
    MismatchReport {
        id: instance.id.clone(),
        c1_found: occurrences[0] > 0,
        c2_found: occurrences[1] > 0,
        occurrences,
    }
}

/// Manually curated replacements, keyed by instance id and candidate index (0 or 1).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    entries: BTreeMap<String, BTreeMap<usize, String>>,
}

impl Overrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        id: impl Into<String>,
        candidate_index: usize,
        replacement: impl Into<String>,
    ) {
        self.entries
            .entry(id.into())
            .or_default()
            .insert(candidate_index, replacement.into());
    }

    pub fn get(&self, id: &str) -> Option<&BTreeMap<usize, String>> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// How a candidate was changed by [`repair_candidate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepairAction {
    Unchanged,
    Override,
    Heuristic,
}

impl RepairAction {
    pub fn as_str(self) -> &'static str {
        match self {
            RepairAction::Unchanged => "unchanged",
            RepairAction::Override => "override",
            RepairAction::Heuristic => "heuristic",
        }
    }
}

/// Replace candidates that do not occur in the text.
///
/// An override entry for the instance id takes precedence. Otherwise each
/// missing candidate is replaced by the text window, ending at an occurrence
/// of the candidate's final word, that shares the most words with the
/// candidate; ties go to the window whose length is closest to the
/// candidate's, then to the earliest.
pub fn repair_candidate(
    instance: &SchemaInstance,
    overrides: Option<&Overrides>,
) -> Result<(SchemaInstance, RepairAction)> {
    let report = detect_candidate_mismatch(instance);
    if report.is_clean() {
        return Ok((instance.clone(), RepairAction::Unchanged));
    }
    let mut out = instance.clone();
    let action =
        match overrides.and_then(|o| o.get(&instance.id)) {
            Some(entries) => {
                for (&idx, replacement) in entries {
                    if idx > 1 {
                        return Err(Error::InvalidInstance {
                            id: instance.id.clone(),
                            reason: alloc::format!("override candidate index {idx}"),
                        });
                    }
                    *out.candidate_mut(idx) = replacement.clone();
                }
                RepairAction::Override
            }
            None => {
                for idx in 0..2 {
                    if !report.found(idx) {
                        let window = best_window(&instance.text, instance.candidate(idx))
                            .ok_or_else(|| Error::Unrepairable {
                                id: instance.id.clone(),
                            })?;
                        *out.candidate_mut(idx) = window;
                    }
                }
                RepairAction::Heuristic
            }
        };
    if !detect_candidate_mismatch(&out).is_clean() || out.validate().is_err() {
        log::warn!("instance {}: repair failed, excluding", instance.id);
        return Err(Error::Unrepairable {
            id: instance.id.clone(),
        });
    }
    Ok((out, action))
}

fn best_window(text: &str, candidate: &str) -> Option<String> {
    let words = split_words(text);
    let lower: Vec<String> = words.iter().map(|w| w.text.to_lowercase()).collect();
    let cand = lower_words(candidate);
    let last = cand.last()?;
    let k = cand.len();
    let mut best: Option<(usize, usize, usize, usize)> = None; // (overlap, len diff, start, end)
    for (end, w) in lower.iter().enumerate() {
        if w != last {
            continue;
        }
        // windows never extend across the gap marker
        let lowest = lower[..end]
            .iter()
            .rposition(|w| w.starts_with(GAP))
            .map_or(0, |g| g + 1);
        for start in (lowest..=end).rev() {
            let window = &lower[start..=end];
            let overlap = multiset_overlap(window, &cand);
            let diff = window.len().abs_diff(k);
            let better = match best {
                None => true,
                Some((o, d, _, _)) => overlap > o || (overlap == o && diff < d),
            };
            if better {
                best = Some((overlap, diff, start, end));
            }
            if window.len() >= 2 * k + 2 {
                break;
            }
        }
    }
    let (_, _, start, end) = best?;
    Some(text[words[start].start..words[end].end].to_string())
}

fn multiset_overlap(window: &[String], cand: &[String]) -> usize {
    let mut pool: Vec<&String> = cand.iter().collect();
    let mut n = 0;
    for w in window {
        if let Some(p) = pool.iter().position(|c| *c == w) {
            pool.swap_remove(p);
            n += 1;
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::normalized_words;

    fn madonna() -> SchemaInstance {
        SchemaInstance::new(
            "wsc-madonna",
            "Madonna fired her trainer because _ slept with her boyfriend.",
            "Madonna",
            "The trainer",
            Some(2),
        )
        .unwrap()
    }

    #[test]
    fn localization_examples() {
        let words =
            normalized_words("Madonna fired her trainer because she slept with her boyfriend.");
        assert_eq!(
            localize_candidate(&words, "her trainer"),
            Ok(CandidateSpan { start: 2, end: 3 })
        );
        assert!(matches!(
            localize_candidate(&words, "The trainer"),
            Err(Error::CandidateNotFound { .. })
        ));
        assert_eq!(
            localize_candidate(&words, "MADONNA"),
            Ok(CandidateSpan { start: 0, end: 0 })
        );
        let words = normalized_words("Ian ate Dennis's menudo.");
        assert_eq!(
            localize_candidate(&words, "Dennis"),
            Ok(CandidateSpan { start: 2, end: 2 })
        );
        assert!(localize_candidate(&words, "Dennis menudo").is_err());
    }

    #[test]
    fn detects_madonna_mismatch() {
        let r = detect_candidate_mismatch(&madonna());
        assert!(r.c1_found && !r.c2_found);
    }

    #[test]
    fn multiplicity_is_reported() {
        let inst = SchemaInstance::new(
            "dup",
            "The cat saw the dog and the cat ran because _ was scared.",
            "the cat",
            "the dog",
            Some(1),
        )
        .unwrap();
        let r = detect_candidate_mismatch(&inst);
        // hand count: "the cat" at words 0 and 6, "the dog" at word 3
        assert_eq!(r.occurrences, [2, 1]);
        let words = normalized_words(&inst.text);
        assert_eq!(localize_candidate(&words, "the cat").unwrap().start, 0);
    }

    #[test]
    fn heuristic_repairs_madonna() {
        let (fixed, action) = repair_candidate(&madonna(), None).unwrap();
        assert_eq!(fixed.candidate2, "her trainer");
        assert_eq!(fixed.candidate1, "Madonna");
        assert_eq!(action, RepairAction::Heuristic);
        assert!(detect_candidate_mismatch(&fixed).is_clean());
    }

    #[test]
    fn longer_window_wins_on_overlap() {
        let inst = SchemaInstance::new(
            "c",
            "The city councilmen refused the demonstrators a permit because _ feared violence.",
            "the councilmen",
            "the demonstrators",
            Some(1),
        )
        .unwrap();
        let (fixed, _) = repair_candidate(&inst, None).unwrap();
        assert_eq!(fixed.candidate1, "The city councilmen");
    }

    #[test]
    fn clean_instances_are_unchanged() {
        let inst = SchemaInstance::new(
            "w",
            "The garage is bigger than the backyard so _ is small.",
            "garage",
            "backyard",
            Some(2),
        )
        .unwrap();
        let (same, action) = repair_candidate(&inst, None).unwrap();
        assert_eq!((same, action), (inst, RepairAction::Unchanged));
    }

    #[test]
    fn override_wins() {
        let mut o = Overrides::new();
        o.insert("wsc-madonna", 1, "her boyfriend");
        let (fixed, action) = repair_candidate(&madonna(), Some(&o)).unwrap();
        assert_eq!(fixed.candidate2, "her boyfriend");
        assert_eq!(action, RepairAction::Override);
    }

    #[test]
    fn unrepairable_when_head_word_missing() {
        let inst = SchemaInstance::new(
            "u",
            "Madonna fired her because _ slept.",
            "Madonna",
            "The trainer",
            Some(2),
        )
        .unwrap();
        assert_eq!(
            repair_candidate(&inst, None),
            Err(Error::Unrepairable { id: "u".into() })
        );
    }
}
