use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const PAD: &str = "<pad>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const MASK: &str = "<mask>";

/// Reserved tokens, in id order.
pub const RESERVED: [&str; 5] = [BOS, PAD, EOS, UNK, MASK];

pub const BOS_ID: u32 = 0;
pub const PAD_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const MASK_ID: u32 = 4;

/// A surface word located in its source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Word<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
    pub is_mask: bool,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Split `text` into words and punctuation marks.
///
/// A word is a run of alphanumerics, optionally joined by single inner `-`
/// or `'`; every other non-space character is its own token. The literal
/// `<mask>` marker is kept whole.
pub fn split_words(text: &str) -> Vec<Word<'_>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if text[start..].starts_with(MASK) {
            out.push(Word {
                text: &text[start..start + MASK.len()],
                start,
                end: start + MASK.len(),
                is_mask: true,
            });
            while i < chars.len() && chars[i].0 < start + MASK.len() {
                i += 1;
            }
            continue;
        }
        if is_word_char(c) {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if is_word_char(cj) {
                    j += 1;
                } else if (cj == '-' || cj == '\'')
                    && j + 1 < chars.len()
                    && is_word_char(chars[j + 1].1)
                {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            out.push(Word {
                text: &text[start..end],
                start,
                end,
                is_mask: false,
            });
            i = j;
        } else {
            let end = chars.get(i + 1).map_or(text.len(), |&(p, _)| p);
            out.push(Word {
                text: &text[start..end],
                start,
                end,
                is_mask: false,
            });
            i += 1;
        }
    }
    out
}

/// Lowercased token strings of `text`, without special tokens.
pub fn normalized_words(text: &str) -> Vec<String> {
    split_words(text)
        .into_iter()
        .map(|w| {
            if w.is_mask {
                w.text.to_string()
            } else {
                w.text.to_lowercase()
            }
        })
        .collect()
}

/// Word-level vocabulary with dense ids; reserved tokens occupy `0..5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Vocabulary from a token list in id order; must start with the reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let ok_prefix =
            tokens.len() >= RESERVED.len() && tokens.iter().zip(RESERVED).all(|(a, b)| a == b);
        let v = Vocab::from(tokens);
        if !ok_prefix || v.index.len() != v.tokens.len() {
            return Err(Error::InvalidConfig(
                "vocabulary must start with the reserved tokens and contain no duplicates".into(),
            ));
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id of a (case-insensitive) word, `<unk>` when absent.
    pub fn word_id(&self, word: &str) -> u32 {
        if let Some(id) = self.id(word) {
            return id;
        }
        self.id(&word.to_lowercase()).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_special(&self, id: u32) -> bool {
        (id as usize) < RESERVED.len()
    }

    /// Word ids of `text` with no `<s>`/`</s>` added.
    pub fn encode_words(&self, text: &str) -> Vec<u32> {
        split_words(text)
            .into_iter()
            .map(|w| {
                if w.is_mask {
                    MASK_ID
                } else {
                    self.word_id(w.text)
                }
            })
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i).unwrap_or(UNK)).collect()
    }
}

/// Build a vocabulary from `corpus`; words seen fewer than `min_count` times
/// are left out (and so tokenize to `<unk>`).
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], min_count: usize) -> Result<Vocab> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for text in corpus {
        for w in split_words(text.as_ref()) {
            if !w.is_mask {
                *counts.entry(w.text.to_lowercase()).or_default() += 1;
            }
        }
    }
    let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    tokens.extend(
        counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count.max(1) && !RESERVED.contains(&w.as_str()))
            .map(|(w, _)| w),
    );
    Ok(Vocab::from(tokens))
}

/// `<s> words... </s>`; the `<mask>` marker maps to its reserved id.
pub fn tokenize(text: &str, vocab: &Vocab) -> Vec<u32> {
    let mut ids = alloc::vec![BOS_ID];
    ids.extend(vocab.encode_words(text));
    ids.push(EOS_ID);
    ids
}
