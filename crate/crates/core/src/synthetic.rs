//! Templated schemas with deterministic lexical cues.
//!
//! Every noun belongs to one class and every cue phrase names one class. An
//! instance mentions two nouns from different classes and ends with a cue,
//! so the noun whose class matches the cue is always the answer.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use crate::init::ModelRng;
use crate::schema::SchemaInstance;

struct Class {
    nouns: &'static [&'static str],
    cues: &'static [&'static str],
}

const CLASSES: [Class; 4] = [
    Class {
        nouns: &[
            "dog", "cat", "horse", "rabbit", "goat", "sheep", "mouse", "duck",
        ],
        cues: &["was hungry", "fell asleep", "ran away", "wagged its tail"],
    },
    Class {
        nouns: &[
            "car", "truck", "bus", "van", "tractor", "scooter", "train", "boat",
        ],
        cues: &["needed fuel", "was parked", "was towed", "had a flat tire"],
    },
    Class {
        nouns: &[
            "bread", "cake", "apple", "soup", "pizza", "cheese", "rice", "pie",
        ],
        cues: &["was delicious", "was eaten", "tasted sweet", "was baked"],
    },
    Class {
        nouns: &[
            "hammer", "saw", "drill", "wrench", "shovel", "rake", "knife", "axe",
        ],
        cues: &[
            "was sharpened",
            "was oiled",
            "was swung",
            "needed a new handle",
        ],
    },
];

const TEMPLATES: [&str; 4] = [
    "the {a} was next to the {b} , and the _ {cue} .",
    "we saw the {a} and the {b} ; the _ {cue} .",
    "the {a} stood behind the {b} because the _ {cue} .",
    "after the {a} passed the {b} , the _ {cue} .",
];

fn fill(template: &str, a: &str, b: &str, cue: &str) -> String {
    template
        .replace("{a}", a)
        .replace("{b}", b)
        .replace("{cue}", cue)
}

struct Draw {
    template: &'static str,
    nouns: [&'static str; 2],
    cue: &'static str,
    answer: usize,
}

fn draw(rng: &mut ModelRng) -> Draw {
    let ca = rng.random_range(0..CLASSES.len());
    let mut cb = rng.random_range(0..CLASSES.len() - 1);
    if cb >= ca {
        cb += 1;
    }
    let a = *CLASSES[ca].nouns.choose(rng).expect("non-empty class");
    let b = *CLASSES[cb].nouns.choose(rng).expect("non-empty class");
    let answer = rng.random_range(0..2);
    let cue_class = if answer == 0 { ca } else { cb };
    Draw {
        template: TEMPLATES.choose(rng).expect("non-empty templates"),
        nouns: [a, b],
        cue: CLASSES[cue_class].cues.choose(rng).expect("non-empty cues"),
        answer,
    }
}

/// `n` labeled instances with ids `synth-<seed>-<i>`; answers are drawn
/// uniformly from {1, 2}.
pub fn generate_schemas(n: usize, seed: u64) -> Vec<SchemaInstance> {
    let mut rng = ModelRng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let d = draw(&mut rng);
            let text = fill(d.template, d.nouns[0], d.nouns[1], d.cue);
            SchemaInstance::new(
                format!("synth-{seed}-{i}"),
                text,
                d.nouns[0],
                d.nouns[1],
                Some(d.answer as u8 + 1),
            )
            .expect("generated instance is valid")
        })
        .collect()
}

/// Unlabeled pretraining sentences: filled schemas (the gap replaced by the
/// answer) interleaved with short noun-and-cue sentences.
pub fn pretraining_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ModelRng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let d = draw(&mut rng);
            if i % 4 == 3 {
                format!("the {} {} .", d.nouns[d.answer], d.cue)
            } else {
                fill(d.template, d.nouns[0], d.nouns[1], d.cue).replace('_', d.nouns[d.answer])
            }
        })
        .collect()
}

/// Every word the generator can emit, for building a closed vocabulary.
pub fn lexicon() -> Vec<String> {
    let mut out: Vec<String> = TEMPLATES
        .iter()
        .map(|t| fill(t, "", "", "").replace('_', ""))
        .collect();
    for c in &CLASSES {
        out.extend(c.nouns.iter().map(|s| String::from(*s)));
        out.extend(c.cues.iter().map(|s| String::from(*s)));
    }
    out
}

/// First `n_train` instances for training, the rest for dev.
pub fn split(
    data: Vec<SchemaInstance>,
    n_train: usize,
) -> (Vec<SchemaInstance>, Vec<SchemaInstance>) {
    let mut train = data;
    let dev = train.split_off(n_train.min(train.len()));
    (train, dev)
}
