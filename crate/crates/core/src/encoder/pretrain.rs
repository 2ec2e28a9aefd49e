//! Masked-token pretraining used to warm-start the encoder.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::model::{Encoder, Mode};
use super::vocab::{MASK_ID, RESERVED};
use crate::error::{Error, Result};
use crate::init::ModelRng;
use crate::numerics::{AdamWConfig, AdamWState, Graph, LrSchedule, ParamStore, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlmConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of word tokens selected for prediction.
    pub mask_prob: f64,
    pub seed: u64,
    pub adamw: AdamWConfig,
}

impl Default for MlmConfig {
    fn default() -> Self {
        MlmConfig {
            steps: 2000,
            batch_size: 16,
            learning_rate: 1e-3,
            mask_prob: 0.15,
            seed: 0,
            adamw: AdamWConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MlmReport {
    /// Mean masked-token loss of every step, in order.
    pub losses: Vec<f64>,
}

impl MlmReport {
    /// Mean loss over the first and last `window` steps.
    pub fn head_tail_means(&self, window: usize) -> Option<(f64, f64)> {
        let n = self.losses.len();
        if n < window || window == 0 {
            return None;
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        Some((
            mean(&self.losses[..window]),
            mean(&self.losses[n - window..]),
        ))
    }
}

struct MaskedSeq {
    input: Vec<u32>,
    positions: Vec<usize>,
    targets: Vec<u32>,
}

/// Select word positions with probability `mask_prob` (at least one), then
/// replace 80% with `<mask>`, 10% with a random word and keep 10%.
fn mask_sequence(
    ids: &[u32],
    vocab_size: usize,
    mask_prob: f64,
    rng: &mut ModelRng,
) -> Option<MaskedSeq> {
    let first_word = RESERVED.len() as u32;
    let words: Vec<usize> = (0..ids.len()).filter(|&i| ids[i] >= first_word).collect();
    if words.is_empty() {
        return None;
    }
    let mut positions: Vec<usize> = words
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < mask_prob)
        .collect();
    if positions.is_empty() {
        positions.push(words[rng.random_range(0..words.len())]);
    }
    let mut input = ids.to_vec();
    let targets = positions.iter().map(|&p| ids[p]).collect();
    for &p in &positions {
        let r = rng.random::<f64>();
        if r < 0.8 {
            input[p] = MASK_ID;
        } else if r < 0.9 && vocab_size as u32 > first_word {
            input[p] = rng.random_range(first_word..vocab_size as u32);
        }
    }
    Some(MaskedSeq {
        input,
        positions,
        targets,
    })
}

fn masked_nll(
    encoder: &Encoder,
    g: &mut Graph<'_>,
    seq: &MaskedSeq,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    let vars = encoder.forward(g, &seq.input, mode)?;
    let lp = encoder.lm_log_probs(g, vars.embeddings(), &seq.positions)?;
    let v = encoder.config().vocab_size;
    let picks: Vec<usize> = seq
        .targets
        .iter()
        .enumerate()
        .map(|(row, &t)| row * v + t as usize)
        .collect();
    let picked = g.pick(lp, &picks)?;
    let total = g.sum(picked);
    Ok(g.scale(total, -1.0))
}

/// Train the encoder's masked-token predictor for `config.steps` minibatches.
/// `steps = 0` leaves `store` untouched.
pub fn pretrain_mlm(
    encoder: &Encoder,
    store: &mut ParamStore,
    corpus: &[Vec<u32>],
    config: &MlmConfig,
) -> Result<MlmReport> {
    let mut report = MlmReport::default();
    if config.steps == 0 {
        return Ok(report);
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let mut rng = ModelRng::seed_from_u64(config.seed);
    let schedule = LrSchedule::new(config.learning_rate, config.steps)?;
    let mut opt = AdamWState::new(store, config.adamw);
    let vocab_size = encoder.config().vocab_size;
    for step in 0..config.steps {
        let batch: Vec<MaskedSeq> = (0..config.batch_size)
            .filter_map(|_| {
                let ids = &corpus[rng.random_range(0..corpus.len())];
                mask_sequence(ids, vocab_size, config.mask_prob, &mut rng)
            })
            .collect();
        let n_targets: usize = batch.iter().map(|s| s.targets.len()).sum();
        if n_targets == 0 {
            return Err(Error::EmptyInput("masked-token batch"));
        }
        let grads = {
            let mut g = Graph::new(store);
            let mut total = Vec::with_capacity(batch.len());
            let mut mode = Mode::Train(&mut rng);
            for seq in &batch {
                total.push(masked_nll(encoder, &mut g, seq, &mut mode)?);
            }
            let sum = g.concat(&total, 0)?;
            let sum = g.sum(sum);
            let loss = g.scale(sum, 1.0 / n_targets as f64);
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Err(Error::NonFinite("masked-token loss"));
            }
            report.losses.push(value);
            let grads = g.backward(loss)?;
            grads.param_grads(&g)
        };
        store.zero_grad();
        store.accumulate(&grads);
        opt.step(store, schedule.lr_at(step + 1)?)?;
    }
    Ok(report)
}

/// Fraction of masked positions whose arg-max prediction is the original token.
pub fn mlm_accuracy(
    encoder: &Encoder,
    store: &ParamStore,
    corpus: &[Vec<u32>],
    mask_prob: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ModelRng::seed_from_u64(seed);
    let (mut hits, mut total) = (0usize, 0usize);
    let v = encoder.config().vocab_size;
    for ids in corpus {
        let Some(mut seq) = mask_sequence(ids, v, mask_prob, &mut rng) else {
            continue;
        };
        for &p in &seq.positions {
            seq.input[p] = MASK_ID;
        }
        let mut g = Graph::new(store);
        let vars = encoder.forward(&mut g, &seq.input, &mut Mode::Eval)?;
        let lp = encoder.lm_log_probs(&mut g, vars.embeddings(), &seq.positions)?;
        for (row, &target) in g.value(lp).data().chunks(v).zip(&seq.targets) {
            let best = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc },
                );
            hits += usize::from(best.0 == target as usize);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::NothingToEvaluate);
    }
    Ok(hits as f64 / total as f64)
}
