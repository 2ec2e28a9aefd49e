use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, Mode, Vocab};
use crate::error::{Error, Result};
use crate::init::ModelRng;
use crate::numerics::{AdamWConfig, AdamWState, Graph, LrSchedule, ParamStore};
use crate::objectives::{predict, prepare_example, Example, Model, Objective};
use crate::schema::SchemaInstance;

/// Dev accuracy a run must exceed to count as converged.
pub const CONVERGENCE_THRESHOLD: f64 = 0.60;

pub fn is_converged(dev_accuracy: f64) -> bool {
    dev_accuracy > CONVERGENCE_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub objective: Objective,
    pub learning_rate: f64,
    pub num_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub encoder: EncoderConfig,
    /// Start the encoder from pretrained weights rather than from scratch.
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub adamw: AdamWConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_path: Option<String>,
}

/// Best hyperparameters per objective: `(learning rate, epochs, batch size)`.
pub fn preset_hyperparameters(objective: Objective) -> (f64, usize, usize) {
    match objective {
        Objective::WgSr => (1e-5, 5, 16),
        Objective::Bwp | Objective::Css => (1e-5, 8, 16),
        Objective::Mas => (1e-5, 8, 8),
    }
}

impl RunConfig {
    pub fn new(objective: Objective, encoder: EncoderConfig) -> Self {
        let (learning_rate, num_epochs, batch_size) = preset_hyperparameters(objective);
        RunConfig {
            objective,
            learning_rate,
            num_epochs,
            batch_size,
            seed: 0,
            encoder,
            warm_start: false,
            adamw: AdamWConfig::default(),
            train_path: None,
            dev_path: None,
            checkpoint_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.num_epochs == 0 {
            return Err(Error::InvalidConfig("num_epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        self.encoder.validate()
    }

    /// `<objective>_<lr>_<epochs>_<batch>_<seed>`.
    pub fn run_id(&self) -> String {
        alloc::format!(
            "{}_{:e}_{}_{}_{}",
            self.objective,
            self.learning_rate,
            self.num_epochs,
            self.batch_size,
            self.seed
        )
    }

    /// Same hyperparameters (ignoring the seed).
    pub fn same_point(&self, other: &RunConfig) -> bool {
        self.objective == other.objective
            && self.learning_rate.to_bits() == other.learning_rate.to_bits()
            && self.num_epochs == other.num_epochs
            && self.batch_size == other.batch_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    /// Dev accuracy after each completed epoch.
    pub epoch_dev_accuracy: Vec<f64>,
    /// Mean training loss of each completed epoch.
    pub epoch_train_loss: Vec<f64>,
    /// Accuracy of the last completed epoch (of the untrained model if
    /// there were no training steps).
    pub final_dev_accuracy: f64,
    pub converged: bool,
    /// A non-finite loss stopped training early.
    pub diverged: bool,
    pub excluded_train: usize,
    pub excluded_dev: usize,
    /// Filled in by drivers that can read a clock.
    #[serde(default)]
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub ties: usize,
    /// Instances dropped because the objective could not consume them.
    pub excluded: usize,
}

/// Prepared examples and the number of instances that had to be skipped.
#[derive(Debug, Clone)]
pub struct PreparedSet {
    pub examples: Vec<Example>,
    pub excluded: usize,
}

/// Prepare every instance; localization failures are counted and skipped,
/// anything else is an error.
pub fn prepare_set(
    objective: Objective,
    data: &[SchemaInstance],
    vocab: &Vocab,
) -> Result<PreparedSet> {
    let mut examples = Vec::with_capacity(data.len());
    let mut excluded = 0;
    for inst in data {
        match prepare_example(objective, inst, vocab) {
            Ok(ex) => examples.push(ex),
            Err(Error::CandidateNotFound { candidate }) => {
                log::warn!(
                    "instance {}: candidate {candidate:?} not located, excluded",
                    inst.id
                );
                excluded += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PreparedSet { examples, excluded })
}

/// Accuracy of eval-mode predictions over labeled examples.
pub fn evaluate(model: &Model, store: &ParamStore, set: &PreparedSet) -> Result<Evaluation> {
    let (mut correct, mut ties) = (0, 0);
    for ex in &set.examples {
        let label = ex
            .label()
            .ok_or_else(|| Error::Unlabeled { id: ex.id().into() })?;
        let pred = predict(model.predict_pair(store, ex)?);
        correct += usize::from(pred.index == label);
        ties += usize::from(pred.tie);
    }
    let total = set.examples.len();
    if total == 0 {
        return Err(Error::NothingToEvaluate);
    }
    Ok(Evaluation {
        accuracy: correct as f64 / total as f64,
        correct,
        total,
        ties,
        excluded: set.excluded,
    })
}

/// What a training observer sees for each optimizer step.
#[derive(Debug, Clone, Copy)]
pub struct BatchEvent<'a> {
    pub epoch: usize,
    /// 1-based optimizer step.
    pub step: usize,
    pub ids: &'a [&'a str],
    pub loss: f64,
    pub lr: f64,
}

/// Inputs of a single run apart from its configuration.
#[derive(Debug, Clone, Copy)]
pub struct RunData<'a> {
    pub train: &'a [SchemaInstance],
    pub dev: &'a [SchemaInstance],
    pub vocab: &'a Vocab,
    /// Pretrained encoder weights, used when the config asks for a warm start.
    pub pretrained: Option<&'a ParamStore>,
}

/// A finished run with the trained parameters.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub result: RunResult,
    pub model: Model,
    pub store: ParamStore,
}

pub fn train_run(config: &RunConfig, data: RunData<'_>) -> Result<RunResult> {
    train_run_observed(config, data, |_| {}).map(|t| t.result)
}

/// [`train_run`], reporting every optimizer step to `observer` and
/// returning the trained parameters.
pub fn train_run_observed<F>(
    config: &RunConfig,
    data: RunData<'_>,
    mut observer: F,
) -> Result<TrainedRun>
where
    F: FnMut(&BatchEvent<'_>),
{
    config.validate()?;
    if config.encoder.vocab_size != data.vocab.len() {
        return Err(Error::InvalidConfig(alloc::format!(
            "encoder vocabulary size {} differs from the vocabulary ({})",
            config.encoder.vocab_size,
            data.vocab.len()
        )));
    }
    let mut rng = ModelRng::seed_from_u64(config.seed);
    let mut store = ParamStore::new();
    let model = Model::new(config.objective, config.encoder, &mut store, &mut rng)?;
    if config.warm_start {
        let pretrained = data.pretrained.ok_or_else(|| {
            Error::InvalidConfig("warm start requested without pretrained weights".into())
        })?;
        let copied = store.load_matching(pretrained)?;
        log::debug!("warm start copied {copied} tensors");
    }
    let train = prepare_set(config.objective, data.train, data.vocab)?;
    let dev = prepare_set(config.objective, data.dev, data.vocab)?;

    let n = train.examples.len();
    let steps_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = config.num_epochs * steps_per_epoch;
    let mut result = RunResult {
        config: config.clone(),
        epoch_dev_accuracy: Vec::new(),
        epoch_train_loss: Vec::new(),
        final_dev_accuracy: 0.0,
        converged: false,
        diverged: false,
        excluded_train: train.excluded,
        excluded_dev: dev.excluded,
        wall_time_secs: 0.0,
    };
    if total_steps == 0 {
        result.final_dev_accuracy = evaluate(&model, &store, &dev)?.accuracy;
        result.converged = is_converged(result.final_dev_accuracy);
        return Ok(TrainedRun {
            result,
            model,
            store,
        });
    }

    let schedule = LrSchedule::new(config.learning_rate, total_steps)?;
    let mut opt = AdamWState::new(&store, config.adamw);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0;
    'epochs: for epoch in 0..config.num_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            step += 1;
            let (loss, grads) = {
                let mut g = Graph::new(&store);
                let mut mode = Mode::Train(&mut rng);
                let mut losses = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    losses.push(model.loss(&mut g, &train.examples[i], &mut mode)?);
                }
                let all = g.concat(&losses, 0)?;
                let total = g.sum(all);
                let mean = g.scale(total, 1.0 / chunk.len() as f64);
                let value = g.scalar(mean);
                if !value.is_finite() {
                    (value, None)
                } else {
                    (value, Some(g.backward(mean)?.param_grads(&g)))
                }
            };
            let lr = schedule.lr_at(step)?;
            let ids: Vec<&str> = chunk.iter().map(|&i| train.examples[i].id()).collect();
            observer(&BatchEvent {
                epoch,
                step,
                ids: &ids,
                loss,
                lr,
            });
            let Some(grads) = grads else {
                log::warn!(
                    "run {}: non-finite loss at step {step}, stopping",
                    config.run_id()
                );
                result.diverged = true;
                break 'epochs;
            };
            store.zero_grad();
            store.accumulate(&grads);
            opt.step(&mut store, lr)?;
            if !store.iter().all(|(_, p)| p.value.all_finite()) {
                log::warn!(
                    "run {}: non-finite parameters at step {step}, stopping",
                    config.run_id()
                );
                result.diverged = true;
                break 'epochs;
            }
            loss_sum += loss * chunk.len() as f64;
        }
        result.epoch_train_loss.push(loss_sum / n as f64);
        let acc = evaluate(&model, &store, &dev)?.accuracy;
        log::info!(
            "run {}: epoch {} dev accuracy {acc:.4}",
            config.run_id(),
            epoch + 1
        );
        result.epoch_dev_accuracy.push(acc);
    }
    result.final_dev_accuracy = result.epoch_dev_accuracy.last().copied().unwrap_or(0.0);
    result.converged = !result.diverged && is_converged(result.final_dev_accuracy);
    Ok(TrainedRun {
        result,
        model,
        store,
    })
}
