//! Self-describing JSON checkpoints: encoder config, vocabulary, optional
//! head objective and every parameter tensor with its shape.
//!
//! Floats are written with shortest round-trip formatting and parsed with
//! full precision, so a save/load cycle is bit-exact.

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use corefbench_core::encoder::{Encoder, EncoderConfig, Vocab};
use corefbench_core::init::{seeded, ModelRng};
use corefbench_core::numerics::{ParamStore, Tensor};
use corefbench_core::objectives::{Model, Objective};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "corefbench-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub decay: bool,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub encoder: EncoderConfig,
    pub vocab: Vocab,
    /// Head stored alongside the encoder; `None` for encoder-only files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    pub params: Vec<StoredParam>,
}

impl Checkpoint {
    pub fn new(
        encoder: EncoderConfig,
        vocab: &Vocab,
        objective: Option<Objective>,
        store: &ParamStore,
    ) -> Self {
        let params = store
            .iter()
            .map(|(_, p)| StoredParam {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                decay: p.decay,
                data: p.value.data().to_vec(),
            })
            .collect();
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            encoder,
            vocab: vocab.clone(),
            objective,
            params,
        }
    }

    /// The stored tensors as a store, shapes validated.
    pub fn store(&self) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for p in &self.params {
            let t = Tensor::new(p.shape.clone(), p.data.clone())
                .with_context(|| format!("parameter {} has inconsistent shape", p.name))?;
            store.add(p.name.clone(), t, p.decay);
        }
        Ok(store)
    }

    fn check(&self) -> Result<()> {
        ensure!(
            self.format == FORMAT,
            "not a checkpoint (format {:?})",
            self.format
        );
        ensure!(
            self.version == VERSION,
            "unsupported checkpoint version {}",
            self.version
        );
        ensure!(
            self.encoder.vocab_size == self.vocab.len(),
            "encoder vocabulary size {} differs from stored vocabulary ({})",
            self.encoder.vocab_size,
            self.vocab.len()
        );
        Ok(())
    }

    /// Rebuild a parameter store laid out exactly as a fresh model for
    /// `objective` would be, filled from this checkpoint.
    fn layout(
        &self,
        build: impl FnOnce(&mut ParamStore, &mut ModelRng) -> Result<()>,
    ) -> Result<ParamStore> {
        let stored = self.store()?;
        let mut store = ParamStore::new();
        build(&mut store, &mut seeded(0))?;
        let copied = store.load_matching(&stored)?;
        if copied != store.len() {
            let missing: Vec<&str> = store
                .iter()
                .filter(|(_, p)| stored.find(&p.name).is_none())
                .map(|(_, p)| p.name.as_str())
                .take(5)
                .collect();
            bail!(
                "checkpoint lacks {} parameters, e.g. {missing:?}",
                store.len() - copied
            );
        }
        Ok(store)
    }

    /// Model with its head; requires a head checkpoint.
    pub fn model(&self) -> Result<(Model, ParamStore)> {
        let Some(objective) = self.objective else {
            bail!("checkpoint holds no objective head");
        };
        let mut model = None;
        let store = self.layout(|store, rng| {
            model = Some(Model::new(objective, self.encoder, store, rng)?);
            Ok(())
        })?;
        Ok((model.expect("built above"), store))
    }

    /// Encoder parameters only (head tensors, if any, are dropped).
    pub fn encoder_store(&self) -> Result<(Encoder, ParamStore)> {
        let mut enc = None;
        let store = self.layout(|store, rng| {
            enc = Some(Encoder::new(self.encoder, store, rng)?);
            Ok(())
        })?;
        Ok((enc.expect("built above"), store))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f =
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)
            .with_context(|| format!("opening checkpoint {}", path.display()))?;
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(f))
            .with_context(|| format!("parsing checkpoint {}", path.display()))?;
        ck.check()?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use corefbench_core::encoder::build_vocab;

    #[test]
    fn round_trip_is_bit_exact() {
        let vocab = build_vocab(&["the dog saw the cat"], 1).unwrap();
        let cfg = EncoderConfig::toy(vocab.len());
        let mut store = ParamStore::new();
        let mut rng = seeded(4);
        Model::new(Objective::Mas, cfg, &mut store, &mut rng).unwrap();
        // awkward values
        store.params_mut()[0].value.data_mut()[0] = 0.1 + 0.2;
        store.params_mut()[0].value.data_mut()[1] = f64::MIN_POSITIVE;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        Checkpoint::new(cfg, &vocab, Some(Objective::Mas), &store)
            .save(&path)
            .unwrap();
        let back = Checkpoint::load(&path).unwrap();
        let (_, restored) = back.model().unwrap();
        assert_eq!(restored.len(), store.len());
        for ((_, a), (_, b)) in store.iter().zip(restored.iter()) {
            assert_eq!(a.name, b.name);
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
        assert_eq!(back.vocab, vocab);
    }

    #[test]
    fn encoder_only_checkpoint_has_no_model() {
        let vocab = build_vocab(&["a b"], 1).unwrap();
        let cfg = EncoderConfig::toy(vocab.len());
        let mut store = ParamStore::new();
        Encoder::new(cfg, &mut store, &mut seeded(0)).unwrap();
        let ck = Checkpoint::new(cfg, &vocab, None, &store);
        assert!(ck.model().is_err());
        assert_eq!(ck.encoder_store().unwrap().1, store);
    }
}
