use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::MASK_ID;
use crate::error::{Error, Result};
use crate::init::{self, ModelRng};
use crate::numerics::{Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub hidden: usize,
    pub ffn: usize,
    pub vocab_size: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub init_std: f64,
    pub layer_norm_eps: f64,
}

impl EncoderConfig {
    /// The default toy size for a given vocabulary.
    pub fn toy(vocab_size: usize) -> Self {
        EncoderConfig {
            num_layers: 2,
            num_heads: 2,
            hidden: 64,
            ffn: 128,
            vocab_size,
            max_len: 64,
            dropout: 0.1,
            init_std: 0.02,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.num_layers,
            self.num_heads,
            self.hidden,
            self.ffn,
            self.vocab_size,
            self.max_len,
        ];
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig(
                "encoder sizes must be positive".into(),
            ));
        }
        if !self.hidden.is_multiple_of(self.num_heads) {
            return Err(Error::InvalidConfig(format!(
                "hidden size {} not divisible by {} heads",
                self.hidden, self.num_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Whether dropout is active; training mode carries the RNG it draws from.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut ModelRng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    pub fn reborrow(&mut self) -> Mode<'_> {
        match self {
            Mode::Eval => Mode::Eval,
            Mode::Train(r) => Mode::Train(r),
        }
    }
}

#[derive(Debug, Clone)]
struct LayerParams {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

/// Post-LN transformer encoder with learned positions and a tied LM head.
#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncoderConfig,
    tok_emb: ParamId,
    pos_emb: ParamId,
    emb_ln_g: ParamId,
    emb_ln_b: ParamId,
    layers: Vec<LayerParams>,
    lm_dense: ParamId,
    lm_dense_b: ParamId,
    lm_ln_g: ParamId,
    lm_ln_b: ParamId,
    lm_bias: ParamId,
}

/// Graph handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct EncoderVars {
    /// Output of every layer, `T×d` each; the last entry is the final embedding.
    pub layer_outputs: Vec<Var>,
    /// `attentions[l][h]` is the post-softmax `T×T` matrix of head `h` in layer `l`.
    pub attentions: Vec<Vec<Var>>,
    /// Positions the final layer was computed at, when restricted; the last
    /// layer output and attentions then have one row per entry.
    pub final_rows: Option<Vec<usize>>,
}

impl EncoderVars {
    pub fn embeddings(&self) -> Var {
        *self.layer_outputs.last().expect("at least one layer")
    }

    /// Row of layer `layer`'s output (and attention) holding position `pos`.
    pub fn row(&self, layer: usize, pos: usize) -> Option<usize> {
        match &self.final_rows {
            Some(rows) if layer + 1 == self.layer_outputs.len() => {
                rows.iter().position(|&r| r == pos)
            }
            _ => Some(pos),
        }
    }

    /// Rows of the final embeddings holding `positions`.
    pub fn final_rows_of(&self, positions: &[usize]) -> Result<Vec<usize>> {
        let last = self.layer_outputs.len() - 1;
        positions
            .iter()
            .map(|&p| {
                self.row(last, p).ok_or(Error::InvalidShape {
                    op: "final_rows_of",
                    shape: vec![p],
                })
            })
            .collect()
    }
}

/// Plain-value result of [`Encoder::encode`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub embeddings: Tensor,
    /// Shape `[L, H, T, T]`.
    pub attentions: Tensor,
    pub mask_position: Option<usize>,
    pub vocab_log_probs: Option<Vec<f64>>,
}

pub const ENCODER_PREFIX: &str = "encoder.";

impl Encoder {
    /// Register freshly initialised encoder parameters in `store`.
    pub fn new(config: EncoderConfig, store: &mut ParamStore, rng: &mut ModelRng) -> Result<Self> {
        config.validate()?;
        let d = config.hidden;
        let std = config.init_std;
        let mut w = |store: &mut ParamStore, name: &str, shape: &[usize]| {
            store.add(
                format!("{ENCODER_PREFIX}{name}"),
                init::normal(rng, shape, std),
                true,
            )
        };
        let tok_emb = w(store, "tok_emb", &[config.vocab_size, d]);
        let pos_emb = w(store, "pos_emb", &[config.max_len, d]);
        let zeros = |store: &mut ParamStore, name: &str, n: usize| {
            store.add(
                format!("{ENCODER_PREFIX}{name}"),
                Tensor::zeros(&[n]),
                false,
            )
        };
        let ones = |store: &mut ParamStore, name: &str, n: usize| {
            store.add(
                format!("{ENCODER_PREFIX}{name}"),
                Tensor::full(&[n], 1.0),
                false,
            )
        };
        let emb_ln_g = ones(store, "emb_ln.gamma", d);
        let emb_ln_b = zeros(store, "emb_ln.beta", d);
        let mut layers = Vec::with_capacity(config.num_layers);
        for l in 0..config.num_layers {
            let p = |s: &str| format!("layers.{l}.{s}");
            layers.push(LayerParams {
                wq: w(store, &p("attn.wq"), &[d, d]),
                bq: zeros(store, &p("attn.bq"), d),
                wk: w(store, &p("attn.wk"), &[d, d]),
                bk: zeros(store, &p("attn.bk"), d),
                wv: w(store, &p("attn.wv"), &[d, d]),
                bv: zeros(store, &p("attn.bv"), d),
                wo: w(store, &p("attn.wo"), &[d, d]),
                bo: zeros(store, &p("attn.bo"), d),
                ln1_g: ones(store, &p("ln1.gamma"), d),
                ln1_b: zeros(store, &p("ln1.beta"), d),
                w1: w(store, &p("ffn.w1"), &[d, config.ffn]),
                b1: zeros(store, &p("ffn.b1"), config.ffn),
                w2: w(store, &p("ffn.w2"), &[config.ffn, d]),
                b2: zeros(store, &p("ffn.b2"), d),
                ln2_g: ones(store, &p("ln2.gamma"), d),
                ln2_b: zeros(store, &p("ln2.beta"), d),
            });
        }
        let lm_dense = w(store, "lm.dense", &[d, d]);
        let lm_dense_b = zeros(store, "lm.dense_b", d);
        let lm_ln_g = ones(store, "lm.ln.gamma", d);
        let lm_ln_b = zeros(store, "lm.ln.beta", d);
        let lm_bias = zeros(store, "lm.bias", config.vocab_size);
        Ok(Encoder {
            config,
            tok_emb,
            pos_emb,
            emb_ln_g,
            emb_ln_b,
            layers,
            lm_dense,
            lm_dense_b,
            lm_ln_g,
            lm_ln_b,
            lm_bias,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("token sequence"));
        }
        if ids.len() > self.config.max_len {
            return Err(Error::SequenceTooLong {
                len: ids.len(),
                max: self.config.max_len,
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= self.config.vocab_size) {
            return Err(Error::InvalidConfig(format!(
                "token id {bad} outside vocabulary of size {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    fn dropout(&self, g: &mut Graph<'_>, x: Var, mode: &mut Mode<'_>) -> Result<Var> {
        let rate = self.config.dropout;
        match mode {
            Mode::Train(rng) if rate > 0.0 => {
                let keep = 1.0 - rate;
                let n = g.value(x).len();
                let factor = (0..n)
                    .map(|_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                g.mul_const(x, factor)
            }
            _ => Ok(x),
        }
    }

    /// Run the encoder on `ids` (any number of `<mask>` tokens).
    pub fn forward(
        &self,
        g: &mut Graph<'_>,
        ids: &[u32],
        mode: &mut Mode<'_>,
    ) -> Result<EncoderVars> {
        self.forward_impl(g, ids, mode, None)
    }

    /// As [`Encoder::forward`], but the final layer is evaluated only at the
    /// query positions `rows`. Earlier layers and the final layer's keys and
    /// values still see the whole sequence, so those rows are unchanged.
    pub fn forward_rows(
        &self,
        g: &mut Graph<'_>,
        ids: &[u32],
        mode: &mut Mode<'_>,
        rows: &[usize],
    ) -> Result<EncoderVars> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("final-layer rows"));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= ids.len()) {
            return Err(Error::InvalidShape {
                op: "forward_rows",
                shape: vec![bad, ids.len()],
            });
        }
        self.forward_impl(g, ids, mode, Some(rows))
    }

    fn forward_impl(
        &self,
        g: &mut Graph<'_>,
        ids: &[u32],
        mode: &mut Mode<'_>,
        rows: Option<&[usize]>,
    ) -> Result<EncoderVars> {
        self.check_ids(ids)?;
        let cfg = &self.config;
        let t = ids.len();
        let dh = cfg.head_dim();
        let eps = cfg.layer_norm_eps;
        let scale = 1.0 / libm::sqrt(dh as f64);

        let tok_table = g.param(self.tok_emb);
        let pos_table = g.param(self.pos_emb);
        let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let tok = g.gather_rows(tok_table, &idx)?;
        let positions: Vec<usize> = (0..t).collect();
        let pos = g.select_rows(pos_table, &positions)?;
        let x = g.add(tok, pos)?;
        let (lg, lb) = (g.param(self.emb_ln_g), g.param(self.emb_ln_b));
        let x = g.layer_norm(x, lg, lb, eps)?;
        let mut x = self.dropout(g, x, mode)?;

        let mut layer_outputs = Vec::with_capacity(cfg.num_layers);
        let mut attentions = Vec::with_capacity(cfg.num_layers);
        for (l, lp) in self.layers.iter().enumerate() {
            let proj = |g: &mut Graph<'_>, w: ParamId, b: ParamId, x: Var| -> Result<Var> {
                let (w, b) = (g.param(w), g.param(b));
                let y = g.matmul(x, w)?;
                g.add_bias(y, b)
            };
            let query_x = match rows {
                Some(r) if l + 1 == cfg.num_layers => g.select_rows(x, r)?,
                _ => x,
            };
            let q = proj(g, lp.wq, lp.bq, query_x)?;
            let k = proj(g, lp.wk, lp.bk, x)?;
            let v = proj(g, lp.wv, lp.bv, x)?;
            let mut heads = Vec::with_capacity(cfg.num_heads);
            let mut layer_attn = Vec::with_capacity(cfg.num_heads);
            for h in 0..cfg.num_heads {
                let qh = g.slice_cols(q, h * dh, dh)?;
                let kh = g.slice_cols(k, h * dh, dh)?;
                let vh = g.slice_cols(v, h * dh, dh)?;
                let scores = g.matmul_nt(qh, kh)?;
                let scores = g.scale(scores, scale);
                let attn = g.softmax(scores);
                layer_attn.push(attn);
                let attn = self.dropout(g, attn, mode)?;
                heads.push(g.matmul(attn, vh)?);
            }
            let ctx = g.concat(&heads, 1)?;
            let o = proj(g, lp.wo, lp.bo, ctx)?;
            let o = self.dropout(g, o, mode)?;
            let res = g.add(query_x, o)?;
            let (g1, b1) = (g.param(lp.ln1_g), g.param(lp.ln1_b));
            let x1 = g.layer_norm(res, g1, b1, eps)?;

            let h = proj(g, lp.w1, lp.b1, x1)?;
            let h = g.gelu(h);
            let h = proj(g, lp.w2, lp.b2, h)?;
            let h = self.dropout(g, h, mode)?;
            let res = g.add(x1, h)?;
            let (g2, b2) = (g.param(lp.ln2_g), g.param(lp.ln2_b));
            x = g.layer_norm(res, g2, b2, eps)?;
            layer_outputs.push(x);
            attentions.push(layer_attn);
        }
        Ok(EncoderVars {
            layer_outputs,
            attentions,
            final_rows: rows.map(<[usize]>::to_vec),
        })
    }

    /// Vocabulary log-probabilities (`k×V`) at the given rows of `hidden`.
    pub fn lm_log_probs(&self, g: &mut Graph<'_>, hidden: Var, positions: &[usize]) -> Result<Var> {
        let rows = g.select_rows(hidden, positions)?;
        let (w, b) = (g.param(self.lm_dense), g.param(self.lm_dense_b));
        let h = g.matmul(rows, w)?;
        let h = g.add_bias(h, b)?;
        let h = g.gelu(h);
        let (lg, lb) = (g.param(self.lm_ln_g), g.param(self.lm_ln_b));
        let h = g.layer_norm(h, lg, lb, self.config.layer_norm_eps)?;
        let table = g.param(self.tok_emb);
        let logits = g.matmul_nt(h, table)?;
        let bias = g.param(self.lm_bias);
        let logits = g.add_bias(logits, bias)?;
        Ok(g.log_softmax(logits))
    }

    /// Position of the single `<mask>` in `ids`, erroring on more than one.
    pub fn mask_position(ids: &[u32]) -> Result<Option<usize>> {
        let mut found = None;
        let mut count = 0;
        for (i, &id) in ids.iter().enumerate() {
            if id == MASK_ID {
                count += 1;
                found.get_or_insert(i);
            }
        }
        if count > 1 {
            return Err(Error::MultipleMasks(count));
        }
        Ok(found)
    }

    /// Eval-mode encoding to plain values.
    pub fn encode(&self, store: &ParamStore, ids: &[u32]) -> Result<EncoderOutput> {
        let mask_position = Self::mask_position(ids)?;
        let mut g = Graph::new(store);
        let vars = self.forward(&mut g, ids, &mut Mode::Eval)?;
        let emb = vars.embeddings();
        let vocab_log_probs = match mask_position {
            Some(m) => {
                let lp = self.lm_log_probs(&mut g, emb, &[m])?;
                Some(g.value(lp).data().to_vec())
            }
            None => None,
        };
        let t = ids.len();
        let cfg = &self.config;
        let mut attn = Vec::with_capacity(cfg.num_layers * cfg.num_heads * t * t);
        for layer in &vars.attentions {
            for &a in layer {
                attn.extend_from_slice(g.value(a).data());
            }
        }
        Ok(EncoderOutput {
            embeddings: g.value(emb).clone(),
            attentions: Tensor::new(vec![cfg.num_layers, cfg.num_heads, t, t], attn)?,
            mask_position,
            vocab_log_probs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::vocab::{build_vocab, tokenize};
    use crate::numerics::logsumexp;
    use rand::SeedableRng;

    fn setup() -> (crate::encoder::Vocab, Encoder, ParamStore) {
        let vocab = build_vocab(&["the dog chased the cat because it was fast ."], 1).unwrap();
        let mut store = ParamStore::new();
        let mut rng = ModelRng::seed_from_u64(3);
        let enc = Encoder::new(EncoderConfig::toy(vocab.len()), &mut store, &mut rng).unwrap();
        (vocab, enc, store)
    }

    #[test]
    fn attention_rows_and_lm_are_normalised() {
        let (vocab, enc, store) = setup();
        let ids = tokenize("the dog chased the cat because <mask> was fast .", &vocab);
        let out = enc.encode(&store, &ids).unwrap();
        let t = ids.len();
        assert_eq!(out.embeddings.shape(), &[t, 64]);
        for row in out.attentions.data().chunks(t) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(out.mask_position, Some(7));
        let lp = out.vocab_log_probs.unwrap();
        assert_eq!(lp.len(), vocab.len());
        assert!(lp.iter().all(|v| v.is_finite()));
        assert!(logsumexp(&lp).abs() < 1e-6);
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let (vocab, enc, store) = setup();
        let ids = tokenize("the cat was fast", &vocab);
        let a = enc.encode(&store, &ids).unwrap();
        let b = enc.encode(&store, &ids).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn positions_matter() {
        let (vocab, enc, store) = setup();
        let a = enc.encode(&store, &tokenize("dog cat", &vocab)).unwrap();
        let b = enc.encode(&store, &tokenize("cat dog", &vocab)).unwrap();
        // the "dog" row moves from position 1 to 2
        assert_ne!(a.embeddings.row(1), b.embeddings.row(2));
    }

    #[test]
    fn rejects_long_and_multi_mask_inputs() {
        let (vocab, enc, store) = setup();
        let long = alloc::vec![5u32; 65];
        assert!(matches!(
            enc.encode(&store, &long),
            Err(Error::SequenceTooLong { len: 65, max: 64 })
        ));
        let two = tokenize("<mask> and <mask>", &vocab);
        assert_eq!(enc.encode(&store, &two), Err(Error::MultipleMasks(2)));
    }

    #[test]
    fn config_validation() {
        let mut c = EncoderConfig::toy(10);
        c.num_heads = 3;
        assert!(c.validate().is_err());
        c.num_heads = 2;
        c.dropout = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn dropout_only_in_training() {
        let (vocab, enc, store) = setup();
        let ids = tokenize("the dog was fast", &vocab);
        let mut rng = ModelRng::seed_from_u64(1);
        let mut g = Graph::new(&store);
        let train = enc
            .forward(&mut g, &ids, &mut Mode::Train(&mut rng))
            .unwrap();
        let tr = g.value(train.embeddings()).clone();
        let eval = enc.encode(&store, &ids).unwrap();
        assert_ne!(tr, eval.embeddings);
    }

    #[test]
    fn restricted_final_layer_matches_full_rows() {
        let (vocab, enc, store) = setup();
        let ids = tokenize("the dog chased the cat because <mask> was fast .", &vocab);
        let full = enc.encode(&store, &ids).unwrap();
        let t = ids.len();
        let mut g = Graph::new(&store);
        let rows = [0, 6, 9];
        let vars = enc
            .forward_rows(&mut g, &ids, &mut Mode::Eval, &rows)
            .unwrap();
        let emb = g.value(vars.embeddings());
        assert_eq!(emb.shape(), &[3, 64]);
        let last = enc.config().num_layers - 1;
        for (r, &pos) in rows.iter().enumerate() {
            assert_eq!(vars.row(last, pos), Some(r));
            for (x, y) in emb.row(r).iter().zip(full.embeddings.row(pos)) {
                assert!((x - y).abs() < 1e-12);
            }
            for h in 0..enc.config().num_heads {
                let offset = ((last * enc.config().num_heads + h) * t + pos) * t;
                let want = &full.attentions.data()[offset..offset + t];
                let got = g.value(vars.attentions[last][h]).row(r);
                assert!(got.iter().zip(want).all(|(x, y)| (x - y).abs() < 1e-12));
            }
        }
        assert_eq!(vars.row(last, 3), None);
        assert_eq!(vars.row(0, 3), Some(3));
        assert!(enc
            .forward_rows(&mut g, &ids, &mut Mode::Eval, &[t])
            .is_err());
    }
}
