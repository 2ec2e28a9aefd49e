use alloc::vec::Vec;

use super::heads::{CssHead, Head, MasHead, WgsrHead};
use super::pair::{max_mask, Objective, ProbPair};
use crate::encoder::{Encoder, EncoderConfig, EncoderVars, Mode, Vocab};
use crate::error::{Error, Result};
use crate::init::ModelRng;
use crate::numerics::{Graph, ParamStore, Var};
use crate::schema::{
    build_masked_input, build_sr_inputs, CandidateSpan, MaskedInput, SchemaInstance, SrInputPair,
};

/// One instance prepared for a particular objective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Example {
    Sr(SrInputPair),
    Masked(MaskedInput),
}

impl Example {
    pub fn id(&self) -> &str {
        match self {
            Example::Sr(p) => &p.id,
            Example::Masked(m) => &m.id,
        }
    }

    /// Zero-based index of the correct sentence or candidate.
    pub fn label(&self) -> Option<usize> {
        match self {
            Example::Sr(p) => p.correct_index,
            Example::Masked(m) => m.label,
        }
    }
}

/// Build the inputs `objective` consumes. Span-based objectives fail with
/// [`Error::CandidateNotFound`] when a candidate cannot be located.
pub fn prepare_example(
    objective: Objective,
    instance: &SchemaInstance,
    vocab: &Vocab,
) -> Result<Example> {
    match objective {
        Objective::WgSr => Ok(Example::Sr(build_sr_inputs(instance, vocab)?)),
        Objective::Bwp => Ok(Example::Masked(build_masked_input(instance, vocab)?)),
        Objective::Css | Objective::Mas => {
            let m = build_masked_input(instance, vocab)?;
            m.require_spans([&instance.candidate1, &instance.candidate2])?;
            Ok(Example::Masked(m))
        }
    }
}

/// An encoder together with one objective head.
#[derive(Debug, Clone)]
pub struct Model {
    encoder: Encoder,
    head: Head,
}

impl Model {
    /// Register a fresh encoder and head in `store`.
    pub fn new(
        objective: Objective,
        config: EncoderConfig,
        store: &mut ParamStore,
        rng: &mut ModelRng,
    ) -> Result<Self> {
        let encoder = Encoder::new(config, store, rng)?;
        Self::with_encoder(objective, encoder, store, rng)
    }

    /// Attach a fresh head to an encoder already registered in `store`.
    pub fn with_encoder(
        objective: Objective,
        encoder: Encoder,
        store: &mut ParamStore,
        rng: &mut ModelRng,
    ) -> Result<Self> {
        let head = Head::new(objective, encoder.config(), store, rng)?;
        Ok(Model { encoder, head })
    }

    pub fn objective(&self) -> Objective {
        self.head.objective()
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    /// The `[2]` probability pair for `example`.
    pub fn probs(&self, g: &mut Graph<'_>, example: &Example, mode: &mut Mode<'_>) -> Result<Var> {
        let logits = match (&self.head, example) {
            (Head::WgSr(h), Example::Sr(p)) => self.wgsr_logits(g, h, p, mode)?,
            (Head::Bwp, Example::Masked(m)) => self.bwp_logits(g, m, mode)?,
            (Head::Css(h), Example::Masked(m)) => self.css_logits(g, h, m, mode)?,
            (Head::Mas(h), Example::Masked(m)) => self.mas_logits(g, h, m, mode)?,
            _ => {
                return Err(Error::InvalidConfig(alloc::format!(
                    "example {} was not prepared for {}",
                    example.id(),
                    self.objective()
                )))
            }
        };
        Ok(g.softmax(logits))
    }

    /// Binary cross-entropy of the pair against the gold index.
    pub fn loss(&self, g: &mut Graph<'_>, example: &Example, mode: &mut Mode<'_>) -> Result<Var> {
        let label = example.label().ok_or_else(|| Error::Unlabeled {
            id: example.id().into(),
        })?;
        let p = self.probs(g, example, mode)?;
        objective_loss(g, p, label)
    }

    /// Eval-mode probabilities as plain values.
    pub fn predict_pair(&self, store: &ParamStore, example: &Example) -> Result<ProbPair> {
        let mut g = Graph::new(store);
        let p = self.probs(&mut g, example, &mut Mode::Eval)?;
        ProbPair::from_slice(g.value(p).data())
    }

    fn wgsr_logits(
        &self,
        g: &mut Graph<'_>,
        head: &WgsrHead,
        pair: &SrInputPair,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let mut scores = Vec::with_capacity(2);
        for seq in &pair.sequences {
            let vars = self
                .encoder
                .forward_rows(g, seq, &mut mode.reborrow(), &[0])?;
            scores.push(head.score(g, vars.embeddings())?);
        }
        let s = g.concat(&scores, 1)?;
        g.reshape(s, &[2])
    }

    fn bwp_logits(
        &self,
        g: &mut Graph<'_>,
        input: &MaskedInput,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let vars = self
            .encoder
            .forward_rows(g, &input.ids, mode, &[input.mask_position])?;
        let lp = self.encoder.lm_log_probs(g, vars.embeddings(), &[0])?;
        let mut means = Vec::with_capacity(2);
        for cand in &input.candidate_ids {
            let idx: Vec<usize> = cand.iter().map(|&t| t as usize).collect();
            let picked = g.pick(lp, &idx)?;
            means.push(g.mean_axis(picked, 0)?);
        }
        g.concat(&means, 0)
    }

    fn spans(input: &MaskedInput) -> Result<[CandidateSpan; 2]> {
        match input.spans {
            [Some(a), Some(b)] => Ok([a, b]),
            _ => Err(Error::CandidateNotFound {
                candidate: alloc::format!("in instance {}", input.id),
            }),
        }
    }

    fn css_logits(
        &self,
        g: &mut Graph<'_>,
        head: &CssHead,
        input: &MaskedInput,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let spans = Self::spans(input)?;
        let mut needed: Vec<usize> = spans.iter().flat_map(|s| s.positions()).collect();
        needed.push(input.mask_position);
        needed.sort_unstable();
        needed.dedup();
        let vars = self.encoder.forward_rows(g, &input.ids, mode, &needed)?;
        let emb = vars.embeddings();
        let y = g.select_rows(emb, &vars.final_rows_of(&[input.mask_position])?)?;
        let mut sims = Vec::with_capacity(2);
        for span in spans {
            let positions: Vec<usize> = span.positions().collect();
            let x = g.select_rows(emb, &vars.final_rows_of(&positions)?)?;
            let x = g.mean_axis(x, 0)?;
            sims.push(head.similarity(g, x, y)?);
        }
        let s = g.concat(&sims, 1)?;
        g.reshape(s, &[2])
    }

    fn mas_logits(
        &self,
        g: &mut Graph<'_>,
        head: &MasHead,
        input: &MaskedInput,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let spans = Self::spans(input)?;
        let vars = self
            .encoder
            .forward_rows(g, &input.ids, mode, &[input.mask_position])?;
        let [a1, a2] = spans.map(|s| mask_attention(g, &vars, input.mask_position, s));
        let (a1, a2) = (a1?, a2?);
        let (m1, m2) = max_mask(g.value(a1).data(), g.value(a2).data())?;
        let b1 = g.mul_const(a1, m1)?;
        let b2 = g.mul_const(a2, m2)?;
        let b = g.concat(&[b1, b2], 0)?;
        let n = g.value(b).len();
        let b = g.reshape(b, &[1, n])?;
        let logits = head.logits(g, b)?;
        g.reshape(logits, &[2])
    }
}

/// `A[l·H + h]`: attention from the mask to the span, averaged over the span.
fn mask_attention(
    g: &mut Graph<'_>,
    vars: &EncoderVars,
    mask: usize,
    span: CandidateSpan,
) -> Result<Var> {
    let mut cells = Vec::new();
    for (l, layer) in vars.attentions.iter().enumerate() {
        let row = vars.row(l, mask).ok_or(Error::InvalidShape {
            op: "mask_attention",
            shape: alloc::vec![mask],
        })?;
        for &attn in layer {
            let t = g.shape(attn)[1];
            let idx: Vec<usize> = span.positions().map(|s| row * t + s).collect();
            let picked = g.pick(attn, &idx)?;
            cells.push(g.mean_axis(picked, 0)?);
        }
    }
    g.concat(&cells, 0)
}

/// Binary cross-entropy on the probability pair.
pub fn objective_loss(g: &mut Graph<'_>, probs: Var, label: usize) -> Result<Var> {
    g.bce_pair_loss(probs, label)
}

/// The BWP pair from one row of vocabulary log-probabilities: each
/// candidate's log-probs are averaged, then the two means are softmaxed.
pub fn bwp_from_log_probs(log_probs: &[f64], candidates: [&[u32]; 2]) -> Result<ProbPair> {
    let mut means = [0.0; 2];
    for (m, cand) in means.iter_mut().zip(candidates) {
        if cand.is_empty() {
            return Err(Error::EmptyInput("candidate tokens"));
        }
        let mut sum = 0.0;
        for &t in cand {
            sum += *log_probs.get(t as usize).ok_or(Error::InvalidShape {
                op: "bwp",
                shape: alloc::vec![log_probs.len()],
            })?;
        }
        *m = sum / cand.len() as f64;
    }
    Ok(ProbPair::from_logits(means[0], means[1]))
}
