use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::pair::Objective;
use crate::error::{Error, Result};
use crate::init::{self, ModelRng};
use crate::numerics::{Graph, ParamId, ParamStore, Tensor, Var};

/// Name prefix shared by every head parameter.
pub const HEAD_PREFIX: &str = "head.";

fn param_name(objective: Objective, name: &str) -> String {
    format!("{HEAD_PREFIX}{}.{name}", objective.name())
}

/// A dense layer `x·W + b` stored in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Dense {
    fn xavier(
        store: &mut ParamStore,
        rng: &mut ModelRng,
        name: String,
        fan_in: usize,
        fan_out: usize,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            init::xavier(rng, fan_in, fan_out),
            true,
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[fan_out]), false);
        Dense { weight, bias }
    }

    fn zeroed(store: &mut ParamStore, name: String, fan_in: usize, fan_out: usize) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::zeros(&[fan_in, fan_out]),
            true,
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[fan_out]), false);
        Dense { weight, bias }
    }

    /// `x` is `m×fan_in`.
    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        let y = g.matmul(x, w)?;
        g.add_bias(y, b)
    }

    /// Plain-value forward of a single row.
    pub fn apply(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let w = store.value(self.weight);
        let (n_in, n_out) = w.dims2().expect("dense weight is a matrix");
        assert_eq!(x.len(), n_in, "dense input width");
        let mut y = store.value(self.bias).data().to_vec();
        for (i, &xi) in x.iter().enumerate() {
            for (yj, &wij) in y.iter_mut().zip(&w.data()[i * n_out..(i + 1) * n_out]) {
                *yj += xi * wij;
            }
        }
        y
    }
}

/// Sequence-ranking head: `tanh(h·W + b)·w_out + b_out` on the first-token embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WgsrHead {
    pub hidden: Dense,
    pub output: Dense,
}

impl WgsrHead {
    /// Output layer starts at zero, so both sequences first score equally.
    pub fn new(d: usize, store: &mut ParamStore, rng: &mut ModelRng) -> Self {
        let o = Objective::WgSr;
        WgsrHead {
            hidden: Dense::xavier(store, rng, param_name(o, "dense"), d, d),
            output: Dense::zeroed(store, param_name(o, "out"), d, 1),
        }
    }

    /// `cls` is `1×d`; returns a `1×1` score.
    pub fn score(&self, g: &mut Graph<'_>, cls: Var) -> Result<Var> {
        let h = self.hidden.forward(g, cls)?;
        let h = g.tanh(h);
        self.output.forward(g, h)
    }
}

/// Additive-alignment similarity `vᵀ tanh(W x + U y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CssHead {
    pub v: ParamId,
    /// `d×d`, applied to row vectors as `x·Wᵀ`.
    pub w: ParamId,
    pub u: ParamId,
}

impl CssHead {
    pub fn new(d: usize, store: &mut ParamStore, rng: &mut ModelRng) -> Self {
        let o = Objective::Css;
        CssHead {
            v: store.add(param_name(o, "v"), Tensor::zeros(&[d, 1]), true),
            w: store.add(param_name(o, "w"), init::xavier(rng, d, d), true),
            u: store.add(param_name(o, "u"), init::xavier(rng, d, d), true),
        }
    }

    /// `x` and `y` are `1×d`; returns `1×1`.
    pub fn similarity(&self, g: &mut Graph<'_>, x: Var, y: Var) -> Result<Var> {
        let (v, w, u) = (g.param(self.v), g.param(self.w), g.param(self.u));
        let wx = g.matmul_nt(x, w)?;
        let uy = g.matmul_nt(y, u)?;
        let z = g.add(wx, uy)?;
        let z = g.tanh(z);
        g.matmul(z, v)
    }

    /// Row-major `v`, `W`, `U` for [`super::css_similarity`].
    pub fn values<'s>(&self, store: &'s ParamStore) -> (&'s [f64], &'s [f64], &'s [f64]) {
        (
            store.value(self.v).data(),
            store.value(self.w).data(),
            store.value(self.u).data(),
        )
    }
}

/// Classifier over the masked attention features: two tanh layers of width
/// `2·L·H` and a two-way output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MasHead {
    pub hidden1: Dense,
    pub hidden2: Dense,
    pub output: Dense,
}

impl MasHead {
    pub fn new(
        num_layers: usize,
        num_heads: usize,
        store: &mut ParamStore,
        rng: &mut ModelRng,
    ) -> Self {
        let o = Objective::Mas;
        let n = 2 * num_layers * num_heads;
        MasHead {
            hidden1: Dense::xavier(store, rng, param_name(o, "hidden1"), n, n),
            hidden2: Dense::xavier(store, rng, param_name(o, "hidden2"), n, n),
            output: Dense::zeroed(store, param_name(o, "out"), n, 2),
        }
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.value(self.hidden1.weight).shape()[0]
    }

    /// `features` is `1×2LH`; returns `1×2` logits.
    pub fn logits(&self, g: &mut Graph<'_>, features: Var) -> Result<Var> {
        let h = self.hidden1.forward(g, features)?;
        let h = g.tanh(h);
        let h = self.hidden2.forward(g, h)?;
        let h = g.tanh(h);
        self.output.forward(g, h)
    }
}

/// The trainable part specific to one objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    WgSr(WgsrHead),
    /// Scores come straight from the masked-LM head.
    Bwp,
    Css(CssHead),
    Mas(MasHead),
}

impl Head {
    pub fn new(
        objective: Objective,
        config: &crate::encoder::EncoderConfig,
        store: &mut ParamStore,
        rng: &mut ModelRng,
    ) -> Result<Self> {
        if store
            .iter()
            .any(|(_, p)| p.name.starts_with(&param_name(objective, "")))
        {
            return Err(Error::InvalidConfig(format!(
                "store already holds a {objective} head"
            )));
        }
        let d = config.hidden;
        Ok(match objective {
            Objective::WgSr => Head::WgSr(WgsrHead::new(d, store, rng)),
            Objective::Bwp => Head::Bwp,
            Objective::Css => Head::Css(CssHead::new(d, store, rng)),
            Objective::Mas => Head::Mas(MasHead::new(
                config.num_layers,
                config.num_heads,
                store,
                rng,
            )),
        })
    }

    pub fn objective(&self) -> Objective {
        match self {
            Head::WgSr(_) => Objective::WgSr,
            Head::Bwp => Objective::Bwp,
            Head::Css(_) => Objective::Css,
            Head::Mas(_) => Objective::Mas,
        }
    }
}
