//! Finite-difference checks of every differentiable graph op in isolation.

use alloc::vec::Vec;

use super::{graph_grad_check, Graph, ParamStore, Tensor, Var};
use crate::error::Result;
use crate::init::{seeded, uniform};

fn store() -> ParamStore {
    let mut rng = seeded(31);
    let mut s = ParamStore::new();
    s.add("a", uniform(&mut rng, &[3, 4], 1.5), true);
    s.add("b", uniform(&mut rng, &[4, 3], 1.5), true);
    s.add("c", uniform(&mut rng, &[3, 4], 1.5), true);
    s.add("gamma", uniform(&mut rng, &[4], 1.0), false);
    s.add("beta", uniform(&mut rng, &[4], 1.0), false);
    s.add("table", uniform(&mut rng, &[5, 4], 1.0), true);
    s
}

/// Check `sum(w ∘ op(params))` for fixed random weights `w`.
fn check(build: impl Fn(&mut Graph<'_>, &[Var]) -> Result<Var>) {
    let s = store();
    let mut g = Graph::new(&s);
    let vars: Vec<Var> = s.iter().map(|(id, _)| g.param(id)).collect();
    let y = build(&mut g, &vars).unwrap();
    let n = g.value(y).len();
    let w = uniform(&mut seeded(n as u64), &[n], 1.0).data().to_vec();
    let weighted = g.mul_const(y, w).unwrap();
    let loss = g.sum(weighted);
    let r = graph_grad_check(&mut g, loss, 1e-5).unwrap();
    assert!(r.max_rel_error < 1e-7, "{r:?}");
}

#[test]
fn matmul_family() {
    check(|g, v| g.matmul(v[0], v[1]));
    check(|g, v| g.matmul_nt(v[0], v[2]));
    check(|g, v| g.transpose(v[1]));
}

#[test]
fn elementwise() {
    check(|g, v| g.add(v[0], v[2]));
    check(|g, v| g.sub(v[0], v[2]));
    check(|g, v| g.mul(v[0], v[2]));
    check(|g, v| g.add_bias(v[0], v[4]));
    check(|g, v| Ok(g.scale(v[0], -2.5)));
    check(|g, v| Ok(g.tanh(v[0])));
    check(|g, v| Ok(g.gelu(v[0])));
}

#[test]
fn normalizers() {
    check(|g, v| Ok(g.softmax(v[0])));
    check(|g, v| Ok(g.log_softmax(v[0])));
    check(|g, v| g.layer_norm(v[0], v[3], v[4], 1e-5));
}

#[test]
fn indexing_and_shape() {
    check(|g, v| g.gather_rows(v[5], &[4, 0, 4]));
    check(|g, v| g.select_rows(v[0], &[2, 2, 0]));
    check(|g, v| g.slice_cols(v[0], 1, 2));
    check(|g, v| g.pick(v[0], &[0, 5, 11, 5]));
    check(|g, v| g.concat(&[v[0], v[2]], 0));
    check(|g, v| g.concat(&[v[0], v[2]], 1));
    check(|g, v| g.mean_axis(v[0], 0));
    check(|g, v| g.mean_axis(v[0], 1));
    check(|g, v| g.reshape(v[0], &[2, 6]));
}

#[test]
fn bce_through_softmax() {
    check(|g, v| {
        let z = g.pick(v[0], &[3, 7])?;
        let p = g.softmax(z);
        g.bce_pair_loss(p, 1)
    });
}

/// GELU against the textbook tanh form, values and slopes.
#[test]
fn gelu_matches_tanh_form() {
    let oracle = |x: f64| {
        let u = libm::sqrt(2.0 / core::f64::consts::PI) * (x + 0.044715 * x * x * x);
        0.5 * x * (1.0 + libm::tanh(u))
    };
    let xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.2).collect();
    let mut g = Graph::detached();
    let x = g.leaf(Tensor::vector(xs.clone()), true);
    let y = g.gelu(x);
    for (got, &x0) in g.value(y).data().iter().zip(&xs) {
        assert!(
            (got - oracle(x0)).abs() <= 1e-14 * (1.0 + x0.abs()),
            "gelu({x0})"
        );
    }
    let loss = g.sum(y);
    let grads = g.backward(loss).unwrap();
    let h = 1e-6;
    for (d, &x0) in grads.get(x).unwrap().iter().zip(&xs) {
        let numeric = (oracle(x0 + h) - oracle(x0 - h)) / (2.0 * h);
        assert!((d - numeric).abs() < 1e-8, "gelu'({x0}): {d} vs {numeric}");
    }
}
