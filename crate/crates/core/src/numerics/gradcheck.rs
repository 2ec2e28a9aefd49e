//! Central finite-difference verification of analytic gradients.

use alloc::vec;

use super::graph::{Graph, Var};
use super::params::ParamStore;
use crate::error::{Error, Result};

/// Anything exposing a flat vector of perturbable scalar coordinates.
pub trait Coordinates {
    fn num_coords(&self) -> usize;
    fn coord(&self, i: usize) -> f64;
    fn set_coord(&mut self, i: usize, value: f64);
}

impl Coordinates for [f64] {
    fn num_coords(&self) -> usize {
        self.len()
    }
    fn coord(&self, i: usize) -> f64 {
        self[i]
    }
    fn set_coord(&mut self, i: usize, value: f64) {
        self[i] = value;
    }
}

impl Coordinates for ParamStore {
    fn num_coords(&self) -> usize {
        self.num_scalars()
    }
    fn coord(&self, i: usize) -> f64 {
        self.scalar(i)
    }
    fn set_coord(&mut self, i: usize, value: f64) {
        self.set_scalar(i, value);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// max over coordinates of `|analytic - numeric| / max(1, |analytic|, |numeric|)`
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    fn empty() -> Self {
        GradCheckReport {
            max_rel_error: 0.0,
            worst_index: 0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
            checked: 0,
        }
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }

    fn record(&mut self, index: usize, analytic: f64, numeric: f64) {
        let rel = (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs());
        if rel > self.max_rel_error || self.checked == 0 {
            self.max_rel_error = rel;
            self.worst_index = index;
            self.worst_analytic = analytic;
            self.worst_numeric = numeric;
        }
        self.checked += 1;
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "eps must be positive, got {eps}"
        )));
    }
    Ok(())
}

fn central(plus: f64, minus: f64, eps: f64) -> Result<f64> {
    if !plus.is_finite() || !minus.is_finite() {
        return Err(Error::NonFinite("finite-difference evaluation"));
    }
    Ok((plus - minus) / (2.0 * eps))
}

/// Compare `analytic` against central differences of `f` on every coordinate.
pub fn finite_diff_check<P, F>(
    params: &mut P,
    analytic: &[f64],
    eps: f64,
    f: F,
) -> Result<GradCheckReport>
where
    P: Coordinates + ?Sized,
    F: FnMut(&P) -> Result<f64>,
{
    let n = params.num_coords();
    finite_diff_check_coords(params, analytic, eps, 0..n, f)
}

/// As [`finite_diff_check`], restricted to the listed coordinates.
pub fn finite_diff_check_coords<P, F, I>(
    params: &mut P,
    analytic: &[f64],
    eps: f64,
    coords: I,
    mut f: F,
) -> Result<GradCheckReport>
where
    P: Coordinates + ?Sized,
    F: FnMut(&P) -> Result<f64>,
    I: IntoIterator<Item = usize>,
{
    check_eps(eps)?;
    if analytic.len() != params.num_coords() {
        return Err(Error::ShapeMismatch {
            op: "finite_diff_check",
            lhs: vec![params.num_coords()],
            rhs: vec![analytic.len()],
        });
    }
    let mut report = GradCheckReport::empty();
    for i in coords {
        let orig = params.coord(i);
        params.set_coord(i, orig + eps);
        let plus = f(params);
        params.set_coord(i, orig - eps);
        let minus = f(params);
        params.set_coord(i, orig);
        let numeric = central(plus?, minus?, eps)?;
        report.record(i, analytic[i], numeric);
    }
    Ok(report)
}

/// Check the gradient of the scalar `loss` recorded in `graph` against
/// central differences, over every coordinate of every parameter in the
/// graph's store.
///
/// Each perturbation re-evaluates only the nodes downstream of the perturbed
/// parameter, so the numeric values equal those of rebuilding the graph from
/// scratch. Parameters the graph never reads have an exact derivative of
/// zero and are compared against that. Indices in the report are flat
/// store coordinates.
pub fn graph_grad_check(graph: &mut Graph<'_>, loss: Var, eps: f64) -> Result<GradCheckReport> {
    check_eps(eps)?;
    let grads = graph.backward(loss)?.param_grads(graph);
    let store = graph.store();
    let mut report = GradCheckReport::empty();
    let mut offset = 0;
    for (id, param) in store.iter() {
        let n = param.value.len();
        let analytic = grads.get(id);
        let deps = graph.dependents(id);
        if !deps.contains(&loss.0) {
            for i in 0..n {
                report.record(offset + i, analytic.map_or(0.0, |g| g[i]), 0.0);
            }
            offset += n;
            continue;
        }
        for i in 0..n {
            let orig = param.value.data()[i];
            graph.poke_param(id, i, orig + eps);
            graph.reevaluate(id, &deps);
            let plus = graph.scalar(loss);
            graph.poke_param(id, i, orig - eps);
            graph.reevaluate(id, &deps);
            let minus = graph.scalar(loss);
            graph.poke_param(id, i, orig);
            let numeric = central(plus, minus, eps)?;
            report.record(offset + i, analytic.map_or(0.0, |g| g[i]), numeric);
        }
        graph.reevaluate(id, &deps);
        offset += n;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Graph, Tensor};
    use rand::{Rng, SeedableRng};

    #[test]
    fn square_at_three() {
        let mut x = [3.0];
        let r = finite_diff_check(&mut x[..], &[6.0], 1e-5, |p| Ok(p[0] * p[0])).unwrap();
        assert!(r.max_rel_error < 1e-8);
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        let mut x = [3.0];
        let r = finite_diff_check(&mut x[..], &[12.0], 1e-5, |p| Ok(p[0] * p[0])).unwrap();
        assert!((r.max_rel_error - 0.5).abs() < 1e-6);
        assert!(!r.passes(1e-4));
    }

    #[test]
    fn non_finite_evaluation_errors() {
        let mut x = [0.0];
        let r = finite_diff_check(&mut x[..], &[0.0], 1e-5, |_| Ok(f64::NAN));
        assert_eq!(r, Err(Error::NonFinite("finite-difference evaluation")));
    }

    // bce(softmax(x W + b)) on a random 4-dim input
    fn linear_bce(store: &ParamStore, x: &[f64]) -> Result<(f64, alloc::vec::Vec<f64>)> {
        let mut g = Graph::new(store);
        let input = g.constant(Tensor::matrix(1, 4, x.to_vec())?);
        let w = g.param(store.find("w").unwrap());
        let b = g.param(store.find("b").unwrap());
        let h = g.matmul(input, w)?;
        let h = g.add_bias(h, b)?;
        let h = g.reshape(h, &[2])?;
        let p = g.softmax(h);
        let loss = g.bce_pair_loss(p, 1)?;
        let grads = g.backward(loss)?;
        let pg = grads.param_grads(&g);
        let value = g.scalar(loss);
        let mut s = store.clone();
        s.zero_grad();
        s.accumulate(&pg);
        Ok((value, s.flat_grad()))
    }

    #[test]
    fn bce_softmax_linear_matches_numeric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let w: alloc::vec::Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        store.add("w", Tensor::matrix(4, 2, w).unwrap(), true);
        store.add("b", Tensor::vector(alloc::vec![0.1, -0.2]), false);
        let x: alloc::vec::Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, analytic) = linear_bce(&store, &x).unwrap();
        let r =
            finite_diff_check(&mut store, &analytic, 1e-5, |s| Ok(linear_bce(s, &x)?.0)).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        assert_eq!(r.checked, 10);
    }

    #[test]
    fn graph_check_matches_rebuilt_evaluation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let w: alloc::vec::Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        store.add("w", Tensor::matrix(4, 2, w).unwrap(), true);
        store.add("b", Tensor::vector(alloc::vec![0.3, -0.1]), false);
        store.add("unused", Tensor::vector(alloc::vec![1.0, 2.0, 3.0]), false);
        let x: alloc::vec::Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, analytic) = linear_bce(&store, &x).unwrap();
        let rebuilt =
            finite_diff_check(&mut store, &analytic, 1e-5, |s| Ok(linear_bce(s, &x)?.0)).unwrap();

        let mut g = Graph::new(&store);
        let input = g.constant(Tensor::matrix(1, 4, x.clone()).unwrap());
        let w = g.param(store.find("w").unwrap());
        let b = g.param(store.find("b").unwrap());
        let h = g.matmul(input, w).unwrap();
        let h = g.add_bias(h, b).unwrap();
        let h = g.reshape(h, &[2]).unwrap();
        let p = g.softmax(h);
        let loss = g.bce_pair_loss(p, 1).unwrap();
        let before = g.scalar(loss);
        let incremental = graph_grad_check(&mut g, loss, 1e-5).unwrap();
        assert_eq!(incremental, rebuilt);
        assert_eq!(g.scalar(loss), before);
    }
}
