use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use super::*;
use crate::encoder::{build_vocab, EncoderConfig, Mode, Vocab};
use crate::init::{self, ModelRng};
use crate::numerics::{graph_grad_check, softmax, Graph, ParamStore};
use crate::schema::SchemaInstance;

const COUNCIL: &str =
    "The city councilmen refused the demonstrators a permit because _ feared violence.";

fn council() -> SchemaInstance {
    SchemaInstance::new(
        "c",
        COUNCIL,
        "the city councilmen",
        "the demonstrators",
        Some(1),
    )
    .unwrap()
}

fn small_config(vocab: &Vocab) -> EncoderConfig {
    EncoderConfig {
        hidden: 16,
        ffn: 32,
        dropout: 0.0,
        ..EncoderConfig::toy(vocab.len())
    }
}

fn setup(objective: Objective) -> (Vocab, Model, ParamStore) {
    let vocab = build_vocab(&[COUNCIL], 1).unwrap();
    let mut store = ParamStore::new();
    let mut rng = ModelRng::seed_from_u64(11);
    let model = Model::new(objective, small_config(&vocab), &mut store, &mut rng).unwrap();
    (vocab, model, store)
}

/// Overwrite every head parameter with a random draw so nothing sits at zero.
fn randomize_head(store: &mut ParamStore, seed: u64) {
    let mut rng = ModelRng::seed_from_u64(seed);
    for p in store.params_mut() {
        if p.name.starts_with(HEAD_PREFIX) {
            let shape = p.value.shape().to_vec();
            p.value = init::normal(&mut rng, &shape, 0.5);
        }
    }
}

fn close(a: ProbPair, b: ProbPair, tol: f64) -> bool {
    (a.p1 - b.p1).abs() < tol && (a.p2 - b.p2).abs() < tol
}

fn tanh_row(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = libm::tanh(*v));
}

#[test]
fn zero_output_layers_give_even_odds() {
    for o in [Objective::WgSr, Objective::Css, Objective::Mas] {
        let (vocab, model, store) = setup(o);
        let ex = prepare_example(o, &council(), &vocab).unwrap();
        let p = model.predict_pair(&store, &ex).unwrap();
        assert_eq!((p.p1, p.p2), (0.5, 0.5), "{o}");
    }
}

#[test]
fn identical_sequences_tie() {
    let (vocab, model, mut store) = setup(Objective::WgSr);
    randomize_head(&mut store, 1);
    let Example::Sr(mut pair) = prepare_example(Objective::WgSr, &council(), &vocab).unwrap()
    else {
        unreachable!()
    };
    pair.sequences[1] = pair.sequences[0].clone();
    let p = model.predict_pair(&store, &Example::Sr(pair)).unwrap();
    assert_eq!(p.p1, p.p2);
}

#[test]
fn wgsr_matches_recomputation() {
    let (vocab, model, mut store) = setup(Objective::WgSr);
    randomize_head(&mut store, 2);
    let ex = prepare_example(Objective::WgSr, &council(), &vocab).unwrap();
    let got = model.predict_pair(&store, &ex).unwrap();
    let (Head::WgSr(head), Example::Sr(pair)) = (model.head(), &ex) else {
        unreachable!()
    };
    let scores: Vec<f64> = pair
        .sequences
        .iter()
        .map(|s| {
            let out = model.encoder().encode(&store, s).unwrap();
            let mut h = head.hidden.apply(&store, out.embeddings.row(0));
            tanh_row(&mut h);
            head.output.apply(&store, &h)[0]
        })
        .collect();
    let want = softmax(&scores);
    assert!(close(
        got,
        ProbPair {
            p1: want[0],
            p2: want[1]
        },
        1e-12
    ));
    assert_ne!(got.p1, 0.5);
}

#[test]
fn bwp_hand_examples() {
    let mut lp = [-9.0; 8];
    lp[5] = -1.0;
    lp[6] = -1.0;
    let p = bwp_from_log_probs(&lp, [&[5], &[6]]).unwrap();
    assert_eq!((p.p1, p.p2), (0.5, 0.5));
    lp[5] = -1.0;
    lp[6] = -3.0;
    lp[7] = -2.0;
    let p = bwp_from_log_probs(&lp, [&[5, 6], &[7]]).unwrap();
    assert!((p.p1 - 0.5).abs() < 1e-15);
    let p = bwp_from_log_probs(&lp, [&[5], &[7]]).unwrap();
    // P1/(P1+P2) with P = e^-1, e^-2
    let (a, b) = (libm::exp(-1.0), libm::exp(-2.0));
    assert!((p.p1 - a / (a + b)).abs() < 1e-15);
}

#[test]
fn bwp_matches_mask_log_probs_and_shift() {
    let (vocab, model, store) = setup(Objective::Bwp);
    let ex = prepare_example(Objective::Bwp, &council(), &vocab).unwrap();
    let got = model.predict_pair(&store, &ex).unwrap();
    let Example::Masked(m) = &ex else {
        unreachable!()
    };
    let out = model.encoder().encode(&store, &m.ids).unwrap();
    let lp = out.vocab_log_probs.unwrap();
    let cands = [m.candidate_ids[0].as_slice(), m.candidate_ids[1].as_slice()];
    let want = bwp_from_log_probs(&lp, cands).unwrap();
    assert!(close(got, want, 1e-12));
    let shifted: Vec<f64> = lp.iter().map(|v| v + 5.0).collect();
    assert!(close(
        bwp_from_log_probs(&shifted, cands).unwrap(),
        want,
        1e-12
    ));
}

#[test]
fn css_matches_recomputation() {
    let (vocab, model, mut store) = setup(Objective::Css);
    randomize_head(&mut store, 3);
    let ex = prepare_example(Objective::Css, &council(), &vocab).unwrap();
    let got = model.predict_pair(&store, &ex).unwrap();
    let (Head::Css(head), Example::Masked(m)) = (model.head(), &ex) else {
        unreachable!()
    };
    let out = model.encoder().encode(&store, &m.ids).unwrap();
    let d = out.embeddings.shape()[1];
    let (v, w, u) = head.values(&store);
    let y = out.embeddings.row(m.mask_position);
    let sims: Vec<f64> = m
        .spans
        .iter()
        .map(|s| {
            let s = s.unwrap();
            let mut x = alloc::vec![0.0; d];
            for r in s.positions() {
                x.iter_mut()
                    .zip(out.embeddings.row(r))
                    .for_each(|(a, b)| *a += b / s.len() as f64);
            }
            css_similarity(&x, y, v, w, u).unwrap()
        })
        .collect();
    let want = softmax(&sims);
    assert!(close(
        got,
        ProbPair {
            p1: want[0],
            p2: want[1]
        },
        1e-12
    ));
}

#[test]
fn mas_matches_recomputation() {
    let (vocab, model, mut store) = setup(Objective::Mas);
    randomize_head(&mut store, 4);
    let ex = prepare_example(Objective::Mas, &council(), &vocab).unwrap();
    let got = model.predict_pair(&store, &ex).unwrap();
    let (Head::Mas(head), Example::Masked(m)) = (model.head(), &ex) else {
        unreachable!()
    };
    let out = model.encoder().encode(&store, &m.ids).unwrap();
    let [l, h, t, _] = out.attentions.shape() else {
        unreachable!()
    };
    let (l, h, t) = (*l, *h, *t);
    let att = out.attentions.data();
    let a: Vec<Vec<f64>> = m
        .spans
        .iter()
        .map(|s| {
            let s = s.unwrap();
            (0..l * h)
                .map(|lh| {
                    s.positions()
                        .map(|j| att[(lh * t + m.mask_position) * t + j])
                        .sum::<f64>()
                        / s.len() as f64
                })
                .collect()
        })
        .collect();
    let (m1, m2) = max_mask(&a[0], &a[1]).unwrap();
    let mut feats: Vec<f64> = a[0].iter().zip(&m1).map(|(x, k)| x * k).collect();
    feats.extend(a[1].iter().zip(&m2).map(|(x, k)| x * k));
    let mut z = head.hidden1.apply(&store, &feats);
    tanh_row(&mut z);
    let mut z = head.hidden2.apply(&store, &z);
    tanh_row(&mut z);
    let logits = head.output.apply(&store, &z);
    let want = softmax(&logits);
    assert_eq!(head.input_dim(&store), 2 * l * h);
    assert!(close(
        got,
        ProbPair {
            p1: want[0],
            p2: want[1]
        },
        1e-12
    ));
}

#[test]
fn identical_spans_give_even_odds_under_zero_output() {
    for o in [Objective::Css, Objective::Mas] {
        let (vocab, model, store) = setup(o);
        let Example::Masked(mut m) = prepare_example(o, &council(), &vocab).unwrap() else {
            unreachable!()
        };
        m.spans[1] = m.spans[0];
        let p = model.predict_pair(&store, &Example::Masked(m)).unwrap();
        assert_eq!((p.p1, p.p2), (0.5, 0.5));
    }
}

#[test]
fn css_identical_spans_tie_for_any_head() {
    let (vocab, model, mut store) = setup(Objective::Css);
    randomize_head(&mut store, 5);
    let Example::Masked(mut m) = prepare_example(Objective::Css, &council(), &vocab).unwrap()
    else {
        unreachable!()
    };
    m.spans[1] = m.spans[0];
    let p = model.predict_pair(&store, &Example::Masked(m)).unwrap();
    assert_eq!(p.p1, p.p2);
}

#[test]
fn candidate_swap_swaps_output() {
    for o in [Objective::Bwp, Objective::Css] {
        let (vocab, model, mut store) = setup(o);
        randomize_head(&mut store, 6);
        let a = prepare_example(o, &council(), &vocab).unwrap();
        let b = prepare_example(o, &council().swapped(), &vocab).unwrap();
        let pa = model.predict_pair(&store, &a).unwrap();
        let pb = model.predict_pair(&store, &b).unwrap();
        assert_eq!(pa.swapped(), pb, "{o}");
    }
}

#[test]
fn softmax_preserves_argmax() {
    let mut rng = ModelRng::seed_from_u64(7);
    for _ in 0..1000 {
        let (a, b): (f64, f64) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let want = usize::from(b > a);
        assert_eq!(predict(ProbPair::from_logits(a, b)).index, want);
    }
}

#[test]
fn max_mask_random_properties() {
    let mut rng = ModelRng::seed_from_u64(8);
    for _ in 0..1000 {
        let a1: Vec<f64> = (0..8)
            .map(|_| f64::from(rng.random_range(0u8..4)) / 4.0)
            .collect();
        let a2: Vec<f64> = (0..8)
            .map(|_| f64::from(rng.random_range(0u8..4)) / 4.0)
            .collect();
        let (m1, m2) = max_mask(&a1, &a2).unwrap();
        for j in 0..8 {
            assert!(m1[j] + m2[j] >= 1.0);
            assert_eq!(m1[j] + m2[j] == 2.0, a1[j] == a2[j]);
        }
    }
}

#[test]
fn span_objectives_require_located_candidates() {
    let vocab = build_vocab(&[COUNCIL], 1).unwrap();
    let inst =
        SchemaInstance::new("x", COUNCIL, "the mayor", "the demonstrators", Some(1)).unwrap();
    for o in [Objective::Css, Objective::Mas] {
        assert!(matches!(
            prepare_example(o, &inst, &vocab),
            Err(crate::Error::CandidateNotFound { .. })
        ));
    }
    assert!(prepare_example(Objective::Bwp, &inst, &vocab).is_ok());
}

#[test]
fn mismatched_example_is_rejected() {
    let (vocab, model, store) = setup(Objective::Css);
    let ex = prepare_example(Objective::WgSr, &council(), &vocab).unwrap();
    assert!(model.predict_pair(&store, &ex).is_err());
}

#[test]
fn heads_pass_gradient_check() {
    for o in Objective::ALL {
        let vocab =
            build_vocab(&["a b c x y", "the a saw the b because <mask> was c ."], 1).unwrap();
        let inst =
            SchemaInstance::new("g", "a saw b because _ was c .", "a", "b", Some(2)).unwrap();
        let cfg = EncoderConfig {
            num_layers: 1,
            hidden: 8,
            ffn: 8,
            dropout: 0.0,
            ..EncoderConfig::toy(vocab.len())
        };
        let mut store = ParamStore::new();
        let mut rng = ModelRng::seed_from_u64(9);
        let model = Model::new(o, cfg, &mut store, &mut rng).unwrap();
        let mut rng = ModelRng::seed_from_u64(10);
        for p in store.params_mut() {
            let shape = p.value.shape().to_vec();
            p.value = init::normal(&mut rng, &shape, 0.3);
        }
        let ex = prepare_example(o, &inst, &vocab).unwrap();
        let mut g = Graph::new(&store);
        let loss = model.loss(&mut g, &ex, &mut Mode::Eval).unwrap();
        let report = graph_grad_check(&mut g, loss, 1e-5).unwrap();
        assert!(report.passes(1e-4), "{o}: {report:?}");
    }
}
