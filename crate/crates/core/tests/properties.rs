mod common;

use std::path::Path;

use mcrank::corpus::{build_story, parse_answers_str, parse_mctest_str, split_sentences, write_answers, write_mctest, QuestionKind};
use mcrank::numerics::{cosine_value, Adam, Graph, GraphConfig, ParamStore, Tensor};
use mcrank::scorer::{apply_negation, argmax4, combine, ranking_loss, PerspectiveScoreVector, POOLED_LEN};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    -100.0f64..100.0
}

fn pooled() -> impl Strategy<Value = PerspectiveScoreVector> {
    prop::array::uniform10(-2.0f64..2.0).prop_map(PerspectiveScoreVector::from_array)
}

proptest! {
    #[test]
    fn cosine_is_bounded(u in prop::collection::vec(finite(), 1..8), scale in 0.001f64..1000.0) {
        let v: Vec<f64> = u.iter().map(|x| x * scale).collect();
        let (c, degenerate) = cosine_value(&u, &v, 1e-12);
        prop_assert!((-1.0..=1.0).contains(&c), "{c}");
        if !degenerate {
            prop_assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_is_nonnegative_and_zero_iff_margin_met(s in prop::array::uniform4(finite()), gold in 0usize..4, mu in 0.01f64..2.0) {
        let l = ranking_loss(&s, gold, mu);
        prop_assert!(l >= 0.0);
        let best_wrong = (0..4).filter(|&i| i != gold).map(|i| s[i]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(l == 0.0, s[gold] >= mu + best_wrong);
    }

    #[test]
    fn graph_loss_matches_scalar_loss(s in prop::array::uniform4(finite()), gold in 0usize..4, negated in any::<bool>()) {
        let mut g = Graph::new(GraphConfig::default());
        let nodes = s.map(|x| g.variable(vec![x]).unwrap());
        let adjusted = apply_negation(s, negated);
        let mut fwd = mcrank::scorer::QuestionForward {
            graph: g,
            scores: nodes,
            pooled: Default::default(),
        };
        let l = fwd.loss(gold, negated, 0.5).unwrap();
        prop_assert_eq!(fwd.graph.scalar(l), ranking_loss(&adjusted, gold, 0.5));
    }

    #[test]
    fn negation_is_an_involution_that_reverses_argmax(s in prop::array::uniform4(finite())) {
        prop_assert_eq!(apply_negation(apply_negation(s, true), true), s);
        let distinct = (0..4).all(|i| (0..i).all(|j| s[i] != s[j]));
        prop_assume!(distinct);
        let argmin = (0..4).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        prop_assert_eq!(argmax4(&apply_negation(s, true)), argmin);
    }

    #[test]
    fn combine_is_affine(v1 in pooled(), v2 in pooled(), w in prop::array::uniform10(-2.0f64..2.0), b in -1.0f64..1.0) {
        let sum = PerspectiveScoreVector::from_array(std::array::from_fn(|i| v1.to_array()[i] + v2.to_array()[i]));
        let lhs = combine(&sum, &w, b);
        let rhs = combine(&v1, &w, b) + combine(&v2, &w, b) - b;
        prop_assert!((lhs - rhs).abs() < 1e-9);
        let zero = PerspectiveScoreVector::from_array([0.0; POOLED_LEN]);
        prop_assert_eq!(combine(&zero, &w, b), b);
    }

    #[test]
    fn adam_descends_a_quadratic(start in prop::collection::vec(-5.0f64..5.0, 1..6)) {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::new(vec![start.len()], start.clone()).unwrap());
        let adam = Adam::new(0.05);
        for _ in 0..2000 {
            let grad: Vec<f64> = store.value(id).iter().map(|x| 2.0 * x).collect();
            store.get_mut(id).grad.data_mut().copy_from_slice(&grad);
            adam.step(&mut store).unwrap();
        }
        for (x, x0) in store.value(id).iter().zip(&start) {
            prop_assert!(x.abs() < 2.0 * 0.05, "{x0} -> {x}");
            if x0.abs() > 1.0 {
                prop_assert!(x * x < 0.01 * x0 * x0, "{x0} -> {x}");
            }
        }
    }

    #[test]
    fn split_sentences_preserves_text(words in prop::collection::vec("[A-Za-z]{1,6}", 1..20), enders in prop::collection::vec(prop::sample::select(vec!["", "", ".", "!", "?", "?!"]), 20)) {
        let text = words.iter().zip(&enders).map(|(w, e)| format!("{w}{e}")).collect::<Vec<_>>().join(" ");
        let joined = split_sentences(&text).join(" ");
        let squash = |s: &str| s.split_whitespace().collect::<String>();
        prop_assert_eq!(squash(&joined), squash(&text));
    }

    #[test]
    fn tsv_round_trip(n in 1usize..4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let stories: Vec<_> = (0..n)
            .map(|i| {
                let qs = (0..4)
                    .map(|k| {
                        let kind = if rng.gen() { QuestionKind::One } else { QuestionKind::Multiple };
                        (kind, format!("Who saw {k}?"), std::array::from_fn(|c| format!("cand {c}")))
                    })
                    .collect();
                let mut s = build_story(&format!("mc.{i}"), "Author: x", "Line one.\nLine\ttwo.", qs);
                for q in &mut s.questions {
                    q.gold = Some(rng.gen_range(0..4));
                }
                s
            })
            .collect();
        let tsv = write_mctest(&stories);
        let mut back = parse_mctest_str(&tsv, Path::new("x.tsv")).unwrap();
        let golds = parse_answers_str(&write_answers(&stories), Path::new("x.ans")).unwrap();
        for (s, g) in back.iter_mut().zip(golds) {
            for (q, gi) in s.questions.iter_mut().zip(g) {
                q.gold = Some(gi);
            }
        }
        prop_assert_eq!(&back, &stories);
        prop_assert_eq!(write_mctest(&back), tsv);
    }
}

#[test]
fn adam_matches_reference_trajectory() {
    // x² from x = 1 with lr 0.1, computed independently in double precision.
    let expected = [0.9000000005, 0.8004122286917928, 0.7015862729460303];
    let mut store = ParamStore::new();
    let id = store.add("x", Tensor::scalar(1.0).unwrap());
    let adam = Adam::new(0.1);
    for want in expected {
        let g = 2.0 * store.value(id)[0];
        store.get_mut(id).grad.data_mut()[0] = g;
        adam.step(&mut store).unwrap();
        assert!((store.value(id)[0] - want).abs() < 1e-15, "{} vs {want}", store.value(id)[0]);
    }
}

#[test]
fn adam_skips_frozen_and_rejects_nan() {
    let mut store = ParamStore::new();
    let a = store.add("a", Tensor::scalar(1.0).unwrap());
    let b = store.add("b", Tensor::scalar(1.0).unwrap());
    store.set_frozen(b, true);
    store.get_mut(a).grad.data_mut()[0] = 1.0;
    store.get_mut(b).grad.data_mut()[0] = 1.0;
    Adam::new(0.1).step(&mut store).unwrap();
    assert!(store.value(a)[0] < 1.0);
    assert_eq!(store.value(b)[0], 1.0);
    store.get_mut(a).grad.data_mut()[0] = f64::NAN;
    let before = store.value(a)[0];
    let err = Adam::new(0.1).step(&mut store).unwrap_err();
    assert!(err.to_string().contains('a'), "{err}");
    assert_eq!(store.value(a)[0], before);
}
