#![allow(dead_code)]

use mcrank::config::Config;
use mcrank::corpus::{build_story, QuestionKind, Story};
use mcrank::lexicon::{compute_idf, init_word_weights, EmbeddingTable, QuestionStopwords};
use mcrank::numerics::{Graph, GraphConfig, NodeId, ParamStore};
use mcrank::perspectives::{gaussian_profile, DropoutCtx};
use mcrank::scorer::{Model, PreparedStory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Comparison floor per unit of function value. Central differences of `f`
/// carry rounding noise near `ulp(f) / 2h`, about `1e-10 * |f|` here, so
/// gradients below `FD_FLOOR * max(1, |f|)` are compared on that scale.
pub const FD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct FdReport {
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
    /// Coordinate, analytic and numeric gradient at the worst error.
    pub worst_at: Option<(String, f64, f64)>,
}

impl FdReport {
    pub fn merge(&mut self, o: FdReport) {
        self.checked += o.checked;
        self.skipped += o.skipped;
        if o.worst > self.worst {
            self.worst = o.worst;
            self.worst_at = o.worst_at;
        }
    }

    fn record(&mut self, at: impl FnOnce() -> String, analytic: f64, numeric: f64, f: f64) {
        self.checked += 1;
        let e = rel_error(analytic, numeric, f);
        if e > self.worst || self.worst_at.is_none() {
            self.worst = self.worst.max(e);
            self.worst_at = Some((at(), analytic, numeric));
        }
    }

    pub fn passed(&self) -> bool {
        self.worst < FD_TOLERANCE
    }
}

pub fn rel_error(a: f64, n: f64, f: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR * f.abs().max(1.0))
}

/// Forward pass producing a scalar node and the graph's decision signature.
pub type Forward<'a> = dyn Fn(&[Vec<f64>], &ParamStore) -> (f64, u64) + 'a;

/// Compares analytic gradients of a scalar function of `inputs` and of every
/// unfrozen parameter in `store` with central differences. Coordinates whose
/// perturbation changes a discrete choice are skipped.
pub fn check_gradients(
    inputs: &[Vec<f64>],
    store: &mut ParamStore,
    build: &dyn Fn(&mut Graph, &ParamStore, &[NodeId]) -> NodeId,
    graph_config: GraphConfig,
) -> FdReport {
    let eval = |xs: &[Vec<f64>], st: &ParamStore| -> (f64, u64) {
        let mut g = Graph::new(graph_config);
        let ids: Vec<NodeId> = xs.iter().map(|x| g.variable(x.clone()).unwrap()).collect();
        let out = build(&mut g, st, &ids);
        (g.scalar(out), g.decision_signature())
    };
    let mut g = Graph::new(graph_config);
    let ids: Vec<NodeId> = inputs.iter().map(|x| g.variable(x.clone()).unwrap()).collect();
    let out = build(&mut g, store, &ids);
    let base_sig = g.decision_signature();
    let base_value = g.scalar(out);
    store.zero_grads();
    let grads = g.backward(out, store).unwrap();
    let mut report = FdReport::default();
    for (k, id) in ids.iter().enumerate() {
        let analytic: Vec<f64> = grads.get(*id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[k].len()]);
        for i in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k][i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k][i] -= FD_STEP;
            let (fp, sp) = eval(&plus, store);
            let (fm, sm) = eval(&minus, store);
            if sp != base_sig || sm != base_sig {
                report.skipped += 1;
                continue;
            }
            report.record(|| format!("input {k}[{i}]"), analytic[i], (fp - fm) / (2.0 * FD_STEP), base_value);
        }
    }
    let params: Vec<_> = store.iter().filter(|(_, p)| !p.frozen).map(|(id, p)| (id, p.value.len())).collect();
    for (pid, len) in params {
        for i in 0..len {
            let analytic = store.get(pid).grad.data()[i];
            let orig = store.get(pid).value.data()[i];
            store.get_mut(pid).value.data_mut()[i] = orig + FD_STEP;
            let (fp, sp) = eval(inputs, store);
            store.get_mut(pid).value.data_mut()[i] = orig - FD_STEP;
            let (fm, sm) = eval(inputs, store);
            store.get_mut(pid).value.data_mut()[i] = orig;
            if sp != base_sig || sm != base_sig {
                report.skipped += 1;
                continue;
            }
            let name = store.get(pid).name.clone();
            report.record(|| format!("{name}[{i}]"), analytic, (fp - fm) / (2.0 * FD_STEP), base_value);
        }
    }
    report
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

/// A small random story with two sentences and one question, a matching
/// embedding table, and a model with randomized parameters.
pub struct MiniInstance {
    pub model: Model,
    pub story: Story,
    pub emb: EmbeddingTable,
}

pub fn mini_instance(seed: u64, dim: usize) -> MiniInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
    let pick = |rng: &mut ChaCha8Rng, n: usize| -> String {
        (0..n).map(|_| words[rng.gen_range(0..words.len())].clone()).collect::<Vec<_>>().join(" ")
    };
    let (n1, n2) = (rng.gen_range(3..6), rng.gen_range(3..6));
    let s1 = pick(&mut rng, n1);
    let s2 = pick(&mut rng, n2);
    let text = format!("{s1} oov. {s2}.");
    let negated = rng.gen_bool(0.3);
    let q = if negated {
        format!("which {} did not {}?", pick(&mut rng, 1), pick(&mut rng, 1))
    } else {
        format!("what {} {}?", pick(&mut rng, 1), pick(&mut rng, 2))
    };
    let cands: [String; 4] = std::array::from_fn(|_| {
        let n = rng.gen_range(1..3);
        pick(&mut rng, n)
    });
    let mut story = build_story(&format!("mini{seed}"), "", &text, vec![(QuestionKind::One, q, cands)]);
    story.questions[0].gold = Some(rng.gen_range(0..4));

    let mut entries: Vec<(String, Vec<f64>)> = (0..10).map(|i| (format!("w{i}"), gaussian_vec(&mut rng, dim))).collect();
    for w in [".", "which", "not", "?"] {
        entries.push((w.to_string(), gaussian_vec(&mut rng, dim)));
    }
    let emb = EmbeddingTable::from_entries(dim, entries).unwrap();

    let config = Config {
        dim,
        dropout: 0.0,
        margin: 10.0,
        freeze_wbw: false,
        weight_answer_words: seed % 2 == 1,
        split_word_weights: seed % 3 == 1,
        share_window_params: seed % 4 == 3,
        ..Config::default()
    };
    let overrides = ["not".to_string()].into_iter().collect();
    let weights = init_word_weights(&compute_idf(std::slice::from_ref(&story)), &overrides);
    let mut model = Model::new(config, weights, QuestionStopwords::default()).unwrap();
    randomize(&mut model, &mut rng);
    MiniInstance { model, story, emb }
}

/// Moves every parameter away from its structured starting value.
pub fn randomize(model: &mut Model, rng: &mut ChaCha8Rng) {
    let profile = gaussian_profile(model.config.window_radius, model.config.window_sigma);
    for p in model.store.iter_mut() {
        let name = p.name.clone();
        for (i, v) in p.value.data_mut().iter_mut().enumerate() {
            *v = if name.starts_with("omega") || name.starts_with("alpha") {
                rng.gen_range(0.5..1.5)
            } else if name.starts_with("lambda") {
                profile[i] * rng.gen_range(0.8..1.2)
            } else if name == "combiner.w" {
                1.0 + 0.3 * gaussian(rng)
            } else if name.ends_with(".b_t") || name.ends_with(".b_q") || name.ends_with(".b_a") || name.ends_with(".a_t") || name.ends_with(".a_h") {
                *v + 0.3 * gaussian(rng)
            } else {
                0.1 * gaussian(rng)
            };
        }
    }
}

/// Dropout-free loss of the instance's single question.
pub fn question_loss(model: &Model, ps: &PreparedStory, story: &Story, emb: &EmbeddingTable) -> (Graph, NodeId) {
    let q = &story.questions[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut dropout = DropoutCtx {
        p: 0.0,
        training: false,
        rng: &mut rng,
    };
    let mut fwd = model.score_question(ps, q, emb, &mut dropout).unwrap();
    let loss = fwd.loss(q.gold.unwrap(), q.negated, model.config.margin).unwrap();
    (fwd.graph, loss)
}

/// Central-difference check of the full per-question loss against every
/// trainable parameter of the instance's model.
pub fn check_full_loss(inst: &mut MiniInstance) -> FdReport {
    let ps = inst.model.prepare(&inst.story, &inst.emb, None).unwrap();
    let (g, loss) = question_loss(&inst.model, &ps, &inst.story, &inst.emb);
    let base_sig = g.decision_signature();
    let base_value = g.scalar(loss);
    inst.model.store.zero_grads();
    g.backward(loss, &mut inst.model.store).unwrap();
    let mut report = FdReport::default();
    let params: Vec<_> = inst
        .model
        .store
        .iter()
        .filter(|(_, p)| !p.frozen)
        .map(|(id, p)| (id, p.value.len()))
        .collect();
    let eval = |m: &Model| {
        let (g, l) = question_loss(m, &ps, &inst.story, &inst.emb);
        (g.scalar(l), g.decision_signature())
    };
    for (pid, len) in params {
        for i in 0..len {
            let analytic = inst.model.store.get(pid).grad.data()[i];
            let orig = inst.model.store.get(pid).value.data()[i];
            inst.model.store.get_mut(pid).value.data_mut()[i] = orig + FD_STEP;
            let (fp, sp) = eval(&inst.model);
            inst.model.store.get_mut(pid).value.data_mut()[i] = orig - FD_STEP;
            let (fm, sm) = eval(&inst.model);
            inst.model.store.get_mut(pid).value.data_mut()[i] = orig;
            if sp != base_sig || sm != base_sig {
                report.skipped += 1;
                continue;
            }
            let name = inst.model.store.get(pid).name.clone();
            report.record(|| format!("{name}[{i}]"), analytic, (fp - fm) / (2.0 * FD_STEP), base_value);
        }
    }
    report
}

pub type Builder = Box<dyn Fn(&mut Graph, &ParamStore, &[NodeId]) -> NodeId>;

/// Random inputs, parameters and a scalar-valued graph for one operation.
pub struct OpCase {
    pub inputs: Vec<Vec<f64>>,
    pub store: ParamStore,
    pub build: Builder,
}

fn readout(store: &mut ParamStore, rng: &mut ChaCha8Rng, n: usize) -> (mcrank::numerics::ParamId, mcrank::numerics::ParamId) {
    use mcrank::numerics::Tensor;
    let w = store.add("readout.w", Tensor::new(vec![1, n], gaussian_vec(rng, n)).unwrap());
    let b = store.add("readout.b", Tensor::new(vec![1], gaussian_vec(rng, 1)).unwrap());
    (w, b)
}

pub const OP_NAMES: [&str; 17] = [
    "affine",
    "leaky_relu",
    "cosine",
    "max",
    "scaled_max",
    "dropout",
    "weighted_sum",
    "weighted_mean",
    "mean",
    "sum",
    "add",
    "sub",
    "mul",
    "add_const",
    "scale",
    "hinge",
    "param_elem",
];

pub fn op_case(name: &str, seed: u64) -> OpCase {
    use mcrank::numerics::Tensor;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let scalars = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec<f64>> { (0..n).map(|_| vec![gaussian(rng)]).collect() };
    let (inputs, build): (Vec<Vec<f64>>, Builder) = match name {
        "affine" => {
            let w = store.add("w", Tensor::new(vec![2, 3], gaussian_vec(&mut rng, 6)).unwrap());
            let b = store.add("b", Tensor::new(vec![2], gaussian_vec(&mut rng, 2)).unwrap());
            let (rw, rb) = readout(&mut store, &mut rng, 2);
            (
                vec![gaussian_vec(&mut rng, 3)],
                Box::new(move |g, st, x| {
                    let y = g.affine(st, w, b, x[0]).unwrap();
                    g.affine(st, rw, rb, y).unwrap()
                }),
            )
        }
        "leaky_relu" => {
            let (rw, rb) = readout(&mut store, &mut rng, 4);
            (
                vec![gaussian_vec(&mut rng, 4)],
                Box::new(move |g, st, x| {
                    let y = g.leaky_relu(x[0]).unwrap();
                    g.affine(st, rw, rb, y).unwrap()
                }),
            )
        }
        "cosine" => (
            vec![gaussian_vec(&mut rng, 4), gaussian_vec(&mut rng, 4)],
            Box::new(|g, _, x| g.cosine(x[0], x[1]).unwrap()),
        ),
        "max" => (scalars(&mut rng, 4), Box::new(|g, _, x| g.max(x).unwrap())),
        "scaled_max" => (
            scalars(&mut rng, 8),
            Box::new(|g, _, x| g.scaled_max(&x[..4], &x[4..]).unwrap()),
        ),
        "dropout" => {
            let (rw, rb) = readout(&mut store, &mut rng, 5);
            (
                vec![gaussian_vec(&mut rng, 5)],
                Box::new(move |g, st, x| {
                    let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
                    let y = g.dropout(x[0], 0.5, true, &mut mask_rng).unwrap();
                    g.affine(st, rw, rb, y).unwrap()
                }),
            )
        }
        "weighted_sum" => {
            let (rw, rb) = readout(&mut store, &mut rng, 4);
            let mut inputs: Vec<Vec<f64>> = (0..3).map(|_| gaussian_vec(&mut rng, 4)).collect();
            inputs.extend(scalars(&mut rng, 3));
            (
                inputs,
                Box::new(move |g, st, x| {
                    let y = g.weighted_sum(&x[..3], &x[3..]).unwrap();
                    g.affine(st, rw, rb, y).unwrap()
                }),
            )
        }
        "weighted_mean" => {
            let mut inputs = scalars(&mut rng, 4);
            inputs.extend((0..4).map(|_| vec![rng.gen_range(0.2..2.0)]));
            (inputs, Box::new(|g, _, x| g.weighted_mean(&x[..4], &x[4..]).unwrap()))
        }
        "mean" => (scalars(&mut rng, 4), Box::new(|g, _, x| g.mean(x).unwrap())),
        "sum" => (scalars(&mut rng, 4), Box::new(|g, _, x| g.sum(x).unwrap())),
        "add" => (scalars(&mut rng, 2), Box::new(|g, _, x| g.add(x[0], x[1]).unwrap())),
        "sub" => (scalars(&mut rng, 2), Box::new(|g, _, x| g.sub(x[0], x[1]).unwrap())),
        "mul" => (scalars(&mut rng, 2), Box::new(|g, _, x| g.mul(x[0], x[1]).unwrap())),
        "add_const" => {
            let c = gaussian(&mut rng);
            (
                scalars(&mut rng, 1),
                Box::new(move |g, _, x| {
                    let y = g.add_const(x[0], c).unwrap();
                    g.mul(y, y).unwrap()
                }),
            )
        }
        "scale" => {
            let c = gaussian(&mut rng);
            let (rw, rb) = readout(&mut store, &mut rng, 3);
            (
                vec![gaussian_vec(&mut rng, 3)],
                Box::new(move |g, st, x| {
                    let y = g.scale(x[0], c).unwrap();
                    g.affine(st, rw, rb, y).unwrap()
                }),
            )
        }
        "hinge" => (scalars(&mut rng, 1), Box::new(|g, _, x| g.hinge(x[0]).unwrap())),
        "param_elem" => {
            let p = store.add("p", Tensor::new(vec![3], gaussian_vec(&mut rng, 3)).unwrap());
            let (rw, rb) = readout(&mut store, &mut rng, 3);
            (
                scalars(&mut rng, 1),
                Box::new(move |g, st, x| {
                    let e: Vec<NodeId> = (0..3).map(|i| g.param_elem(st, p, i).unwrap()).collect();
                    let prods: Vec<NodeId> = e.iter().map(|&n| g.mul(n, x[0]).unwrap()).collect();
                    let v = g.stack(&prods).unwrap();
                    g.affine(st, rw, rb, v).unwrap()
                }),
            )
        }
        other => panic!("unknown op {other}"),
    };
    OpCase { inputs, store, build }
}

pub fn check_op(name: &str, seed: u64) -> FdReport {
    let mut case = op_case(name, seed);
    check_gradients(&case.inputs, &mut case.store, &*case.build, GraphConfig::default())
}

/// 1-based head column of a uniformly relabelled random recursive tree.
pub fn random_tree_heads(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);
    let mut heads = vec![0; n];
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        heads[label[i]] = label[parent] + 1;
    }
    heads
}

/// Path `0 - 1 - … - n-1` rooted at 0.
pub fn path_heads(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Ascending eigenvalues and matching unit eigenvectors from nalgebra.
pub fn oracle_eigen(m: &mcrank::depgraph::SymMatrix) -> Vec<(f64, Vec<f64>)> {
    let dm = nalgebra::DMatrix::from_row_slice(m.n, m.n, &m.data);
    let e = nalgebra::SymmetricEigen::new(dm);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..m.n)
        .map(|k| (e.eigenvalues[k], e.eigenvectors.column(k).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

#[derive(Debug, Clone, Default)]
pub struct FiedlerCheck {
    pub residual: f64,
    pub mean_abs: f64,
    pub norm_err: f64,
    pub is_permutation: bool,
    pub oracle_value_err: f64,
    /// `1 - |<u, u_oracle>|`, when the second eigenvalue is simple.
    pub oracle_vector_err: Option<f64>,
}

pub fn fiedler_check(heads: &[usize]) -> FiedlerCheck {
    use mcrank::depgraph::{fiedler, laplacian, DependencyGraph};
    let g = DependencyGraph::from_heads("t", heads).unwrap();
    let l = laplacian(&g);
    let r = fiedler(&l).unwrap();
    let n = l.n;
    let lu = l.mul_vec(&r.vector);
    let residual = lu
        .iter()
        .zip(&r.vector)
        .map(|(a, u)| (a - r.eigenvalue * u).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut sorted = r.ordering.clone();
    sorted.sort_unstable();
    let oracle = oracle_eigen(&l);
    let gap = if n > 2 { oracle[2].0 - oracle[1].0 } else { f64::INFINITY };
    let oracle_vector_err = (gap > 1e-6).then(|| {
        let d: f64 = oracle[1].1.iter().zip(&r.vector).map(|(a, b)| a * b).sum();
        1.0 - d.abs()
    });
    FiedlerCheck {
        residual,
        mean_abs: r.vector.iter().sum::<f64>().abs(),
        norm_err: (r.vector.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs(),
        is_permutation: sorted == (0..n).collect::<Vec<_>>(),
        oracle_value_err: (r.eigenvalue - oracle[1].0).abs(),
        oracle_vector_err,
    }
}

impl FiedlerCheck {
    pub fn ok(&self) -> bool {
        self.residual < 1e-8
            && self.mean_abs < 1e-8
            && self.norm_err < 1e-10
            && self.is_permutation
            && self.oracle_value_err < 1e-9
            && self.oracle_vector_err.is_none_or(|e| e < 1e-9)
    }
}
