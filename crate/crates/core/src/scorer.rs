//! The full model: parameters, per-story preparation, per-question scoring
//! with pooling and the linear combiner, the negation heuristic and the
//! ranking loss.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use serde::Serialize;

use crate::config::Config;
use crate::corpus::{QuestionRecord, Story, TokenSeq};
use crate::depgraph::{check_alignment, linearize, DependencyGraph};
use crate::error::{Error, Result};
use crate::evidence::{build_ngrams, build_top_n, sentence_spans, Level, UnitSet};
use crate::lexicon::{lookup, EmbeddingTable, QuestionStopwords, WordWeightTable};
use crate::numerics::{Graph, GraphConfig, NodeId, ParamId, ParamStore, Tensor};
use crate::perspectives::{
    alpha_nodes, combine_alphas, gaussian_profile, match_words, semantic_embed, semantic_match,
    transform_words, window_match_from_sides, window_side_scores, CombineAlphas, DropoutCtx, SemanticParams,
    SimilarityMatrix, WbwParams, WindowProfile, WordWeights,
};

/// Length of the pooled perspective score vector.
pub const POOLED_LEN: usize = 10;

/// Pooled scores for one hypothesis. Missing levels hold 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PerspectiveScoreVector {
    pub sem_by_level: [f64; 4],
    pub word_by_level: [f64; 4],
    pub sws: f64,
    pub swd: f64,
}

impl PerspectiveScoreVector {
    pub fn to_array(&self) -> [f64; POOLED_LEN] {
        let mut a = [0.0; POOLED_LEN];
        a[..4].copy_from_slice(&self.sem_by_level);
        a[4..8].copy_from_slice(&self.word_by_level);
        a[8] = self.sws;
        a[9] = self.swd;
        a
    }

    pub fn from_array(a: [f64; POOLED_LEN]) -> Self {
        PerspectiveScoreVector {
            sem_by_level: [a[0], a[1], a[2], a[3]],
            word_by_level: [a[4], a[5], a[6], a[7]],
            sws: a[8],
            swd: a[9],
        }
    }
}

/// Max within a level; 0 for an empty level.
pub fn pool(level_scores: &[f64]) -> f64 {
    level_scores.iter().copied().reduce(f64::max).unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombinerParams {
    /// `1 × POOLED_LEN` matrix.
    pub weights: ParamId,
    pub bias: ParamId,
}

/// `w · v + b`.
pub fn combine(v: &PerspectiveScoreVector, weights: &[f64], bias: f64) -> f64 {
    let mut acc = 0.0;
    for (w, x) in weights.iter().zip(v.to_array()) {
        acc += w * x;
    }
    acc + bias
}

/// Negates all candidate scores for negation questions.
pub fn apply_negation(scores: [f64; 4], negated: bool) -> [f64; 4] {
    if negated {
        scores.map(|s| -s)
    } else {
        scores
    }
}

/// `max(0, max_{i≠gold} M_i − M_gold + μ)`.
pub fn ranking_loss(scores: &[f64; 4], gold: usize, margin: f64) -> f64 {
    let wrong = (0..4).filter(|&i| i != gold).map(|i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
    (wrong - scores[gold] + margin).max(0.0)
}

/// First index of the maximum.
pub fn argmax4(scores: &[f64; 4]) -> usize {
    let mut best = 0;
    for i in 1..4 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelParams {
    pub omega_sem: ParamId,
    pub omega_wbw: ParamId,
    pub semantic: SemanticParams,
    pub wbw: WbwParams,
    pub sentential: CombineAlphas,
    pub sws: (WindowProfile, CombineAlphas),
    pub swd: (WindowProfile, CombineAlphas),
    pub combiner: CombinerParams,
}

/// A story with looked-up vectors, units and both stream views, ready to be
/// scored repeatedly.
///
/// "Columns" index the passage tokens that have embeddings, in passage
/// order.
#[derive(Debug, Clone)]
pub struct PreparedStory {
    pub id: String,
    pub spans: Vec<Range<usize>>,
    pub kept_positions: Vec<usize>,
    pub vectors: Vec<Vec<f64>>,
    pub word_index: Vec<usize>,
    /// Word-by-word text transform, cached when those networks are frozen.
    pub transformed: Option<Vec<Vec<f64>>>,
    pub units: UnitSet,
    /// Columns of each unit, per level (top-N is built per hypothesis).
    pub unit_cols: [Vec<Vec<usize>>; 3],
    /// Columns of each sentence.
    pub sentence_cols: Vec<Vec<usize>>,
    pub sequential: Vec<usize>,
    pub dependency: Vec<usize>,
    /// Sentences without a parse, kept in sequential order.
    pub fallback_sentences: Vec<usize>,
}

/// Forward pass for one question.
pub struct QuestionForward {
    pub graph: Graph,
    pub scores: [NodeId; 4],
    pub pooled: [PerspectiveScoreVector; 4],
}

impl QuestionForward {
    pub fn values(&self) -> [f64; 4] {
        self.scores.map(|n| self.graph.scalar(n))
    }

    /// Negation-adjusted ranking loss node.
    pub fn loss(&mut self, gold: usize, negated: bool, margin: f64) -> Result<NodeId> {
        if gold > 3 {
            return Err(Error::InvalidArgument(format!("gold index {gold} outside 0-3")));
        }
        let g = &mut self.graph;
        let s = if negated {
            let mut out = self.scores;
            for o in &mut out {
                *o = g.scale(*o, -1.0)?;
            }
            out
        } else {
            self.scores
        };
        let wrong: Vec<NodeId> = (0..4).filter(|&i| i != gold).map(|i| s[i]).collect();
        let best_wrong = g.max(&wrong)?;
        let diff = g.sub(best_wrong, s[gold])?;
        let shifted = g.add_const(diff, margin)?;
        g.hinge(shifted)
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: Config,
    pub store: ParamStore,
    pub params: ModelParams,
    pub weights: WordWeightTable,
    pub stopwords: QuestionStopwords,
}

fn add_param(store: &mut ParamStore, name: &str, t: Tensor) -> ParamId {
    store.add(name, t)
}

impl Model {
    /// Builds a model with training-wheels initialization.
    pub fn new(config: Config, weights: WordWeightTable, stopwords: QuestionStopwords) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let n_words = weights.values().len();
        let mut store = ParamStore::new();
        let mat = || Tensor::zeros(&[d, d]);
        let vec_d = || Tensor::zeros(&[d]);
        let omega_sem = add_param(&mut store, "omega", Tensor::zeros(&[n_words]));
        let omega_wbw = if config.split_word_weights {
            add_param(&mut store, "omega_wbw", Tensor::zeros(&[n_words]))
        } else {
            omega_sem
        };
        let semantic = SemanticParams {
            a_t: add_param(&mut store, "sem.a_t", mat()),
            b_t: add_param(&mut store, "sem.b_t", vec_d()),
            a_h: add_param(&mut store, "sem.a_h", mat()),
            b_h: add_param(&mut store, "sem.b_h", vec_d()),
        };
        let wbw = WbwParams {
            b_t: add_param(&mut store, "wbw.b_t", mat()),
            b_q: add_param(&mut store, "wbw.b_q", mat()),
            b_a: add_param(&mut store, "wbw.b_a", mat()),
            bias_t: add_param(&mut store, "wbw.bias_t", vec_d()),
            bias_q: add_param(&mut store, "wbw.bias_q", vec_d()),
            bias_a: add_param(&mut store, "wbw.bias_a", vec_d()),
        };
        let width = 2 * config.window_radius + 1;
        let sentential = CombineAlphas {
            alpha: add_param(&mut store, "alpha.sentential", Tensor::zeros(&[3])),
        };
        let sws = (
            WindowProfile {
                radius: config.window_radius,
                lambda: add_param(&mut store, "lambda.sws", Tensor::zeros(&[width])),
            },
            CombineAlphas {
                alpha: add_param(&mut store, "alpha.sws", Tensor::zeros(&[3])),
            },
        );
        let swd = if config.share_window_params {
            sws
        } else {
            (
                WindowProfile {
                    radius: config.window_radius,
                    lambda: add_param(&mut store, "lambda.swd", Tensor::zeros(&[width])),
                },
                CombineAlphas {
                    alpha: add_param(&mut store, "alpha.swd", Tensor::zeros(&[3])),
                },
            )
        };
        let combiner = CombinerParams {
            weights: add_param(&mut store, "combiner.w", Tensor::zeros(&[1, POOLED_LEN])),
            bias: add_param(&mut store, "combiner.b", Tensor::zeros(&[1])),
        };
        let mut model = Model {
            config,
            store,
            params: ModelParams {
                omega_sem,
                omega_wbw,
                semantic,
                wbw,
                sentential,
                sws,
                swd,
                combiner,
            },
            weights,
            stopwords,
        };
        model.training_wheels_init()?;
        Ok(model)
    }

    /// Resets every parameter to the heuristic-equivalent starting point:
    /// identity matrices, zero biases, unit α, Gaussian λ, IDF word weights
    /// and an all-ones combiner. Also applies the freeze settings.
    pub fn training_wheels_init(&mut self) -> Result<()> {
        let d = self.config.dim;
        let p = self.params;
        for m in [p.semantic.a_t, p.semantic.a_h, p.wbw.b_t, p.wbw.b_q, p.wbw.b_a] {
            let shape = self.store.get(m).value.shape().to_vec();
            if shape != [d, d] {
                return Err(Error::Shape {
                    op: "training_wheels_init",
                    detail: format!("{} is {shape:?}; identity initialization needs square {d}x{d}", self.store.get(m).name),
                });
            }
            self.store.get_mut(m).value = Tensor::identity(d);
        }
        for b in [p.semantic.b_t, p.semantic.b_h, p.wbw.bias_t, p.wbw.bias_q, p.wbw.bias_a, p.combiner.bias] {
            self.store.get_mut(b).value.fill(0.0);
        }
        for a in [p.sentential.alpha, p.sws.1.alpha, p.swd.1.alpha] {
            self.store.get_mut(a).value.fill(1.0);
        }
        let profile = gaussian_profile(self.config.window_radius, self.config.window_sigma);
        for l in [p.sws.0.lambda, p.swd.0.lambda] {
            self.store.get_mut(l).value.data_mut().copy_from_slice(&profile);
        }
        self.store.get_mut(p.combiner.weights).value.fill(1.0);
        let uniform = self.config.ablation.uniform_word_weights;
        for o in [p.omega_sem, p.omega_wbw] {
            let v = self.store.get_mut(o).value.data_mut();
            if uniform {
                v.iter_mut().for_each(|x| *x = 1.0);
            } else {
                v.copy_from_slice(self.weights.values());
            }
        }
        for param in self.store.iter_mut() {
            param.reset_moments();
            param.frozen = false;
        }
        if uniform {
            self.store.set_frozen(p.omega_sem, true);
            self.store.set_frozen(p.omega_wbw, true);
        }
        if self.config.freeze_wbw {
            for id in [p.wbw.b_t, p.wbw.b_q, p.wbw.b_a, p.wbw.bias_t, p.wbw.bias_q, p.wbw.bias_a] {
                self.store.set_frozen(id, true);
            }
        }
        Ok(())
    }

    fn graph_config(&self) -> GraphConfig {
        GraphConfig {
            leaky_slope: self.config.leaky_slope,
            eps_norm: self.config.eps_norm,
            ..GraphConfig::default()
        }
    }

    /// Looks up vectors, builds units and the sequential and dependency
    /// streams. Sentences missing from `parses` fall back to sequential order;
    /// a parse whose tokens disagree with the sentence is an error.
    pub fn prepare(
        &self,
        story: &Story,
        emb: &EmbeddingTable,
        parses: Option<&BTreeMap<String, DependencyGraph>>,
    ) -> Result<PreparedStory> {
        let spans = sentence_spans(story);
        let all: Vec<String> = story.sentences.iter().flat_map(|s| s.tokens().iter().cloned()).collect();
        let all = TokenSeq::new(all);
        let (vecs, kept_positions) = lookup(&all, emb);
        let vectors: Vec<Vec<f64>> = vecs.into_iter().map(<[f64]>::to_vec).collect();
        let mut col_of = vec![None; all.len()];
        for (c, &p) in kept_positions.iter().enumerate() {
            col_of[p] = Some(c);
        }
        let word_index = kept_positions
            .iter()
            .map(|&p| self.weights.vocab().index_of(&all.tokens()[p]))
            .collect();
        let to_cols = |positions: &[usize]| -> Vec<usize> { positions.iter().filter_map(|&p| col_of[p]).collect() };

        let max_n = if self.config.ablation.no_ngram { 1 } else { self.config.max_n };
        let units = build_ngrams(&spans, max_n);
        let unit_cols = [Level::Unigram, Level::Bigram, Level::Trigram]
            .map(|l| units.level(l).iter().map(|u| to_cols(&u.positions)).collect::<Vec<_>>());
        let sentence_cols: Vec<Vec<usize>> =
            spans.iter().map(|r| to_cols(&r.clone().collect::<Vec<_>>())).collect();
        let sequential: Vec<usize> = (0..kept_positions.len()).collect();

        let mut dependency = Vec::with_capacity(sequential.len());
        let mut fallback_sentences = Vec::new();
        for (j, span) in spans.iter().enumerate() {
            let sid = story.sentence_id(j);
            match parses.and_then(|m| m.get(&sid)) {
                Some(graph) => {
                    check_alignment(graph, &story.sentences[j])?;
                    let order = linearize(graph)?;
                    dependency.extend(order.ordering.iter().filter_map(|&i| col_of[span.start + i]));
                }
                None => {
                    fallback_sentences.push(j);
                    dependency.extend(sentence_cols[j].iter().copied());
                }
            }
        }
        if !fallback_sentences.is_empty() && parses.is_some() {
            log::debug!("{}: {} sentences without a parse use sequential order", story.id, fallback_sentences.len());
        }

        let mut prepared = PreparedStory {
            id: story.id.clone(),
            spans,
            kept_positions,
            vectors,
            word_index,
            transformed: None,
            units,
            unit_cols,
            sentence_cols,
            sequential,
            dependency,
            fallback_sentences,
        };
        if self.config.freeze_wbw {
            prepared.transformed = Some(self.transform_text(&prepared.vectors)?);
        }
        Ok(prepared)
    }

    fn transform_text(&self, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new(self.graph_config());
        let w = self.params.wbw;
        vectors
            .iter()
            .map(|v| {
                let x = g.constant(v.clone())?;
                let lin = g.affine(&self.store, w.b_t, w.bias_t, x)?;
                let out = g.leaky_relu(lin)?;
                Ok(g.value(out).to_vec())
            })
            .collect()
    }

    /// Scores the four candidates of `q` against a prepared story.
    pub fn score_question(
        &self,
        ps: &PreparedStory,
        q: &QuestionRecord,
        emb: &EmbeddingTable,
        dropout: &mut DropoutCtx<'_>,
    ) -> Result<QuestionForward> {
        let cfg = &self.config;
        let abl = cfg.ablation;
        let p = self.params;
        let store = &self.store;
        let mut g = Graph::new(self.graph_config());
        let vocab = self.weights.vocab();
        let wbw_trainable = !cfg.freeze_wbw;

        let mut omega_cache: HashMap<(ParamId, usize), NodeId> = HashMap::new();
        let mut omega = |g: &mut Graph, table: ParamId, idx: usize| -> Result<NodeId> {
            if let Some(&n) = omega_cache.get(&(table, idx)) {
                return Ok(n);
            }
            let n = g.param_elem(store, table, idx)?;
            omega_cache.insert((table, idx), n);
            Ok(n)
        };

        // passage
        let text = ps
            .vectors
            .iter()
            .map(|v| g.constant(v.clone()))
            .collect::<Result<Vec<_>>>()?;
        let text_sem_w = ps
            .word_index
            .iter()
            .map(|&i| omega(&mut g, p.omega_sem, i))
            .collect::<Result<Vec<_>>>()?;
        let text_t = match &ps.transformed {
            Some(cached) => cached.iter().map(|v| g.constant(v.clone())).collect::<Result<Vec<_>>>()?,
            None => {
                let t = transform_words(&mut g, store, &text, p.wbw.b_t, p.wbw.bias_t)?;
                maybe_dropout(&mut g, t, wbw_trainable, dropout)?
            }
        };

        // question
        let filtered = self.stopwords.filter_question(&q.text);
        let (qv, qk) = lookup(&filtered, emb);
        let q_tokens: Vec<&str> = qk.iter().map(|&i| filtered.tokens()[i].as_str()).collect();
        let q_nodes = qv.iter().map(|v| g.constant(v.to_vec())).collect::<Result<Vec<_>>>()?;
        let q_wbw_w = q_tokens
            .iter()
            .map(|t| omega(&mut g, p.omega_wbw, vocab.index_of(t)))
            .collect::<Result<Vec<_>>>()?;
        let q_sem_w = q_tokens
            .iter()
            .map(|t| omega(&mut g, p.omega_sem, vocab.index_of(t)))
            .collect::<Result<Vec<_>>>()?;
        let q_t = transform_words(&mut g, store, &q_nodes, p.wbw.b_q, p.wbw.bias_q)?;
        let q_t = maybe_dropout(&mut g, q_t, wbw_trainable, dropout)?;
        let cos_q = SimilarityMatrix::build(&mut g, &text_t, &q_t)?;
        let q_weights = WordWeights::Nodes(&q_wbw_w);

        // hypothesis-independent pieces
        let mut s_t: [Vec<Option<NodeId>>; 3] = Default::default();
        let mut m_q_units: [Vec<NodeId>; 3] = Default::default();
        for (li, units) in ps.unit_cols.iter().enumerate() {
            for cols in units {
                let vecs: Vec<NodeId> = cols.iter().map(|&c| text[c]).collect();
                let ws: Vec<NodeId> = cols.iter().map(|&c| text_sem_w[c]).collect();
                s_t[li].push(semantic_embed(&mut g, store, &vecs, &ws, p.semantic.a_t, p.semantic.b_t, dropout)?);
                if !abl.no_sentential {
                    m_q_units[li].push(match_words(&mut g, &cos_q, cols, None, q_weights)?);
                }
            }
        }
        let alphas_sent = alpha_nodes(&mut g, store, p.sentential)?;
        let lambda_nodes = |g: &mut Graph, w: WindowProfile| -> Result<Vec<NodeId>> {
            (0..2 * w.radius + 1).map(|i| g.param_elem(store, w.lambda, i)).collect()
        };
        let sws_side = if abl.no_sws {
            None
        } else {
            let lam = lambda_nodes(&mut g, p.sws.0)?;
            let al = alpha_nodes(&mut g, store, p.sws.1)?;
            let side = window_side_scores(&mut g, &ps.sequential, &cos_q, &lam, q_weights)?;
            Some((lam, al, side))
        };
        let swd_side = if abl.no_swd {
            None
        } else {
            let lam = lambda_nodes(&mut g, p.swd.0)?;
            let al = alpha_nodes(&mut g, store, p.swd.1)?;
            let side = window_side_scores(&mut g, &ps.dependency, &cos_q, &lam, q_weights)?;
            Some((lam, al, side))
        };

        let mut scores = Vec::with_capacity(4);
        let mut pooled = [PerspectiveScoreVector::default(); 4];
        for (ci, cand) in q.candidates.iter().enumerate() {
            let (av, ak) = lookup(cand, emb);
            let a_tokens: Vec<&str> = ak.iter().map(|&i| cand.tokens()[i].as_str()).collect();
            let a_nodes = av.iter().map(|v| g.constant(v.to_vec())).collect::<Result<Vec<_>>>()?;
            let a_t = transform_words(&mut g, store, &a_nodes, p.wbw.b_a, p.wbw.bias_a)?;
            let a_t = maybe_dropout(&mut g, a_t, wbw_trainable, dropout)?;
            let cos_a = SimilarityMatrix::build(&mut g, &text_t, &a_t)?;
            let a_wbw_w = a_tokens
                .iter()
                .map(|t| omega(&mut g, p.omega_wbw, vocab.index_of(t)))
                .collect::<Result<Vec<_>>>()?;
            let a_weights = if cfg.weight_answer_words {
                WordWeights::Nodes(&a_wbw_w)
            } else {
                WordWeights::Uniform
            };

            let mut h_vecs = q_nodes.clone();
            h_vecs.extend(&a_nodes);
            let mut h_w = q_sem_w.clone();
            for t in &a_tokens {
                h_w.push(omega(&mut g, p.omega_sem, vocab.index_of(t))?);
            }
            let s_h = semantic_embed(&mut g, store, &h_vecs, &h_w, p.semantic.a_h, p.semantic.b_h, dropout)?;

            let mut level_nodes: [Vec<NodeId>; 8] = Default::default();
            for li in 0..3 {
                for (ui, cols) in ps.unit_cols[li].iter().enumerate() {
                    level_nodes[li].push(semantic_match(&mut g, s_t[li][ui], s_h)?);
                    if !abl.no_sentential {
                        let m_a = match_words(&mut g, &cos_a, cols, None, a_weights)?;
                        level_nodes[4 + li].push(combine_alphas(&mut g, alphas_sent, m_q_units[li][ui], m_a)?);
                    }
                }
            }

            if !abl.no_top_n {
                let per_sentence: Vec<f64> = (0..ps.spans.len())
                    .map(|j| {
                        let sem = g.scalar(level_nodes[0][j]);
                        let word = level_nodes[4].get(j).map_or(0.0, |&n| g.scalar(n));
                        sem + word
                    })
                    .collect();
                if let Some(unit) = build_top_n(&per_sentence, &ps.spans, cfg.top_n) {
                    let cols: Vec<usize> = unit.sentences.iter().flat_map(|&j| ps.sentence_cols[j].iter().copied()).collect();
                    let vecs: Vec<NodeId> = cols.iter().map(|&c| text[c]).collect();
                    let ws: Vec<NodeId> = cols.iter().map(|&c| text_sem_w[c]).collect();
                    let st = semantic_embed(&mut g, store, &vecs, &ws, p.semantic.a_t, p.semantic.b_t, dropout)?;
                    level_nodes[3].push(semantic_match(&mut g, st, s_h)?);
                    if !abl.no_sentential {
                        let m_q = match_words(&mut g, &cos_q, &cols, None, q_weights)?;
                        let m_a = match_words(&mut g, &cos_a, &cols, None, a_weights)?;
                        level_nodes[7].push(combine_alphas(&mut g, alphas_sent, m_q, m_a)?);
                    }
                }
            }

            let mut entries = Vec::with_capacity(POOLED_LEN);
            for nodes in &level_nodes {
                entries.push(if nodes.is_empty() { g.constant_scalar(0.0)? } else { g.max(nodes)? });
            }
            for side in [&sws_side, &swd_side] {
                let stream = if std::ptr::eq(side, &sws_side) { &ps.sequential } else { &ps.dependency };
                entries.push(match side {
                    Some((lam, al, q_side)) => {
                        window_match_from_sides(&mut g, stream, q_side, &cos_a, a_weights, lam, *al)?
                    }
                    None => g.constant_scalar(0.0)?,
                });
            }
            let mut arr = [0.0; POOLED_LEN];
            for (a, &e) in arr.iter_mut().zip(&entries) {
                *a = g.scalar(e);
            }
            pooled[ci] = PerspectiveScoreVector::from_array(arr);
            let v = g.stack(&entries)?;
            let m = g.affine(store, p.combiner.weights, p.combiner.bias, v)?;
            scores.push(m);
        }
        Ok(QuestionForward {
            graph: g,
            scores: [scores[0], scores[1], scores[2], scores[3]],
            pooled,
        })
    }

    /// Scores without dropout and returns negation-adjusted values.
    pub fn predict(&self, ps: &PreparedStory, q: &QuestionRecord, emb: &EmbeddingTable) -> Result<[f64; 4]> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut dropout = DropoutCtx {
            p: 0.0,
            training: false,
            rng: &mut rng,
        };
        let fwd = self.score_question(ps, q, emb, &mut dropout)?;
        Ok(apply_negation(fwd.values(), q.negated))
    }

    /// Values of every parameter by name, for comparisons and checkpoints.
    pub fn named_values(&self) -> Vec<(String, &Tensor)> {
        self.store.iter().map(|(_, p)| (p.name.clone(), &p.value)).collect()
    }
}

fn maybe_dropout(g: &mut Graph, nodes: Vec<NodeId>, apply: bool, dropout: &mut DropoutCtx<'_>) -> Result<Vec<NodeId>> {
    if !apply {
        return Ok(nodes);
    }
    nodes.into_iter().map(|n| dropout.apply(g, n)).collect()
}
