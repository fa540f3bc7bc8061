//! The trainable matching functions: semantic, sentential word-by-word, and
//! the sliding window used for both the sequential and dependency views.

use rand::RngCore;

use crate::error::Result;
use crate::numerics::{Graph, NodeId, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SemanticParams {
    pub a_t: ParamId,
    pub b_t: ParamId,
    pub a_h: ParamId,
    pub b_h: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WbwParams {
    pub b_t: ParamId,
    pub b_q: ParamId,
    pub b_a: ParamId,
    pub bias_t: ParamId,
    pub bias_q: ParamId,
    pub bias_a: ParamId,
}

/// Location weights λ for offsets `-radius..=radius`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowProfile {
    pub radius: usize,
    pub lambda: ParamId,
}

/// Length-3 parameter holding (α₁, α₂, α₃).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombineAlphas {
    pub alpha: ParamId,
}

/// `exp(-offset² / 2σ²)` for offsets `-radius..=radius`.
pub fn gaussian_profile(radius: usize, sigma: f64) -> Vec<f64> {
    let r = radius as isize;
    (-r..=r)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Dropout settings for one forward pass.
pub struct DropoutCtx<'a> {
    pub p: f64,
    pub training: bool,
    pub rng: &'a mut dyn RngCore,
}

impl DropoutCtx<'_> {
    pub fn apply(&mut self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        g.dropout(x, self.p, self.training, &mut *self.rng)
    }
}

/// `f(A Σ_k ω_k t_k + b)` followed by dropout. `None` for an empty unit.
pub fn semantic_embed(
    g: &mut Graph,
    store: &ParamStore,
    vectors: &[NodeId],
    weights: &[NodeId],
    matrix: ParamId,
    bias: ParamId,
    dropout: &mut DropoutCtx<'_>,
) -> Result<Option<NodeId>> {
    if vectors.is_empty() {
        return Ok(None);
    }
    let sum = g.weighted_sum(vectors, weights)?;
    let lin = g.affine(store, matrix, bias, sum)?;
    let act = g.leaky_relu(lin)?;
    dropout.apply(g, act).map(Some)
}

/// Cosine between text and hypothesis embeddings; 0 when either is empty.
pub fn semantic_match(g: &mut Graph, s_t: Option<NodeId>, s_h: Option<NodeId>) -> Result<NodeId> {
    match (s_t, s_h) {
        (Some(t), Some(h)) => g.cosine(t, h),
        _ => g.constant_scalar(0.0),
    }
}

/// `f(B x + b)` for each word vector.
pub fn transform_words(
    g: &mut Graph,
    store: &ParamStore,
    vectors: &[NodeId],
    matrix: ParamId,
    bias: ParamId,
) -> Result<Vec<NodeId>> {
    vectors
        .iter()
        .map(|&v| {
            let lin = g.affine(store, matrix, bias, v)?;
            g.leaky_relu(lin)
        })
        .collect()
}

/// Cosines between text words and one side of the hypothesis:
/// `rows[i][k] = cos(t̃_k, w̃_i)` for hypothesis word `i` and text word `k`.
#[derive(Debug, Clone, Default)]
pub struct SimilarityMatrix {
    pub rows: Vec<Vec<NodeId>>,
}

impl SimilarityMatrix {
    pub fn build(g: &mut Graph, text: &[NodeId], words: &[NodeId]) -> Result<Self> {
        let rows = words
            .iter()
            .map(|&w| text.iter().map(|&t| g.cosine(t, w)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(SimilarityMatrix { rows })
    }

    pub fn words(&self) -> usize {
        self.rows.len()
    }
}

/// Per-word weights for the mean over hypothesis words: trainable ω nodes, or
/// uniform.
#[derive(Debug, Clone, Copy)]
pub enum WordWeights<'a> {
    Nodes(&'a [NodeId]),
    Uniform,
}

/// `(1/Z) Σ_i ω_i max_{k ∈ cols} sim[i][k]` over hypothesis words, with
/// `scales[j]` multiplying column `cols[j]` when given.
/// Returns 0 for no words or an empty column set.
pub fn match_words(
    g: &mut Graph,
    sims: &SimilarityMatrix,
    cols: &[usize],
    scales: Option<&[NodeId]>,
    weights: WordWeights<'_>,
) -> Result<NodeId> {
    if sims.words() == 0 || cols.is_empty() {
        return g.constant_scalar(0.0);
    }
    let mut best = Vec::with_capacity(sims.words());
    for row in &sims.rows {
        let vals: Vec<NodeId> = cols.iter().map(|&k| row[k]).collect();
        let m = match scales {
            Some(s) => g.scaled_max(&vals, s)?,
            None => g.max(&vals)?,
        };
        best.push(m);
    }
    match weights {
        WordWeights::Nodes(w) => g.weighted_mean(&best, w),
        WordWeights::Uniform => g.mean(&best),
    }
}

/// `α₁ M_q + α₂ M_a + α₃ M_q M_a`.
pub fn combine_alphas(g: &mut Graph, alphas: [NodeId; 3], m_q: NodeId, m_a: NodeId) -> Result<NodeId> {
    let t1 = g.mul(alphas[0], m_q)?;
    let t2 = g.mul(alphas[1], m_a)?;
    let qa = g.mul(m_q, m_a)?;
    let t3 = g.mul(alphas[2], qa)?;
    g.sum(&[t1, t2, t3])
}

pub fn alpha_nodes(g: &mut Graph, store: &ParamStore, alphas: CombineAlphas) -> Result<[NodeId; 3]> {
    Ok([
        g.param_elem(store, alphas.alpha, 0)?,
        g.param_elem(store, alphas.alpha, 1)?,
        g.param_elem(store, alphas.alpha, 2)?,
    ])
}

/// Sentential word-by-word match of one unit (`cols` are text-word columns).
pub fn wbw_match(
    g: &mut Graph,
    cols: &[usize],
    question: &SimilarityMatrix,
    answer: &SimilarityMatrix,
    question_weights: WordWeights<'_>,
    answer_weights: WordWeights<'_>,
    alphas: [NodeId; 3],
) -> Result<NodeId> {
    let m_q = match_words(g, question, cols, None, question_weights)?;
    let m_a = match_words(g, answer, cols, None, answer_weights)?;
    combine_alphas(g, alphas, m_q, m_a)
}

/// Question-side window scores, one per focus position of `stream`. These do
/// not depend on the answer and can be shared across a question's candidates.
pub fn window_side_scores(
    g: &mut Graph,
    stream: &[usize],
    sims: &SimilarityMatrix,
    lambda: &[NodeId],
    weights: WordWeights<'_>,
) -> Result<Vec<NodeId>> {
    let radius = lambda.len() / 2;
    (0..stream.len())
        .map(|p| {
            let lo = p.saturating_sub(radius);
            let hi = (p + radius).min(stream.len() - 1);
            let cols: Vec<usize> = (lo..=hi).map(|k| stream[k]).collect();
            let scales: Vec<NodeId> = (lo..=hi).map(|k| lambda[k + radius - p]).collect();
            match_words(g, sims, &cols, Some(&scales), weights)
        })
        .collect()
}

/// Sliding-window match over a token stream (text-word columns in view
/// order): each focus position scores the window of radius `r` around it
/// with location weights λ, and the best window wins. 0 for an empty stream.
#[allow(clippy::too_many_arguments)]
pub fn sliding_window_match(
    g: &mut Graph,
    stream: &[usize],
    question: &SimilarityMatrix,
    answer: &SimilarityMatrix,
    question_weights: WordWeights<'_>,
    answer_weights: WordWeights<'_>,
    lambda: &[NodeId],
    alphas: [NodeId; 3],
) -> Result<NodeId> {
    let q = window_side_scores(g, stream, question, lambda, question_weights)?;
    window_match_from_sides(g, stream, &q, answer, answer_weights, lambda, alphas)
}

/// Finishes a window match given precomputed question-side scores.
pub fn window_match_from_sides(
    g: &mut Graph,
    stream: &[usize],
    question_side: &[NodeId],
    answer: &SimilarityMatrix,
    answer_weights: WordWeights<'_>,
    lambda: &[NodeId],
    alphas: [NodeId; 3],
) -> Result<NodeId> {
    if stream.is_empty() {
        return g.constant_scalar(0.0);
    }
    let a = window_side_scores(g, stream, answer, lambda, answer_weights)?;
    let per_window = question_side
        .iter()
        .zip(&a)
        .map(|(&m_q, &m_a)| combine_alphas(g, alphas, m_q, m_a))
        .collect::<Result<Vec<_>>>()?;
    g.max(&per_window)
}
