//! Append-only computation graph with reverse-mode differentiation.
//!
//! Nodes hold their forward value; operations are recorded in creation order,
//! so the node sequence is already topologically sorted. Parameters live in a
//! [`ParamStore`] outside the graph and receive gradients during
//! [`Graph::backward`].

use rand::Rng;

use super::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Variable,
    Param(ParamId),
    ParamElem(ParamId, usize),
    Affine { w: ParamId, b: ParamId, x: NodeId },
    LeakyRelu { x: NodeId, slope: f64 },
    Cosine { u: NodeId, v: NodeId, degenerate: bool },
    Max { inputs: Vec<NodeId>, argmax: usize },
    ScaledMax { values: Vec<NodeId>, scales: Vec<NodeId>, argmax: usize },
    Dropout { x: NodeId, mask: Vec<f64> },
    WeightedSum { vectors: Vec<NodeId>, weights: Vec<NodeId> },
    WeightedMean { values: Vec<NodeId>, weights: Vec<NodeId>, z: f64 },
    Mean(Vec<NodeId>),
    Sum(Vec<NodeId>),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddConst(NodeId),
    Scale(NodeId, f64),
    Stack(Vec<NodeId>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Vec<f64>,
    needs_grad: bool,
}

/// Numeric settings shared by the graph operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphConfig {
    pub leaky_slope: f64,
    /// Norms below this make `cosine` return 0 with zero gradient.
    pub eps_norm: f64,
    /// Normalizers below this make `weighted_mean` return 0 with zero gradient.
    pub eps_weight: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            leaky_slope: 0.01,
            eps_norm: 1e-12,
            eps_weight: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    config: GraphConfig,
}

/// Node gradients from one backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    visits: usize,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Number of nodes the backward sweep visited.
    pub fn visits(&self) -> usize {
        self.visits
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn first_argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if i == 0 || v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: &[f64]) {
    match slot {
        Some(g) => g.iter_mut().zip(delta).for_each(|(a, d)| *a += d),
        None => *slot = Some(delta.to_vec()),
    }
}

fn accumulate_scaled(slot: &mut Option<Vec<f64>>, delta: &[f64], scale: f64) {
    match slot {
        Some(g) => g.iter_mut().zip(delta).for_each(|(a, d)| *a += scale * d),
        None => *slot = Some(delta.iter().map(|d| scale * d).collect()),
    }
}

impl Graph {
    pub fn new(config: GraphConfig) -> Self {
        Graph {
            nodes: Vec::new(),
            config,
        }
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id.0].value;
        debug_assert_eq!(v.len(), 1, "node {} is not a scalar", id.0);
        v[0]
    }

    pub fn needs_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn push(&mut self, op: Op, value: Vec<f64>, needs_grad: bool, name: &'static str) -> Result<NodeId> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn ng(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].needs_grad)
    }

    fn expect_scalar(&self, op: &'static str, id: NodeId) -> Result<f64> {
        let v = &self.nodes[id.0].value;
        if v.len() != 1 {
            return Err(Error::Shape {
                op,
                detail: format!("expected scalar input, got length {}", v.len()),
            });
        }
        Ok(v[0])
    }

    /// Input that never receives gradient.
    pub fn constant(&mut self, value: Vec<f64>) -> Result<NodeId> {
        self.push(Op::Constant, value, false, "constant")
    }

    pub fn constant_scalar(&mut self, value: f64) -> Result<NodeId> {
        self.constant(vec![value])
    }

    /// Input whose gradient is tracked (readable from [`Gradients::get`]).
    pub fn variable(&mut self, value: Vec<f64>) -> Result<NodeId> {
        self.push(Op::Variable, value, true, "variable")
    }

    /// Whole parameter as a flat vector leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<NodeId> {
        let p = store.get(id);
        self.push(Op::Param(id), p.value.data().to_vec(), !p.frozen, "param")
    }

    /// One element of a parameter as a scalar leaf.
    pub fn param_elem(&mut self, store: &ParamStore, id: ParamId, index: usize) -> Result<NodeId> {
        let p = store.get(id);
        let v = *p.value.data().get(index).ok_or_else(|| Error::Shape {
            op: "param_elem",
            detail: format!("index {index} out of range for '{}' of length {}", p.name, p.value.len()),
        })?;
        self.push(Op::ParamElem(id, index), vec![v], !p.frozen, "param_elem")
    }

    /// `W x + b` for a `D×d` matrix parameter `W` and length-`D` bias `b`.
    pub fn affine(&mut self, store: &ParamStore, w: ParamId, b: ParamId, x: NodeId) -> Result<NodeId> {
        let wp = store.get(w);
        let bp = store.get(b);
        let (rows, cols) = wp.value.dims2();
        let xv = &self.nodes[x.0].value;
        if wp.value.shape().len() != 2 || cols != xv.len() || bp.value.len() != rows {
            return Err(Error::Shape {
                op: "affine",
                detail: format!(
                    "W {:?}, b {:?}, x [{}]",
                    wp.value.shape(),
                    bp.value.shape(),
                    xv.len()
                ),
            });
        }
        let wd = wp.value.data();
        let bd = bp.value.data();
        let out: Vec<f64> = (0..rows)
            .map(|r| dot(&wd[r * cols..(r + 1) * cols], xv) + bd[r])
            .collect();
        let needs = self.nodes[x.0].needs_grad || !wp.frozen || !bp.frozen;
        self.push(Op::Affine { w, b, x }, out, needs, "affine")
    }

    pub fn leaky_relu(&mut self, x: NodeId) -> Result<NodeId> {
        let slope = self.config.leaky_slope;
        let out = self.nodes[x.0]
            .value
            .iter()
            .map(|&v| if v >= 0.0 { v } else { slope * v })
            .collect();
        let needs = self.nodes[x.0].needs_grad;
        self.push(Op::LeakyRelu { x, slope }, out, needs, "leaky_relu")
    }

    /// Cosine similarity; 0 with zero gradient when either norm is below `eps_norm`.
    pub fn cosine(&mut self, u: NodeId, v: NodeId) -> Result<NodeId> {
        let (uv, vv) = (&self.nodes[u.0].value, &self.nodes[v.0].value);
        if uv.len() != vv.len() {
            return Err(Error::Shape {
                op: "cosine",
                detail: format!("lengths {} and {}", uv.len(), vv.len()),
            });
        }
        let (c, degenerate) = cosine_value(uv, vv, self.config.eps_norm);
        let needs = self.ng(&[u, v]) && !degenerate;
        self.push(Op::Cosine { u, v, degenerate }, vec![c], needs, "cosine")
    }

    /// Maximum of scalar nodes; gradient flows to the first maximal element.
    pub fn max(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("max of empty sequence".into()));
        }
        let vals = inputs
            .iter()
            .map(|&i| self.expect_scalar("max", i))
            .collect::<Result<Vec<_>>>()?;
        let (argmax, m) = first_argmax(vals.into_iter());
        let needs = self.ng(inputs);
        self.push(
            Op::Max {
                inputs: inputs.to_vec(),
                argmax,
            },
            vec![m],
            needs,
            "max",
        )
    }

    /// `max_k scales[k] * values[k]` over scalar nodes, first index on ties.
    pub fn scaled_max(&mut self, values: &[NodeId], scales: &[NodeId]) -> Result<NodeId> {
        if values.is_empty() || values.len() != scales.len() {
            return Err(Error::Shape {
                op: "scaled_max",
                detail: format!("{} values, {} scales", values.len(), scales.len()),
            });
        }
        let mut prods = Vec::with_capacity(values.len());
        for (&v, &s) in values.iter().zip(scales) {
            prods.push(self.expect_scalar("scaled_max", s)? * self.expect_scalar("scaled_max", v)?);
        }
        let (argmax, m) = first_argmax(prods.into_iter());
        let needs = self.ng(values) || self.ng(scales);
        self.push(
            Op::ScaledMax {
                values: values.to_vec(),
                scales: scales.to_vec(),
                argmax,
            },
            vec![m],
            needs,
            "scaled_max",
        )
    }

    /// Inverted dropout: identity unless `training`, otherwise each element is
    /// zeroed with probability `p` and survivors are scaled by `1/(1-p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: NodeId, p: f64, training: bool, rng: &mut R) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("dropout probability {p} outside [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = self.nodes[x.0]
            .value
            .iter()
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let out = self.nodes[x.0].value.iter().zip(&mask).map(|(v, m)| v * m).collect();
        let needs = self.nodes[x.0].needs_grad;
        self.push(Op::Dropout { x, mask }, out, needs, "dropout")
    }

    /// `Σ_k weights[k] * vectors[k]`, accumulated in index order.
    pub fn weighted_sum(&mut self, vectors: &[NodeId], weights: &[NodeId]) -> Result<NodeId> {
        if vectors.is_empty() || vectors.len() != weights.len() {
            return Err(Error::Shape {
                op: "weighted_sum",
                detail: format!("{} vectors, {} weights", vectors.len(), weights.len()),
            });
        }
        let dim = self.nodes[vectors[0].0].value.len();
        let mut acc = vec![0.0; dim];
        for (&v, &w) in vectors.iter().zip(weights) {
            let wv = self.expect_scalar("weighted_sum", w)?;
            let vv = &self.nodes[v.0].value;
            if vv.len() != dim {
                return Err(Error::Shape {
                    op: "weighted_sum",
                    detail: format!("vector lengths {dim} and {}", vv.len()),
                });
            }
            acc.iter_mut().zip(vv).for_each(|(a, x)| *a += wv * x);
        }
        let needs = self.ng(vectors) || self.ng(weights);
        self.push(
            Op::WeightedSum {
                vectors: vectors.to_vec(),
                weights: weights.to_vec(),
            },
            acc,
            needs,
            "weighted_sum",
        )
    }

    /// `Σ w_m x_m / Σ w_m` over scalars; 0 with zero gradient when `|Σ w| < eps_weight`.
    pub fn weighted_mean(&mut self, values: &[NodeId], weights: &[NodeId]) -> Result<NodeId> {
        if values.len() != weights.len() {
            return Err(Error::Shape {
                op: "weighted_mean",
                detail: format!("{} values, {} weights", values.len(), weights.len()),
            });
        }
        let mut num = 0.0;
        let mut z = 0.0;
        for (&v, &w) in values.iter().zip(weights) {
            let wv = self.expect_scalar("weighted_mean", w)?;
            num += wv * self.expect_scalar("weighted_mean", v)?;
            z += wv;
        }
        let degenerate = z.abs() < self.config.eps_weight;
        let out = if degenerate { 0.0 } else { num / z };
        let needs = !degenerate && (self.ng(values) || self.ng(weights));
        self.push(
            Op::WeightedMean {
                values: values.to_vec(),
                weights: weights.to_vec(),
                z: if degenerate { 0.0 } else { z },
            },
            vec![out],
            needs,
            "weighted_mean",
        )
    }

    /// Arithmetic mean of scalars; 0 for an empty slice.
    pub fn mean(&mut self, values: &[NodeId]) -> Result<NodeId> {
        let mut s = 0.0;
        for &v in values {
            s += self.expect_scalar("mean", v)?;
        }
        let out = if values.is_empty() { 0.0 } else { s / values.len() as f64 };
        let needs = self.ng(values);
        self.push(Op::Mean(values.to_vec()), vec![out], needs, "mean")
    }

    pub fn sum(&mut self, values: &[NodeId]) -> Result<NodeId> {
        let mut s = 0.0;
        for &v in values {
            s += self.expect_scalar("sum", v)?;
        }
        let needs = self.ng(values);
        self.push(Op::Sum(values.to_vec()), vec![s], needs, "sum")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.expect_scalar("add", a)? + self.expect_scalar("add", b)?;
        let needs = self.ng(&[a, b]);
        self.push(Op::Add(a, b), vec![v], needs, "add")
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.expect_scalar("sub", a)? - self.expect_scalar("sub", b)?;
        let needs = self.ng(&[a, b]);
        self.push(Op::Sub(a, b), vec![v], needs, "sub")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.expect_scalar("mul", a)? * self.expect_scalar("mul", b)?;
        let needs = self.ng(&[a, b]);
        self.push(Op::Mul(a, b), vec![v], needs, "mul")
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let v = self.expect_scalar("add_const", a)? + c;
        let needs = self.ng(&[a]);
        self.push(Op::AddConst(a), vec![v], needs, "add_const")
    }

    /// Elementwise multiplication by a constant.
    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let v = self.nodes[a.0].value.iter().map(|x| c * x).collect();
        let needs = self.ng(&[a]);
        self.push(Op::Scale(a, c), v, needs, "scale")
    }

    /// Concatenates scalar nodes into one vector.
    pub fn stack(&mut self, values: &[NodeId]) -> Result<NodeId> {
        let v = values
            .iter()
            .map(|&i| self.expect_scalar("stack", i))
            .collect::<Result<Vec<_>>>()?;
        let needs = self.ng(values);
        self.push(Op::Stack(values.to_vec()), v, needs, "stack")
    }

    /// `max(0, x)` for a scalar node; gradient 0 at the kink.
    pub fn hinge(&mut self, x: NodeId) -> Result<NodeId> {
        let zero = self.constant_scalar(0.0)?;
        self.max(&[zero, x])
    }

    /// Hash of every discrete choice made in the forward pass: max and
    /// scaled-max winners, leaky-ReLU input signs and degenerate-case flags.
    /// Two forward passes with equal signatures lie on the same smooth piece.
    pub fn decision_signature(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (i, node) in self.nodes.iter().enumerate() {
            match &node.op {
                Op::Max { argmax, .. } | Op::ScaledMax { argmax, .. } => (i, *argmax).hash(&mut h),
                Op::LeakyRelu { x, .. } => {
                    for v in &self.nodes[x.0].value {
                        (i, *v >= 0.0).hash(&mut h);
                    }
                }
                Op::Cosine { degenerate, .. } => (i, *degenerate).hash(&mut h),
                Op::WeightedMean { z, .. } => (i, *z == 0.0).hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    /// Back-propagates from the scalar `output`, accumulating parameter
    /// gradients into `store`. Every node is visited exactly once, in
    /// reverse creation order.
    pub fn backward(&self, output: NodeId, store: &mut ParamStore) -> Result<Gradients> {
        if self.nodes[output.0].value.len() != 1 {
            return Err(Error::Shape {
                op: "backward",
                detail: "output must be a scalar".into(),
            });
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[output.0] = Some(vec![1.0]);
        let mut visits = 0;
        for i in (0..n).rev() {
            visits += 1;
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads, store);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, visits })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>], store: &mut ParamStore) {
        let val = |id: NodeId| &self.nodes[id.0].value;
        let needs = |id: NodeId| self.nodes[id.0].needs_grad;
        match &node.op {
            Op::Constant | Op::Variable => {}
            Op::Param(p) => {
                let param = store.get_mut(*p);
                if !param.frozen {
                    param.grad.data_mut().iter_mut().zip(g).for_each(|(a, d)| *a += d);
                }
            }
            Op::ParamElem(p, idx) => {
                let param = store.get_mut(*p);
                if !param.frozen {
                    param.grad.data_mut()[*idx] += g[0];
                }
            }
            Op::Affine { w, b, x } => {
                let xv = val(*x);
                let (rows, cols) = store.get(*w).value.dims2();
                if needs(*x) {
                    let wd = store.get(*w).value.data();
                    let mut dx = vec![0.0; cols];
                    for (r, gr) in g.iter().enumerate() {
                        if *gr != 0.0 {
                            let row = &wd[r * cols..(r + 1) * cols];
                            dx.iter_mut().zip(row).for_each(|(d, wv)| *d += gr * wv);
                        }
                    }
                    accumulate(&mut grads[x.0], &dx);
                }
                let wp = store.get_mut(*w);
                if !wp.frozen {
                    let gw = wp.grad.data_mut();
                    for r in 0..rows {
                        if g[r] != 0.0 {
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            row.iter_mut().zip(xv).for_each(|(a, xi)| *a += g[r] * xi);
                        }
                    }
                }
                let bp = store.get_mut(*b);
                if !bp.frozen {
                    bp.grad.data_mut().iter_mut().zip(g).for_each(|(a, d)| *a += d);
                }
            }
            Op::LeakyRelu { x, slope } => {
                let d: Vec<f64> = val(*x)
                    .iter()
                    .zip(g)
                    .map(|(&xi, &gi)| if xi >= 0.0 { gi } else { slope * gi })
                    .collect();
                accumulate(&mut grads[x.0], &d);
            }
            Op::Cosine { u, v, degenerate } => {
                if *degenerate {
                    return;
                }
                let (uv, vv) = (val(*u), val(*v));
                let nu = dot(uv, uv).sqrt();
                let nv = dot(vv, vv).sqrt();
                let c = node.value[0];
                let gc = g[0];
                if needs(*u) {
                    let d: Vec<f64> = uv
                        .iter()
                        .zip(vv)
                        .map(|(a, b)| gc * (b / (nu * nv) - c * a / (nu * nu)))
                        .collect();
                    accumulate(&mut grads[u.0], &d);
                }
                if needs(*v) {
                    let d: Vec<f64> = uv
                        .iter()
                        .zip(vv)
                        .map(|(a, b)| gc * (a / (nu * nv) - c * b / (nv * nv)))
                        .collect();
                    accumulate(&mut grads[v.0], &d);
                }
            }
            Op::Max { inputs, argmax } => {
                let t = inputs[*argmax];
                if needs(t) {
                    accumulate(&mut grads[t.0], g);
                }
            }
            Op::ScaledMax { values, scales, argmax } => {
                let (v, s) = (values[*argmax], scales[*argmax]);
                let (vv, sv) = (val(v)[0], val(s)[0]);
                if needs(v) {
                    accumulate(&mut grads[v.0], &[g[0] * sv]);
                }
                if needs(s) {
                    accumulate(&mut grads[s.0], &[g[0] * vv]);
                }
            }
            Op::Dropout { x, mask } => {
                let d: Vec<f64> = g.iter().zip(mask).map(|(a, m)| a * m).collect();
                accumulate(&mut grads[x.0], &d);
            }
            Op::WeightedSum { vectors, weights } => {
                for (&v, &w) in vectors.iter().zip(weights) {
                    if needs(v) {
                        accumulate_scaled(&mut grads[v.0], g, val(w)[0]);
                    }
                    if needs(w) {
                        accumulate(&mut grads[w.0], &[dot(g, val(v))]);
                    }
                }
            }
            Op::WeightedMean { values, weights, z } => {
                let mean = node.value[0];
                for (&v, &w) in values.iter().zip(weights) {
                    if needs(v) {
                        accumulate(&mut grads[v.0], &[g[0] * val(w)[0] / z]);
                    }
                    if needs(w) {
                        accumulate(&mut grads[w.0], &[g[0] * (val(v)[0] - mean) / z]);
                    }
                }
            }
            Op::Mean(values) => {
                let share = g[0] / values.len() as f64;
                for &v in values {
                    if needs(v) {
                        accumulate(&mut grads[v.0], &[share]);
                    }
                }
            }
            Op::Sum(values) => {
                for &v in values {
                    if needs(v) {
                        accumulate(&mut grads[v.0], g);
                    }
                }
            }
            Op::Add(a, b) => {
                if needs(*a) {
                    accumulate(&mut grads[a.0], g);
                }
                if needs(*b) {
                    accumulate(&mut grads[b.0], g);
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    accumulate(&mut grads[a.0], g);
                }
                if needs(*b) {
                    accumulate(&mut grads[b.0], &[-g[0]]);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a)[0], val(*b)[0]);
                if needs(*a) {
                    accumulate(&mut grads[a.0], &[g[0] * bv]);
                }
                if needs(*b) {
                    accumulate(&mut grads[b.0], &[g[0] * av]);
                }
            }
            Op::AddConst(a) => accumulate(&mut grads[a.0], g),
            Op::Scale(a, c) => accumulate_scaled(&mut grads[a.0], g, *c),
            Op::Stack(values) => {
                for (&v, gi) in values.iter().zip(g) {
                    if needs(v) {
                        accumulate(&mut grads[v.0], &[*gi]);
                    }
                }
            }
        }
    }
}

/// Cosine similarity and whether the degenerate (near-zero norm) rule applied.
pub fn cosine_value(u: &[f64], v: &[f64], eps_norm: f64) -> (f64, bool) {
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu < eps_norm || nv < eps_norm {
        return (0.0, true);
    }
    ((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0), false)
}
