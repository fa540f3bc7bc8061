//! Dependency-graph linearization: CoNLL-U reading, graph Laplacian, Fiedler
//! vector via Jacobi rotations, and token reordering.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::corpus::TokenSeq;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    pub sentence_id: String,
    pub n_vertices: usize,
    /// Undirected edges stored as `(min, max)`.
    pub edges: BTreeSet<(usize, usize)>,
    /// Token forms from the parse, for alignment checks.
    pub forms: Vec<String>,
}

impl DependencyGraph {
    /// Builds a graph from 1-based head indices (0 marks the root).
    pub fn from_heads(sentence_id: &str, heads: &[usize]) -> Result<Self> {
        let n = heads.len();
        let bad = |message: String| Error::Graph {
            sentence: sentence_id.to_string(),
            message,
        };
        let mut edges = BTreeSet::new();
        for (i, &h) in heads.iter().enumerate() {
            if h > n {
                return Err(bad(format!("HEAD {h} of token {} exceeds sentence length {n}", i + 1)));
            }
            if h == i + 1 {
                return Err(bad(format!("token {} is its own head", i + 1)));
            }
            if h > 0 {
                let j = h - 1;
                edges.insert((i.min(j), i.max(j)));
            }
        }
        let g = DependencyGraph {
            sentence_id: sentence_id.to_string(),
            n_vertices: n,
            edges,
            forms: Vec::new(),
        };
        if n > 0 && (g.edges.len() != n - 1 || !g.is_connected()) {
            return Err(bad("parse is cyclic or disconnected".into()));
        }
        Ok(g)
    }

    pub fn is_connected(&self) -> bool {
        if self.n_vertices == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n_vertices];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Parses CoNLL-U text into one graph per sentence, keyed by `sent_id`
/// (falling back to the 0-based sentence position when a block has none).
/// Multi-word token and empty-node lines are skipped.
pub fn parse_conllu_str(content: &str, path: &Path) -> Result<BTreeMap<String, DependencyGraph>> {
    let mut out = BTreeMap::new();
    let mut sent_id: Option<String> = None;
    let mut heads: Vec<usize> = Vec::new();
    let mut forms: Vec<String> = Vec::new();
    let mut block = 0;

    let mut finish = |sent_id: &mut Option<String>, heads: &mut Vec<usize>, forms: &mut Vec<String>, block: &mut usize| -> Result<()> {
        if heads.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let id = sent_id.take().unwrap_or_else(|| block.to_string());
        let mut g = DependencyGraph::from_heads(&id, heads)?;
        g.forms = std::mem::take(forms);
        heads.clear();
        out.insert(id, g);
        *block += 1;
        Ok(())
    };

    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut sent_id, &mut heads, &mut forms, &mut block)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(path, lineno + 1, format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad ID {:?}", cols[0])))?;
        if id != heads.len() + 1 {
            return Err(Error::parse(path, lineno + 1, format!("token ID {id} out of sequence")));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad HEAD {:?}", cols[6])))?;
        heads.push(head);
        forms.push(cols[1].to_string());
    }
    finish(&mut sent_id, &mut heads, &mut forms, &mut block)?;
    Ok(out)
}

pub fn parse_conllu(path: &Path) -> Result<BTreeMap<String, DependencyGraph>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu_str(&content, path)
}

/// Reads every `*.conllu` file in a directory into one map.
pub fn load_parse_dir(dir: &Path) -> Result<BTreeMap<String, DependencyGraph>> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "conllu"))
        .collect();
    files.sort();
    let mut out = BTreeMap::new();
    for f in files {
        out.extend(parse_conllu(&f)?);
    }
    Ok(out)
}

/// Checks a parse against the corpus tokenization of its sentence.
pub fn check_alignment(graph: &DependencyGraph, sentence: &TokenSeq) -> Result<()> {
    let fail = |message: String| Error::Alignment {
        sentence: graph.sentence_id.clone(),
        message,
    };
    if graph.n_vertices != sentence.len() {
        return Err(fail(format!(
            "parse has {} tokens, tokenizer produced {}",
            graph.n_vertices,
            sentence.len()
        )));
    }
    for (i, (form, tok)) in graph.forms.iter().zip(sentence.tokens()).enumerate() {
        if form.to_lowercase() != *tok {
            return Err(fail(format!("token {} is {form:?} in the parse but {tok:?} in the text", i + 1)));
        }
    }
    Ok(())
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }
}

/// Unit-weight graph Laplacian `D − A`.
pub fn laplacian(g: &DependencyGraph) -> SymMatrix {
    weighted_laplacian(g.n_vertices, g.edges.iter().map(|&(a, b)| (a, b, 1.0)))
}

pub fn weighted_laplacian(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> SymMatrix {
    let mut data = vec![0.0; n * n];
    for (a, b, w) in edges {
        data[a * n + b] -= w;
        data[b * n + a] -= w;
        data[a * n + a] += w;
        data[b * n + b] += w;
    }
    SymMatrix { n, data }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and column eigenvectors (`vectors[k]` is the k-th
/// eigenvector), unsorted.
pub fn jacobi_eigen(m: &SymMatrix, tol: f64, max_sweeps: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.n;
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    for _ in 0..max_sweeps {
        if off(&a) < tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    let vectors = (0..n).map(|k| (0..n).map(|i| v[i * n + k]).collect()).collect();
    (values, vectors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiedlerResult {
    pub eigenvalue: f64,
    pub vector: Vec<f64>,
    pub ordering: Vec<usize>,
}

const OFF_DIAGONAL_TOL: f64 = 1e-10;
const SIGN_TOL: f64 = 1e-9;
const CONNECTED_TOL: f64 = 1e-10;

/// Second-smallest eigenpair of a connected graph's Laplacian and the token
/// ordering it induces (stable ascending argsort).
///
/// The vector is oriented so its first component beyond `1e-9` in magnitude
/// is negative; sentence-initial tokens then tend to stay at the front and a
/// path graph keeps its original order.
pub fn fiedler(l: &SymMatrix) -> Result<FiedlerResult> {
    let n = l.n;
    if n <= 1 {
        return Ok(FiedlerResult {
            eigenvalue: 0.0,
            vector: vec![1.0; n],
            ordering: (0..n).collect(),
        });
    }
    let (values, vectors) = jacobi_eigen(l, OFF_DIAGONAL_TOL, 100);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let k = order[1];
    let eigenvalue = values[k];
    if eigenvalue < CONNECTED_TOL {
        return Err(Error::Graph {
            sentence: String::new(),
            message: format!("second eigenvalue {eigenvalue:e} indicates a disconnected graph"),
        });
    }
    let mut vector = vectors[k].clone();
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    vector.iter_mut().for_each(|x| *x /= norm);
    if let Some(first) = vector.iter().find(|x| x.abs() > SIGN_TOL) {
        if *first > 0.0 {
            vector.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let mut ordering: Vec<usize> = (0..n).collect();
    ordering.sort_by(|&a, &b| vector[a].total_cmp(&vector[b]).then(a.cmp(&b)));
    Ok(FiedlerResult {
        eigenvalue,
        vector,
        ordering,
    })
}

/// Fiedler ordering of a dependency graph; errors name the sentence.
pub fn linearize(g: &DependencyGraph) -> Result<FiedlerResult> {
    fiedler(&laplacian(g)).map_err(|e| match e {
        Error::Graph { message, .. } => Error::Graph {
            sentence: g.sentence_id.clone(),
            message,
        },
        other => other,
    })
}

pub fn reorder(sentence: &TokenSeq, result: &FiedlerResult) -> Result<TokenSeq> {
    if sentence.len() != result.ordering.len() {
        return Err(Error::Shape {
            op: "reorder",
            detail: format!("sentence has {} tokens, ordering has {}", sentence.len(), result.ordering.len()),
        });
    }
    Ok(TokenSeq::new(
        result.ordering.iter().map(|&i| sentence.tokens()[i].clone()).collect(),
    ))
}
