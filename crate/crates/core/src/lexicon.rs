//! Word vectors, IDF-initialized word weights and the question stopword list.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::corpus::{Story, TokenSeq};
use crate::error::{Error, Result};

pub const DEFAULT_OVERRIDES: &[&str] = &["not", "n't", "no", "never"];

/// Query words plus the conjugations of "do" and "be".
pub const DEFAULT_QUESTION_STOPWORDS: &[&str] = &[
    "who", "what", "when", "where", "how", "do", "does", "did", "done", "doing", "be", "am", "is", "are", "was",
    "were", "been", "being",
];

/// Fixed word vectors keyed by token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut t = Self::new(dim);
        for (w, v) in entries {
            t.insert(w, v)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "vector for {token:?} has length {}, table dim is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("vector for {token:?} is not finite")));
        }
        self.entries.insert(token, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    /// word2vec text format with tokens sorted, readable by [`load_embeddings`].
    pub fn to_text(&self) -> String {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let mut out = format!("{} {}\n", keys.len(), self.dim);
        for k in keys {
            out.push_str(k);
            for v in &self.entries[k] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Auto,
    Text,
    Binary,
}

/// Keeps exact matches over case-folded ones when both occur in a file.
struct Collector<'a> {
    filter: Option<&'a HashSet<String>>,
    table: EmbeddingTable,
    exact: HashSet<String>,
}

impl Collector<'_> {
    fn offer(&mut self, word: &str, vector: Vec<f64>) {
        let Some(filter) = self.filter else {
            if !self.table.contains(word) {
                self.table.entries.insert(word.to_string(), vector);
            }
            return;
        };
        if filter.contains(word) {
            self.exact.insert(word.to_string());
            self.table.entries.insert(word.to_string(), vector);
            return;
        }
        let lower = word.to_lowercase();
        if lower != word && filter.contains(&lower) && !self.exact.contains(&lower) && !self.table.contains(&lower) {
            self.table.entries.insert(lower, vector);
        }
    }
}

fn parse_header(line: &str, path: &Path) -> Result<(usize, usize)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let parse = |s: &str| s.parse::<usize>().ok();
    match fields.as_slice() {
        [v, d] => match (parse(v), parse(d)) {
            (Some(v), Some(d)) if d > 0 => Ok((v, d)),
            _ => Err(Error::parse(path, 1, format!("bad header {line:?}"))),
        },
        _ => Err(Error::parse(path, 1, format!("bad header {line:?}"))),
    }
}

fn looks_like_text(buf: &[u8], dim: usize) -> bool {
    let line = match buf.iter().position(|&b| b == b'\n') {
        Some(end) => &buf[..end],
        None => buf,
    };
    let Ok(s) = std::str::from_utf8(line) else {
        return false;
    };
    let fields: Vec<&str> = s.split_whitespace().collect();
    fields.len() == dim + 1 && fields[1..].iter().all(|f| f.parse::<f64>().is_ok())
}

/// Loads word2vec text or binary embeddings, keeping only tokens in
/// `vocab_filter` when one is given. Matching tries the exact token first and
/// falls back to the lowercased file word.
pub fn load_embeddings(
    path: &Path,
    vocab_filter: Option<&HashSet<String>>,
    expected_dim: Option<usize>,
    format: EmbeddingFormat,
) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let (count, dim) = parse_header(header.trim_end(), path)?;
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(Error::parse(path, 1, format!("embedding dim {dim} does not match configured {expected}")));
        }
    }
    let binary = match format {
        EmbeddingFormat::Text => false,
        EmbeddingFormat::Binary => true,
        EmbeddingFormat::Auto => {
            let buf = reader.fill_buf().map_err(|e| Error::io(path, e))?;
            !looks_like_text(buf, dim)
        }
    };
    let mut col = Collector {
        filter: vocab_filter,
        table: EmbeddingTable::new(dim),
        exact: HashSet::new(),
    };
    if binary {
        read_binary(&mut reader, path, count, dim, &mut col)?;
    } else {
        read_text(&mut reader, path, dim, &mut col)?;
    }
    Ok(col.table)
}

fn read_text<R: BufRead>(reader: &mut R, path: &Path, dim: usize, col: &mut Collector<'_>) -> Result<()> {
    let mut line = String::new();
    let mut lineno = 1;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(' ').filter(|f| !f.is_empty());
        let word = fields.next().unwrap_or_default();
        if let Some(filter) = col.filter {
            if !filter.contains(word) && !filter.contains(&word.to_lowercase()) {
                continue;
            }
        }
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, lineno, format!("bad value for {word:?}: {e}")))?;
        if values.len() != dim {
            return Err(Error::parse(path, lineno, format!("expected {dim} values, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, lineno, format!("non-finite value for {word:?}")));
        }
        col.offer(word, values);
    }
    Ok(())
}

fn read_binary<R: BufRead>(
    reader: &mut R,
    path: &Path,
    count: usize,
    dim: usize,
    col: &mut Collector<'_>,
) -> Result<()> {
    let mut word = Vec::new();
    let mut raw = vec![0u8; dim * 4];
    for entry in 0..count {
        let record = entry + 2;
        word.clear();
        reader.read_until(b' ', &mut word).map_err(|e| Error::io(path, e))?;
        if word.last() != Some(&b' ') {
            return Err(Error::parse(path, record, "truncated binary record"));
        }
        word.pop();
        while word.first() == Some(&b'\n') {
            word.remove(0);
        }
        let w = String::from_utf8_lossy(&word).into_owned();
        reader.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
        let wanted = match col.filter {
            Some(f) => f.contains(&w) || f.contains(&w.to_lowercase()),
            None => true,
        };
        if !wanted {
            continue;
        }
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, record, format!("non-finite value for {w:?}")));
        }
        col.offer(&w, values);
    }
    Ok(())
}

/// Inverse document frequency `ln(N / df)` with each story one document.
/// A story's document covers its passage, questions and candidates.
pub fn compute_idf(stories: &[Story]) -> BTreeMap<String, f64> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for story in stories {
        let mut seen: HashSet<&str> = HashSet::new();
        let seqs = story
            .sentences
            .iter()
            .chain(story.questions.iter().flat_map(|q| std::iter::once(&q.text).chain(q.candidates.iter())));
        for seq in seqs {
            seen.extend(seq.tokens().iter().map(String::as_str));
        }
        for t in seen {
            *df.entry(t.to_string()).or_default() += 1;
        }
    }
    let n = stories.len() as f64;
    df.into_iter().map(|(t, d)| (t, (n / d as f64).ln())).collect()
}

/// Vocabulary of the word-weight table. Index `len()` is the slot shared by
/// all unseen tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unknown_index(&self) -> usize {
        self.tokens.len()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index for `token`, falling back to the unknown slot.
    pub fn index_of(&self, token: &str) -> usize {
        self.get(token).unwrap_or(self.tokens.len())
    }
}

/// Initial exogenous word weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WordWeightTable {
    vocab: Vocab,
    /// One value per vocabulary token followed by the unknown-token value.
    values: Vec<f64>,
    overrides: BTreeSet<String>,
}

impl WordWeightTable {
    /// Rebuilds a table from saved parts. `values` holds one entry per token
    /// plus the unknown slot.
    pub fn from_parts(tokens: Vec<String>, values: Vec<f64>, overrides: BTreeSet<String>) -> Result<Self> {
        if values.len() != tokens.len() + 1 {
            return Err(Error::Shape {
                op: "WordWeightTable::from_parts",
                detail: format!("{} tokens need {} values, got {}", tokens.len(), tokens.len() + 1, values.len()),
            });
        }
        Ok(WordWeightTable {
            vocab: Vocab::new(tokens),
            values,
            overrides,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn overrides(&self) -> &BTreeSet<String> {
        &self.overrides
    }

    pub fn weight(&self, token: &str) -> f64 {
        self.values[self.vocab.index_of(token)]
    }

    /// Replaces every weight with `value`.
    pub fn uniform(mut self, value: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v = value);
        self
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

/// `ω_w = idf(w)`, override tokens get the corpus-maximum idf and unseen
/// tokens the median idf.
pub fn init_word_weights(idf: &BTreeMap<String, f64>, overrides: &BTreeSet<String>) -> WordWeightTable {
    let mut sorted: Vec<f64> = idf.values().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let max = sorted.last().copied().unwrap_or(0.0);
    let med = median(&sorted);
    let mut tokens: Vec<String> = idf.keys().cloned().collect();
    for o in overrides {
        if !idf.contains_key(o) {
            tokens.push(o.clone());
        }
    }
    let vocab = Vocab::new(tokens);
    let mut values: Vec<f64> = vocab
        .tokens()
        .iter()
        .map(|t| if overrides.contains(t) { max } else { idf[t] })
        .collect();
    values.push(med);
    WordWeightTable {
        vocab,
        values,
        overrides: overrides.clone(),
    }
}

/// Looks up token vectors, dropping out-of-vocabulary tokens. Returns the
/// vectors and the original positions they came from.
pub fn lookup<'a>(seq: &TokenSeq, table: &'a EmbeddingTable) -> (Vec<&'a [f64]>, Vec<usize>) {
    seq.tokens()
        .iter()
        .enumerate()
        .filter_map(|(i, t)| table.get(t).map(|v| (v, i)))
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionStopwords {
    tokens: BTreeSet<String>,
}

impl Default for QuestionStopwords {
    fn default() -> Self {
        QuestionStopwords {
            tokens: DEFAULT_QUESTION_STOPWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl QuestionStopwords {
    pub fn new(tokens: impl IntoIterator<Item = String>) -> Self {
        QuestionStopwords {
            tokens: tokens.into_iter().collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn tokens(&self) -> &BTreeSet<String> {
        &self.tokens
    }

    /// Removes stopwords from a question.
    pub fn filter_question(&self, q: &TokenSeq) -> TokenSeq {
        TokenSeq::new(q.tokens().iter().filter(|t| !self.contains(t)).cloned().collect())
    }
}

/// Reads a plain-text token list, one token per line; blank lines and `#`
/// comments are ignored.
pub fn read_token_list(path: &Path) -> Result<BTreeSet<String>> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}
