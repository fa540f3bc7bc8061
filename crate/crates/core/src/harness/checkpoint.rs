//! Plain-text checkpoints.
//!
//! ```text
//! mcrank-checkpoint 1
//! config <lines>
//! <key=value lines>
//! rng <seed> <word_pos>
//! vocab <count>
//! <one token per line>
//! overrides <count>
//! <one token per line>
//! stopwords <count>
//! <one token per line>
//! tensors <count>
//! <name> <rows> <cols>
//! <one line of cols values per row>
//! ```
//!
//! Values use the shortest decimal form that reads back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lexicon::{QuestionStopwords, WordWeightTable};
use crate::scorer::Model;

const MAGIC: &str = "mcrank-checkpoint 1";

/// Position of the training generator: reseeding with `seed` and jumping to
/// `word_pos` resumes the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

fn rows_cols(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, 1),
        [r, c] => (*r, *c),
        _ => (shape.iter().product(), 1),
    }
}

pub fn render(model: &Model, rng: RngState) -> String {
    let mut out = String::new();
    let cfg = model.config.to_kv();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "config {}", cfg.lines().count());
    out.push_str(&cfg);
    if !cfg.ends_with('\n') && !cfg.is_empty() {
        out.push('\n');
    }
    let _ = writeln!(out, "rng {} {}", rng.seed, rng.word_pos);
    let list = |out: &mut String, name: &str, items: &mut dyn Iterator<Item = &String>| {
        let items: Vec<&String> = items.collect();
        let _ = writeln!(out, "{name} {}", items.len());
        for t in items {
            let _ = writeln!(out, "{t}");
        }
    };
    list(&mut out, "vocab", &mut model.weights.vocab().tokens().iter());
    list(&mut out, "overrides", &mut model.weights.overrides().iter());
    list(&mut out, "stopwords", &mut model.stopwords.tokens().iter());
    let _ = writeln!(out, "tensors {}", model.store.len());
    for (_, p) in model.store.iter() {
        let (rows, cols) = rows_cols(p.value.shape());
        let _ = writeln!(out, "{} {rows} {cols}", p.name);
        for row in p.value.data().chunks(cols) {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

pub fn save(path: &Path, model: &Model, rng: RngState) -> Result<()> {
    fs::write(path, render(model, rng)).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(Error::parse(self.path, self.line + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, self.line, msg)
    }

    fn header(&mut self, name: &str) -> Result<usize> {
        let l = self.next(name)?;
        match l.split_once(' ') {
            Some((n, count)) if n == name => count.trim().parse().map_err(|_| self.err(format!("bad {name} count"))),
            _ => Err(self.err(format!("expected \"{name} <count>\""))),
        }
    }

    fn tokens(&mut self, name: &str) -> Result<Vec<String>> {
        let n = self.header(name)?;
        (0..n).map(|_| self.next("token").map(String::from)).collect()
    }
}

pub fn parse(text: &str, path: &Path) -> Result<(Model, RngState)> {
    let mut lines = Lines {
        path,
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next("header")? != MAGIC {
        return Err(lines.err("not a checkpoint"));
    }
    let n_cfg = lines.header("config")?;
    let mut cfg_text = String::new();
    for _ in 0..n_cfg {
        cfg_text.push_str(lines.next("config line")?);
        cfg_text.push('\n');
    }
    let config = Config::parse_str(&cfg_text).map_err(|e| lines.err(e.to_string()))?;

    let l = lines.next("rng")?;
    let rng = match l.split_whitespace().collect::<Vec<_>>()[..] {
        ["rng", seed, pos] => RngState {
            seed: seed.parse().map_err(|_| lines.err("bad rng seed"))?,
            word_pos: pos.parse().map_err(|_| lines.err("bad rng position"))?,
        },
        _ => return Err(lines.err("expected \"rng <seed> <word_pos>\"")),
    };
    let vocab = lines.tokens("vocab")?;
    let overrides = lines.tokens("overrides")?.into_iter().collect();
    let stopwords = QuestionStopwords::new(lines.tokens("stopwords")?);

    let n_tensors = lines.header("tensors")?;
    let mut tensors = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let head = lines.next("tensor header")?;
        let (name, rows, cols) = match head.split_whitespace().collect::<Vec<_>>()[..] {
            [name, r, c] => (
                name.to_string(),
                r.parse::<usize>().map_err(|_| lines.err("bad row count"))?,
                c.parse::<usize>().map_err(|_| lines.err("bad column count"))?,
            ),
            _ => return Err(lines.err("expected \"<name> <rows> <cols>\"")),
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row = lines.next("tensor row")?;
            let before = data.len();
            for v in row.split_whitespace() {
                let x: f64 = v.parse().map_err(|_| lines.err(format!("bad value {v:?}")))?;
                if !x.is_finite() {
                    return Err(lines.err(format!("non-finite value in {name}")));
                }
                data.push(x);
            }
            if data.len() - before != cols {
                return Err(lines.err(format!("{name}: expected {cols} values per row")));
            }
        }
        tensors.push((name, rows, cols, data, lines.line));
    }

    let omega = tensors
        .iter()
        .find(|t| t.0 == "omega")
        .ok_or_else(|| lines.err("missing tensor omega"))?;
    let weights = WordWeightTable::from_parts(vocab, omega.3.clone(), overrides).map_err(|e| lines.err(e.to_string()))?;
    let mut model = Model::new(config, weights, stopwords)?;
    if tensors.len() != model.store.len() {
        return Err(lines.err(format!("expected {} tensors, found {}", model.store.len(), tensors.len())));
    }
    for (name, rows, cols, data, line) in tensors {
        let id = model
            .store
            .id(&name)
            .ok_or_else(|| Error::parse(path, line, format!("unknown tensor {name}")))?;
        let p = model.store.get_mut(id);
        if rows_cols(p.value.shape()) != (rows, cols) {
            return Err(Error::parse(
                path,
                line,
                format!("{name}: shape {rows}x{cols} does not match {:?}", p.value.shape()),
            ));
        }
        p.value.data_mut().copy_from_slice(&data);
    }
    Ok((model, rng))
}

pub fn load(path: &Path) -> Result<(Model, RngState)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}
