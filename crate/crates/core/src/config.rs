//! Run configuration, read from and written to flat `key=value` text.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lexicon::DEFAULT_OVERRIDES;

/// Component switches matching the rows of the ablation table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    pub no_ngram: bool,
    pub no_top_n: bool,
    pub no_sentential: bool,
    pub no_sws: bool,
    pub no_swd: bool,
    pub uniform_word_weights: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Embedding width; every weight matrix is `dim × dim`.
    pub dim: usize,
    pub lr: f64,
    pub dropout: f64,
    pub margin: f64,
    pub max_n: usize,
    pub top_n: usize,
    pub window_radius: usize,
    pub window_sigma: f64,
    pub freeze_wbw: bool,
    pub leaky_slope: f64,
    pub eps_norm: f64,
    pub seed: u64,
    pub max_epochs: usize,
    pub patience: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub train_single_only: bool,
    /// Weight answer words by ω instead of uniformly.
    pub weight_answer_words: bool,
    /// Separate ω tables for the semantic and word-by-word perspectives.
    pub split_word_weights: bool,
    /// Dependency window reuses the sequential window's λ and α.
    pub share_window_params: bool,
    pub ablation: Ablation,
    pub overrides: Vec<String>,
    pub data_dir: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub parses_dir: Option<PathBuf>,
    pub stopwords_file: Option<PathBuf>,
    pub overrides_file: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            dim: 300,
            lr: 0.003,
            dropout: 0.5,
            margin: 0.5,
            max_n: 3,
            top_n: 2,
            window_radius: 3,
            window_sigma: 1.5,
            freeze_wbw: true,
            leaky_slope: 0.01,
            eps_norm: 1e-12,
            seed: 1,
            max_epochs: 100,
            patience: 10,
            train_size: 250,
            val_size: 200,
            train_single_only: false,
            weight_answer_words: false,
            split_word_weights: false,
            share_window_params: false,
            ablation: Ablation::default(),
            overrides: DEFAULT_OVERRIDES.iter().map(|s| s.to_string()).collect(),
            data_dir: None,
            embeddings: None,
            parses_dir: None,
            stopwords_file: None,
            overrides_file: None,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl Config {
    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "dim" => self.dim = parse_num(key, v)?,
            "lr" => self.lr = parse_num(key, v)?,
            "dropout" => self.dropout = parse_num(key, v)?,
            "margin" => self.margin = parse_num(key, v)?,
            "max_n" => self.max_n = parse_num(key, v)?,
            "top_n" => self.top_n = parse_num(key, v)?,
            "window_radius" => self.window_radius = parse_num(key, v)?,
            "window_sigma" => self.window_sigma = parse_num(key, v)?,
            "freeze_wbw" => self.freeze_wbw = parse_bool(key, v)?,
            "leaky_slope" => self.leaky_slope = parse_num(key, v)?,
            "eps_norm" => self.eps_norm = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "max_epochs" => self.max_epochs = parse_num(key, v)?,
            "patience" => self.patience = parse_num(key, v)?,
            "train_size" => self.train_size = parse_num(key, v)?,
            "val_size" => self.val_size = parse_num(key, v)?,
            "train_single_only" => self.train_single_only = parse_bool(key, v)?,
            "weight_answer_words" => self.weight_answer_words = parse_bool(key, v)?,
            "split_word_weights" => self.split_word_weights = parse_bool(key, v)?,
            "share_window_params" => self.share_window_params = parse_bool(key, v)?,
            "no_ngram" => self.ablation.no_ngram = parse_bool(key, v)?,
            "no_top_n" => self.ablation.no_top_n = parse_bool(key, v)?,
            "no_sentential" => self.ablation.no_sentential = parse_bool(key, v)?,
            "no_sws" => self.ablation.no_sws = parse_bool(key, v)?,
            "no_swd" => self.ablation.no_swd = parse_bool(key, v)?,
            "uniform_word_weights" => self.ablation.uniform_word_weights = parse_bool(key, v)?,
            "overrides" => {
                self.overrides = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
            }
            "data_dir" => self.data_dir = opt_path(v),
            "embeddings" => self.embeddings = opt_path(v),
            "parses_dir" => self.parses_dir = opt_path(v),
            "stopwords_file" => self.stopwords_file = opt_path(v),
            "overrides_file" => self.overrides_file = opt_path(v),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if !(1..=3).contains(&self.max_n) {
            return bad("max_n must be 1, 2 or 3");
        }
        if self.top_n == 0 {
            return bad("top_n must be positive");
        }
        if self.window_sigma.is_nan() || self.window_sigma <= 0.0 {
            return bad("window_sigma must be positive");
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return bad("leaky_slope must lie in [0, 1)");
        }
        Ok(())
    }

    /// Serializes every key in a form [`Config::parse_str`] reads back.
    pub fn to_kv(&self) -> String {
        let p = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let a = &self.ablation;
        let mut s = String::new();
        let pairs: Vec<(&str, String)> = vec![
            ("dim", self.dim.to_string()),
            ("lr", self.lr.to_string()),
            ("dropout", self.dropout.to_string()),
            ("margin", self.margin.to_string()),
            ("max_n", self.max_n.to_string()),
            ("top_n", self.top_n.to_string()),
            ("window_radius", self.window_radius.to_string()),
            ("window_sigma", self.window_sigma.to_string()),
            ("freeze_wbw", self.freeze_wbw.to_string()),
            ("leaky_slope", self.leaky_slope.to_string()),
            ("eps_norm", self.eps_norm.to_string()),
            ("seed", self.seed.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("train_size", self.train_size.to_string()),
            ("val_size", self.val_size.to_string()),
            ("train_single_only", self.train_single_only.to_string()),
            ("weight_answer_words", self.weight_answer_words.to_string()),
            ("split_word_weights", self.split_word_weights.to_string()),
            ("share_window_params", self.share_window_params.to_string()),
            ("no_ngram", a.no_ngram.to_string()),
            ("no_top_n", a.no_top_n.to_string()),
            ("no_sentential", a.no_sentential.to_string()),
            ("no_sws", a.no_sws.to_string()),
            ("no_swd", a.no_swd.to_string()),
            ("uniform_word_weights", a.uniform_word_weights.to_string()),
            ("overrides", self.overrides.join(",")),
            ("data_dir", p(&self.data_dir)),
            ("embeddings", p(&self.embeddings)),
            ("parses_dir", p(&self.parses_dir)),
            ("stopwords_file", p(&self.stopwords_file)),
            ("overrides_file", p(&self.overrides_file)),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
