//! Corpus layout on disk, the train/validation split and the shared
//! resources (embeddings, parses, word lists) a run needs.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::corpus::{parse_mctest, Story};
use crate::depgraph::{load_parse_dir, DependencyGraph};
use crate::error::{Error, Result};
use crate::lexicon::{load_embeddings, read_token_list, EmbeddingFormat, EmbeddingTable, QuestionStopwords};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Mc160,
    Mc500,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Mc160, Variant::Mc500];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Mc160 => "160",
            Variant::Mc500 => "500",
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Variant::Mc160 => "mc160",
            Variant::Mc500 => "mc500",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches("mc") {
            "160" => Ok(Variant::Mc160),
            "500" => Ok(Variant::Mc500),
            _ => Err(Error::InvalidArgument(format!("unknown variant {s:?} (expected 160 or 500)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidArgument(format!("unknown split {s:?} (expected train, dev or test)"))),
        }
    }
}

/// `(stories, answers)` paths, e.g. `mc500.test.tsv` and `mc500.test.ans`.
pub fn split_paths(data_dir: &Path, variant: Variant, split: Split) -> (PathBuf, PathBuf) {
    let stem = format!("{}.{}", variant.prefix(), split.name());
    (data_dir.join(format!("{stem}.tsv")), data_dir.join(format!("{stem}.ans")))
}

/// Loads one split. A missing answer file leaves gold labels empty.
pub fn load_split(data_dir: &Path, variant: Variant, split: Split) -> Result<Vec<Story>> {
    let (tsv, ans) = split_paths(data_dir, variant, split);
    if !tsv.exists() {
        return Err(Error::MissingInputs(vec![tsv]));
    }
    let ans = ans.exists().then_some(ans);
    parse_mctest(&tsv, ans.as_deref())
}

/// Every input `train` needs, in the order they are reported when absent.
pub fn required_inputs(config: &Config) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    match &config.data_dir {
        Some(dir) => {
            for v in Variant::ALL {
                for s in Split::ALL {
                    let (tsv, ans) = split_paths(dir, v, s);
                    paths.push(tsv);
                    paths.push(ans);
                }
            }
        }
        None => paths.push(PathBuf::from("<data_dir>")),
    }
    paths.push(config.embeddings.clone().unwrap_or_else(|| PathBuf::from("<embeddings>")));
    if let Some(p) = &config.parses_dir {
        paths.push(p.clone());
    }
    for p in [&config.stopwords_file, &config.overrides_file].into_iter().flatten() {
        paths.push(p.clone());
    }
    paths
}

/// Fails with every absent input listed at once.
pub fn check_inputs(config: &Config) -> Result<()> {
    let missing: Vec<PathBuf> = required_inputs(config).into_iter().filter(|p| !p.exists()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingInputs(missing))
    }
}

/// Merges the train and dev splits of both variants, shuffles them with
/// `seed` and cuts `train_size` then `val_size` stories.
pub fn train_val_split(mut pool: Vec<Story>, train_size: usize, val_size: usize, seed: u64) -> Result<(Vec<Story>, Vec<Story>)> {
    if pool.len() < train_size + val_size {
        return Err(Error::Config(format!(
            "pool has {} stories, split needs {} + {}",
            pool.len(),
            train_size,
            val_size
        )));
    }
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val = pool[train_size..train_size + val_size].to_vec();
    pool.truncate(train_size);
    Ok((pool, val))
}

pub fn load_pool(data_dir: &Path) -> Result<Vec<Story>> {
    let mut pool = Vec::new();
    for v in Variant::ALL {
        for s in [Split::Train, Split::Dev] {
            pool.extend(load_split(data_dir, v, s)?);
        }
    }
    Ok(pool)
}

/// Everything besides the corpus and the parameters that scoring reads.
#[derive(Debug, Clone)]
pub struct Resources {
    pub embeddings: EmbeddingTable,
    pub parses: Option<BTreeMap<String, DependencyGraph>>,
}

/// Every token that appears anywhere in `stories`.
pub fn corpus_vocabulary<'a>(stories: impl IntoIterator<Item = &'a Story>) -> HashSet<String> {
    let mut v = HashSet::new();
    for s in stories {
        for sent in &s.sentences {
            v.extend(sent.tokens().iter().cloned());
        }
        for q in &s.questions {
            v.extend(q.text.tokens().iter().cloned());
            for c in &q.candidates {
                v.extend(c.tokens().iter().cloned());
            }
        }
    }
    v
}

pub fn load_resources(config: &Config, vocab: Option<&HashSet<String>>) -> Result<Resources> {
    let emb_path = config
        .embeddings
        .as_ref()
        .ok_or_else(|| Error::Config("embeddings path is not set".into()))?;
    let embeddings = load_embeddings(emb_path, vocab, Some(config.dim), EmbeddingFormat::Auto)?;
    let parses = config.parses_dir.as_deref().map(load_parse_dir).transpose()?;
    Ok(Resources { embeddings, parses })
}

pub fn load_stopwords(config: &Config) -> Result<QuestionStopwords> {
    match &config.stopwords_file {
        Some(p) => Ok(QuestionStopwords::new(read_token_list(p)?)),
        None => Ok(QuestionStopwords::default()),
    }
}

pub fn load_overrides(config: &Config) -> Result<BTreeSet<String>> {
    let mut set: BTreeSet<String> = config.overrides.iter().cloned().collect();
    if let Some(p) = &config.overrides_file {
        set.extend(read_token_list(p)?);
    }
    Ok(set)
}
