use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcrank::config::Config;
use mcrank::corpus::Story;
use mcrank::depgraph::{check_alignment, linearize};
use mcrank::harness::checkpoint;
use mcrank::harness::data::{check_inputs, corpus_vocabulary, load_resources, load_split, Split, Variant};
use mcrank::harness::eval::letter;
use mcrank::harness::train::{ablate, ablation_table, evaluate_splits, run_training};
use mcrank::harness::EvalReport;
use mcrank::lexicon::lookup;
use mcrank::{Error, Result};
use serde_json::json;

/// Multiple-choice reading comprehension by multi-perspective answer ranking.
#[derive(Parser)]
#[command(name = "mcrank", version)]
struct Cli {
    #[command(flatten)]
    paths: PathArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PathArgs {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Directory with mc160/mc500 .tsv and .ans files.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Word2vec embeddings (text or binary).
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Directory of CoNLL-U parses.
    #[arg(long, global = true)]
    parses_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate corpus, embeddings and parse alignment.
    CheckData,
    /// Train a model and write the best checkpoint.
    Train {
        #[arg(long)]
        out: PathBuf,
        /// Write the per-epoch history as JSON.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Evaluate a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// 160, 500 or all.
        #[arg(long, default_value = "all")]
        variant: String,
    },
    /// Retrain with each component removed and report MCTest-500 test accuracy.
    Ablate {
        #[arg(long)]
        checkpoint_dir: PathBuf,
    },
    /// Print the four candidate scores for one question as JSON lines.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        story: String,
        /// 1-based question number.
        #[arg(long)]
        question: usize,
    },
}

impl PathArgs {
    fn apply(&self, mut c: Config) -> Result<Config> {
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            c.set(k, v)?;
        }
        if let Some(p) = &self.data_dir {
            c.data_dir = Some(p.clone());
        }
        if let Some(p) = &self.embeddings {
            c.embeddings = Some(p.clone());
        }
        if let Some(p) = &self.parses_dir {
            c.parses_dir = Some(p.clone());
        }
        c.validate()?;
        Ok(c)
    }

    fn base_config(&self) -> Result<Config> {
        let c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        self.apply(c)
    }
}

fn data_dir(c: &Config) -> Result<&Path> {
    c.data_dir
        .as_deref()
        .ok_or_else(|| Error::Config("data_dir is not set (use --data-dir or a config file)".into()))
}

fn check_data(c: &Config) -> Result<()> {
    check_inputs(c)?;
    let dir = data_dir(c)?;
    let mut all: Vec<Story> = Vec::new();
    for v in Variant::ALL {
        for s in Split::ALL {
            let stories = load_split(dir, v, s)?;
            let (single, multiple) = stories.iter().flat_map(|st| &st.questions).fold((0, 0), |(a, b), q| match q.kind {
                mcrank::corpus::QuestionKind::One => (a + 1, b),
                mcrank::corpus::QuestionKind::Multiple => (a, b + 1),
            });
            println!("mc{v}.{s}: {} stories, {single} single, {multiple} multiple", stories.len());
            all.extend(stories);
        }
    }
    let res = load_resources(c, Some(&corpus_vocabulary(&all)))?;
    let (mut tokens, mut covered) = (0usize, 0usize);
    for s in &all {
        for sent in &s.sentences {
            tokens += sent.len();
            covered += lookup(sent, &res.embeddings).1.len();
        }
    }
    println!(
        "embeddings: {} vectors, {:.2}% of passage tokens covered",
        res.embeddings.len(),
        100.0 * covered as f64 / tokens.max(1) as f64
    );
    if let Some(parses) = &res.parses {
        let (mut parsed, mut total) = (0, 0);
        for s in &all {
            for (i, sent) in s.sentences.iter().enumerate() {
                total += 1;
                if let Some(g) = parses.get(&s.sentence_id(i)) {
                    check_alignment(g, sent)?;
                    linearize(g)?;
                    parsed += 1;
                }
            }
        }
        println!("parses: {parsed} of {total} sentences aligned, {} use sequential order", total - parsed);
    }
    println!("ok");
    Ok(())
}

fn train(c: &Config, out: &Path, history: Option<&Path>) -> Result<()> {
    let (model, outcome) = run_training(c)?;
    checkpoint::save(out, &model, outcome.rng)?;
    if let Some(h) = history {
        let text = serde_json::to_string_pretty(&outcome).expect("history serializes");
        std::fs::write(h, text).map_err(|e| Error::Io {
            path: h.to_path_buf(),
            source: e,
        })?;
    }
    println!(
        "best epoch {} with validation accuracy {:.2}%, checkpoint {}",
        outcome.best_epoch,
        outcome.best_val_accuracy,
        out.display()
    );
    match outcome.diverged_at {
        Some(epoch) => Err(Error::Diverged { epoch }),
        None => Ok(()),
    }
}

fn variants(arg: &str) -> Result<Vec<Variant>> {
    match arg {
        "all" => Ok(Variant::ALL.to_vec()),
        v => Ok(vec![v.parse()?]),
    }
}

fn eval(paths: &PathArgs, ckpt: &Path, split: &str, variant: &str) -> Result<()> {
    let split: Split = split.parse()?;
    let variants = variants(variant)?;
    let (mut model, _) = checkpoint::load(ckpt)?;
    model.config = paths.apply(model.config.clone())?;
    let dir = data_dir(&model.config)?.to_path_buf();
    let mut stories = Vec::new();
    for &v in &variants {
        stories.extend(load_split(&dir, v, split)?);
    }
    let res = load_resources(&model.config, Some(&corpus_vocabulary(&stories)))?;
    let report = EvalReport {
        variants: evaluate_splits(&model, &dir, &variants, split, &res)?,
    };
    print!("{}", report.to_table());
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}

fn score(paths: &PathArgs, ckpt: &Path, story_id: &str, question: usize) -> Result<()> {
    let (mut model, _) = checkpoint::load(ckpt)?;
    model.config = paths.apply(model.config.clone())?;
    let dir = data_dir(&model.config)?.to_path_buf();
    let mut found = None;
    'search: for v in Variant::ALL {
        for s in Split::ALL {
            let (tsv, _) = mcrank::harness::data::split_paths(&dir, v, s);
            if !tsv.exists() {
                continue;
            }
            if let Some(st) = load_split(&dir, v, s)?.into_iter().find(|st| st.id == story_id) {
                found = Some(st);
                break 'search;
            }
        }
    }
    let story = found.ok_or_else(|| Error::InvalidArgument(format!("story {story_id:?} not found under {}", dir.display())))?;
    let q = question
        .checked_sub(1)
        .and_then(|i| story.questions.get(i))
        .ok_or_else(|| Error::InvalidArgument(format!("question must be 1-{}", story.questions.len())))?;
    let res = load_resources(&model.config, Some(&corpus_vocabulary(std::slice::from_ref(&story))))?;
    let ps = model.prepare(&story, &res.embeddings, res.parses.as_ref())?;
    let scores = model.predict(&ps, q, &res.embeddings)?;
    for (i, s) in scores.iter().enumerate() {
        println!("{}", json!({"candidate": letter(i).to_string(), "answer": q.raw_candidates[i], "score": s}));
    }
    let chosen = mcrank::scorer::argmax4(&scores);
    let mut last = BTreeMap::new();
    last.insert("chosen", json!(letter(chosen).to_string()));
    last.insert("negated", json!(q.negated));
    if let Some(g) = q.gold {
        last.insert("gold", json!(letter(g).to_string()));
    }
    println!("{}", serde_json::to_string(&last).expect("json"));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::CheckData => check_data(&cli.paths.base_config()?),
        Command::Train { out, history } => train(&cli.paths.base_config()?, out, history.as_deref()),
        Command::Eval {
            checkpoint,
            split,
            variant,
        } => eval(&cli.paths, checkpoint, split, variant),
        Command::Ablate { checkpoint_dir } => {
            let rows = ablate(&cli.paths.base_config()?, checkpoint_dir)?;
            print!("{}", ablation_table(&rows));
            println!("{}", serde_json::to_string(&rows).expect("rows serialize"));
            Ok(())
        }
        Command::Score {
            checkpoint,
            story,
            question,
        } => score(&cli.paths, checkpoint, story, *question),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
