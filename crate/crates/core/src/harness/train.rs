//! Per-question stochastic training with validation-based early stopping,
//! the end-to-end training run and the ablation sweep.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::checkpoint::{self, RngState};
use super::data::{
    check_inputs, corpus_vocabulary, load_overrides, load_pool, load_resources, load_split, load_stopwords,
    train_val_split, Resources, Split, Variant,
};
use super::eval::{evaluate_prepared, KindAccuracy, VariantReport};
use crate::config::Config;
use crate::corpus::{QuestionKind, QuestionRecord, Story};
use crate::error::{Error, Result};
use crate::lexicon::{compute_idf, init_word_weights};
use crate::numerics::{Adam, ParamStore};
use crate::perspectives::DropoutCtx;
use crate::scorer::{argmax4, apply_negation, Model, PreparedStory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 0 is the untrained model.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Running accuracy over the epoch's updates, dropout on.
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Epoch whose updates produced a non-finite value, if any.
    pub diverged_at: Option<usize>,
    #[serde(skip)]
    pub rng: RngState,
}

pub fn prepare_all(model: &Model, stories: &[Story], res: &Resources) -> Result<Vec<PreparedStory>> {
    stories
        .iter()
        .map(|s| model.prepare(s, &res.embeddings, res.parses.as_ref()))
        .collect()
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite { .. } | Error::NanGradient(_))
}

fn one_update(
    model: &mut Model,
    adam: &Adam,
    ps: &PreparedStory,
    q: &QuestionRecord,
    gold: usize,
    res: &Resources,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, bool)> {
    let mut dropout = DropoutCtx {
        p: model.config.dropout,
        training: model.config.dropout > 0.0,
        rng,
    };
    let mut fwd = model.score_question(ps, q, &res.embeddings, &mut dropout)?;
    let correct = argmax4(&apply_negation(fwd.values(), q.negated)) == gold;
    let loss = fwd.loss(gold, q.negated, model.config.margin)?;
    let value = fwd.graph.scalar(loss);
    model.store.zero_grads();
    fwd.graph.backward(loss, &mut model.store)?;
    adam.step(&mut model.store)?;
    Ok((value, correct))
}

/// Trains `model` in place. On return it holds the parameters with the best
/// validation accuracy seen, including the untrained starting point.
pub fn train(model: &mut Model, train_set: &[Story], val_set: &[Story], res: &Resources) -> Result<TrainOutcome> {
    let cfg = model.config.clone();
    let train_ps = prepare_all(model, train_set, res)?;
    let val_ps = prepare_all(model, val_set, res)?;
    let mut items: Vec<(usize, usize, usize)> = Vec::new();
    for (si, s) in train_set.iter().enumerate() {
        for (qi, q) in s.questions.iter().enumerate() {
            if cfg.train_single_only && q.kind != QuestionKind::One {
                continue;
            }
            if let Some(g) = q.gold {
                items.push((si, qi, g));
            }
        }
    }
    log::info!("training on {} questions, validating on {} stories", items.len(), val_set.len());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let adam = Adam::new(cfg.lr);
    let validate = |m: &Model| -> Result<f64> {
        Ok(evaluate_prepared(m, val_set, &val_ps, &res.embeddings, "val", "val")?.all.accuracy())
    };
    let initial = validate(model)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        mean_loss: f64::NAN,
        train_accuracy: f64::NAN,
        val_accuracy: initial,
    }];
    let mut best: (usize, f64, ParamStore) = (0, initial, model.store.clone());
    let mut diverged_at = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        items.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = KindAccuracy::default();
        let mut failed = None;
        for &(si, qi, gold) in &items {
            match one_update(model, &adam, &train_ps[si], &train_set[si].questions[qi], gold, res, &mut rng) {
                Ok((l, ok)) => {
                    loss_sum += l;
                    correct.total += 1;
                    correct.correct += usize::from(ok);
                }
                Err(e) if is_divergence(&e) => {
                    failed = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(e) = failed {
            log::error!("epoch {epoch}: {e}; restoring epoch {}", best.0);
            diverged_at = Some(epoch);
            break;
        }
        let val = validate(model)?;
        let rec = EpochRecord {
            epoch,
            mean_loss: loss_sum / items.len().max(1) as f64,
            train_accuracy: correct.accuracy(),
            val_accuracy: val,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train {:.2} val {:.2}",
            rec.mean_loss,
            rec.train_accuracy,
            rec.val_accuracy
        );
        history.push(rec);
        if val > best.1 {
            best = (epoch, val, model.store.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log::info!("no validation improvement for {stale} epochs, stopping");
                break;
            }
        }
    }
    model.store = best.2;
    Ok(TrainOutcome {
        history,
        best_epoch: best.0,
        best_val_accuracy: best.1,
        diverged_at,
        rng: RngState {
            seed: cfg.seed,
            word_pos: rng.get_word_pos(),
        },
    })
}

/// Loads every input named by `config`, splits the merged pool, builds
/// the word weights from it and trains.
pub fn run_training(config: &Config) -> Result<(Model, TrainOutcome)> {
    config.validate()?;
    check_inputs(config)?;
    let data_dir = config.data_dir.as_deref().expect("checked by check_inputs");
    let pool = load_pool(data_dir)?;
    let mut everything = pool.clone();
    for v in Variant::ALL {
        everything.extend(load_split(data_dir, v, Split::Test)?);
    }
    let res = load_resources(config, Some(&corpus_vocabulary(&everything)))?;
    let (train_set, val_set) = train_val_split(pool, config.train_size, config.val_size, config.seed)?;
    let mut idf_docs = train_set.clone();
    idf_docs.extend(val_set.iter().cloned());
    let weights = init_word_weights(&compute_idf(&idf_docs), &load_overrides(config)?);
    let mut model = Model::new(config.clone(), weights, load_stopwords(config)?)?;
    let outcome = train(&mut model, &train_set, &val_set, &res)?;
    Ok((model, outcome))
}

/// Evaluates on each requested variant's split.
pub fn evaluate_splits(model: &Model, data_dir: &Path, variants: &[Variant], split: Split, res: &Resources) -> Result<Vec<VariantReport>> {
    variants
        .iter()
        .map(|&v| {
            let stories = load_split(data_dir, v, split)?;
            let ps = prepare_all(model, &stories, res)?;
            evaluate_prepared(model, &stories, &ps, &res.embeddings, v.label(), split.name())
        })
        .collect()
}

/// Row labels of the ablation table, in order.
pub const ABLATION_ROWS: [&str; 7] = ["-", "n-gram", "Top N", "Sentential", "SW-sequential", "SW-dependency", "Word weights"];

/// Config for one ablation row: the base config with one component removed.
pub fn ablation_config(base: &Config, row: &str) -> Result<Config> {
    let mut c = base.clone();
    let a = &mut c.ablation;
    match row {
        "-" => {}
        "n-gram" => a.no_ngram = true,
        "Top N" => a.no_top_n = true,
        "Sentential" => a.no_sentential = true,
        "SW-sequential" => a.no_sws = true,
        "SW-dependency" => a.no_swd = true,
        "Word weights" => a.uniform_word_weights = true,
        other => return Err(Error::InvalidArgument(format!("unknown ablation row {other:?}"))),
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub report: VariantReport,
}

/// Retrains once per row and reports MCTest-500 test accuracy. Each row's
/// checkpoint is written to `checkpoint_dir`.
pub fn ablate(base: &Config, checkpoint_dir: &Path) -> Result<Vec<AblationRow>> {
    std::fs::create_dir_all(checkpoint_dir).map_err(|e| Error::io(checkpoint_dir, e))?;
    let data_dir = base
        .data_dir
        .as_deref()
        .ok_or_else(|| Error::Config("data_dir is not set".into()))?;
    let test = load_split(data_dir, Variant::Mc500, Split::Test)?;
    let res = load_resources(base, Some(&corpus_vocabulary(&test)))?;
    let mut rows = Vec::new();
    for (i, label) in ABLATION_ROWS.iter().enumerate() {
        log::info!("ablation row {label:?}");
        let cfg = ablation_config(base, label)?;
        let (model, outcome) = run_training(&cfg)?;
        checkpoint::save(&checkpoint_dir.join(format!("ablation-{i}.ckpt")), &model, outcome.rng)?;
        let ps = prepare_all(&model, &test, &res)?;
        let report = evaluate_prepared(&model, &test, &ps, &res.embeddings, "500", "test")?;
        rows.push(AblationRow {
            label: label.to_string(),
            report,
        });
    }
    Ok(rows)
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = format!("{:<14} {:>8} {:>8} {:>8}\n", "ablated", "single", "multiple", "all");
    for r in rows {
        s.push_str(&format!(
            "{:<14} {:>8.2} {:>8.2} {:>8.2}\n",
            r.label,
            r.report.single.accuracy(),
            r.report.multiple.accuracy(),
            r.report.all.accuracy()
        ));
    }
    s
}
