//! Accuracy by question kind, with the list of missed questions.

use std::fmt::Write as _;
use std::thread;

use serde::Serialize;

use crate::corpus::{QuestionKind, Story};
use crate::error::Result;
use crate::lexicon::EmbeddingTable;
use crate::scorer::{argmax4, Model, PreparedStory};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KindAccuracy {
    pub correct: usize,
    pub total: usize,
}

impl KindAccuracy {
    /// Percentage; 0 when there are no questions.
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }

    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += usize::from(ok);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionError {
    pub story: String,
    /// 1-based question number within the story.
    pub question: usize,
    pub predicted: char,
    pub gold: char,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VariantReport {
    pub variant: String,
    pub split: String,
    pub single: KindAccuracy,
    pub multiple: KindAccuracy,
    pub all: KindAccuracy,
    /// Questions skipped for lack of a gold label.
    pub excluded: usize,
    pub errors: Vec<QuestionError>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub variants: Vec<VariantReport>,
}

pub fn letter(i: usize) -> char {
    (b'A' + i as u8) as char
}

/// Negation-adjusted scores for every question of every story, in order.
pub fn predict_all(
    model: &Model,
    stories: &[Story],
    prepared: &[PreparedStory],
    emb: &EmbeddingTable,
) -> Result<Vec<Vec<[f64; 4]>>> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(stories.len().max(1));
    let chunk = stories.len().div_ceil(workers).max(1);
    thread::scope(|scope| {
        let handles: Vec<_> = stories
            .chunks(chunk)
            .zip(prepared.chunks(chunk))
            .map(|(ss, ps)| {
                scope.spawn(move || {
                    ss.iter()
                        .zip(ps)
                        .map(|(s, p)| s.questions.iter().map(|q| model.predict(p, q, emb)).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(stories.len());
        for h in handles {
            out.extend(h.join().expect("scoring thread panicked")?);
        }
        Ok(out)
    })
}

pub fn evaluate_prepared(
    model: &Model,
    stories: &[Story],
    prepared: &[PreparedStory],
    emb: &EmbeddingTable,
    variant: &str,
    split: &str,
) -> Result<VariantReport> {
    let scores = predict_all(model, stories, prepared, emb)?;
    let mut r = VariantReport {
        variant: variant.to_string(),
        split: split.to_string(),
        ..VariantReport::default()
    };
    for (story, per_q) in stories.iter().zip(&scores) {
        for (qi, (q, s)) in story.questions.iter().zip(per_q).enumerate() {
            let Some(gold) = q.gold else {
                r.excluded += 1;
                continue;
            };
            let pred = argmax4(s);
            let ok = pred == gold;
            match q.kind {
                QuestionKind::One => r.single.add(ok),
                QuestionKind::Multiple => r.multiple.add(ok),
            }
            r.all.add(ok);
            if !ok {
                r.errors.push(QuestionError {
                    story: story.id.clone(),
                    question: qi + 1,
                    predicted: letter(pred),
                    gold: letter(gold),
                });
            }
        }
    }
    if r.excluded > 0 {
        log::warn!("{variant} {split}: {} questions without gold labels excluded", r.excluded);
    }
    Ok(r)
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:<6} {:>16} {:>16} {:>16}",
            "variant", "split", "single", "multiple", "all"
        );
        let cell = |k: &KindAccuracy| format!("{:6.2} ({:>4})", k.accuracy(), k.total);
        for v in &self.variants {
            let _ = writeln!(
                s,
                "{:<8} {:<6} {:>16} {:>16} {:>16}",
                v.variant,
                v.split,
                cell(&v.single),
                cell(&v.multiple),
                cell(&v.all)
            );
        }
        s
    }
}
