//! Seeded generator of small separable corpora with matching embeddings.
//!
//! Each question targets one passage sentence. The correct candidate is two
//! content words from that sentence; every distractor shares at most one
//! word with any sentence.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{build_story, QuestionKind, Story};
use crate::error::Result;
use crate::lexicon::EmbeddingTable;

const FUNCTION_WORDS: [&str; 6] = ["the", "a", "and", "with", "near", "saw"];
const ONSETS: [&str; 10] = ["b", "d", "f", "g", "k", "l", "m", "p", "r", "t"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub stories: usize,
    pub sentences: usize,
    pub questions: usize,
    pub content_words: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            stories: 20,
            sentences: 5,
            questions: 4,
            content_words: 120,
            dim: 16,
            seed: 1,
        }
    }
}

/// Pronounceable distinct pseudo-word for `i`.
pub fn pseudo_word(i: usize) -> String {
    let mut w = String::new();
    let mut n = i;
    loop {
        w.push_str(ONSETS[n % ONSETS.len()]);
        n /= ONSETS.len();
        w.push_str(VOWELS[n % VOWELS.len()]);
        n /= VOWELS.len();
        if n == 0 {
            break;
        }
        n -= 1;
    }
    w.push('x');
    w
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim)
        .map(|_| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Random unit vectors for every content and function word and for ".",
/// "?" and "what".
pub fn embeddings(spec: &SyntheticSpec) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed);
    let mut words: Vec<String> = (0..spec.content_words).map(pseudo_word).collect();
    words.extend(FUNCTION_WORDS.iter().map(|s| s.to_string()));
    words.extend([".", "?", "what"].map(String::from));
    EmbeddingTable::from_entries(spec.dim, words.into_iter().map(|w| {
        let v = unit_gaussian(&mut rng, spec.dim);
        (w, v)
    }))
}

/// Generates `spec.stories` stories with gold labels. Story ids are
/// `"{prefix}{index}"`.
pub fn stories(spec: &SyntheticSpec, prefix: &str) -> Vec<Story> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab: Vec<usize> = (0..spec.content_words).collect();
    (0..spec.stories)
        .map(|si| {
            let picked: Vec<usize> = vocab.choose_multiple(&mut rng, spec.sentences * 3).copied().collect();
            let sentences: Vec<[usize; 3]> = picked.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
            let in_story: BTreeSet<usize> = picked.iter().copied().collect();
            let outside: Vec<usize> = vocab.iter().copied().filter(|w| !in_story.contains(w)).collect();
            let text = sentences
                .iter()
                .map(|s| {
                    let [a, b, c] = s.map(pseudo_word);
                    format!("The {a} saw {b} near the {c}.")
                })
                .collect::<Vec<_>>()
                .join(" ");
            let questions = (0..spec.questions)
                .map(|_| {
                    let target = sentences[rng.gen_range(0..sentences.len())];
                    let mut order = target;
                    order.shuffle(&mut rng);
                    let [cue, x, y] = order;
                    let correct = format!("{} and {}", pseudo_word(x), pseudo_word(y));
                    let mut cands: Vec<String> = (0..3)
                        .map(|_| {
                            let half = picked[rng.gen_range(0..picked.len())];
                            let other = outside[rng.gen_range(0..outside.len())];
                            if rng.gen() {
                                format!("{} and {}", pseudo_word(half), pseudo_word(other))
                            } else {
                                format!("{} and {}", pseudo_word(other), pseudo_word(half))
                            }
                        })
                        .collect();
                    let gold = rng.gen_range(0..4);
                    cands.insert(gold, correct);
                    let kind = if rng.gen() { QuestionKind::One } else { QuestionKind::Multiple };
                    let raw = format!("What was with the {}?", pseudo_word(cue));
                    (kind, raw, [cands[0].clone(), cands[1].clone(), cands[2].clone(), cands[3].clone()], gold)
                })
                .collect::<Vec<_>>();
            let golds: Vec<usize> = questions.iter().map(|q| q.3).collect();
            let mut story = build_story(
                &format!("{prefix}{si}"),
                "synthetic",
                &text,
                questions.into_iter().map(|(k, r, c, _)| (k, r, c)).collect(),
            );
            for (q, g) in story.questions.iter_mut().zip(golds) {
                q.gold = Some(g);
            }
            story
        })
        .collect()
}
