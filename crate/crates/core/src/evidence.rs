//! Scoring units: single sentences, contiguous sentence n-grams and the
//! top-N pseudo-sentence.

use std::ops::Range;

use crate::corpus::Story;

/// Pooling level of a unit. The index order is the layout of the pooled
/// score vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Unigram,
    Bigram,
    Trigram,
    TopN,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Unigram, Level::Bigram, Level::Trigram, Level::TopN];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Sentence count of an n-gram level.
    pub fn ngram(n: usize) -> Option<Level> {
        match n {
            1 => Some(Level::Unigram),
            2 => Some(Level::Bigram),
            3 => Some(Level::Trigram),
            _ => None,
        }
    }
}

/// A scoring unit: global passage token positions, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub level: Level,
    /// Sentence indices the unit was built from, in story order.
    pub sentences: Vec<usize>,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnitSet {
    levels: [Vec<Unit>; 4],
}

impl UnitSet {
    pub fn level(&self, level: Level) -> &[Unit] {
        &self.levels[level.index()]
    }

    pub fn set_level(&mut self, level: Level, units: Vec<Unit>) {
        self.levels[level.index()] = units;
    }

    pub fn total(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }
}

/// Token ranges of each sentence in the passage's global token positions.
pub fn sentence_spans(story: &Story) -> Vec<Range<usize>> {
    let mut start = 0;
    story
        .sentences
        .iter()
        .map(|s| {
            let r = start..start + s.len();
            start = r.end;
            r
        })
        .collect()
}

fn unit_from(level: Level, spans: &[Range<usize>], sentences: Vec<usize>) -> Unit {
    let positions = sentences.iter().flat_map(|&j| spans[j].clone()).collect();
    Unit {
        level,
        sentences,
        positions,
    }
}

/// Contiguous sentence concatenations for n = 1..=max_n (at most 3).
pub fn build_ngrams(spans: &[Range<usize>], max_n: usize) -> UnitSet {
    let mut set = UnitSet::default();
    for n in 1..=max_n.min(3) {
        let level = Level::ngram(n).expect("n in 1..=3");
        let units = (0..spans.len().saturating_sub(n - 1))
            .map(|j| unit_from(level, spans, (j..j + n).collect()))
            .collect();
        set.set_level(level, units);
    }
    set
}

/// Indices of the `n` highest scores (lower index wins ties), returned in
/// ascending index order.
pub fn select_top(scores: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx.sort_unstable();
    idx
}

/// The top-N pseudo-sentence: best-scoring sentences joined in story order.
/// `None` for a passage without sentences.
pub fn build_top_n(per_sentence_scores: &[f64], spans: &[Range<usize>], n: usize) -> Option<Unit> {
    if spans.is_empty() {
        return None;
    }
    let chosen = select_top(per_sentence_scores, n);
    Some(unit_from(Level::TopN, spans, chosen))
}
