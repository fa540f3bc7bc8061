//! MCTest stories: TSV parsing, sentence segmentation, tokenization and
//! hypothesis formation.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Abbreviations whose trailing period neither ends a sentence nor splits off
/// as a token.
pub const ABBREVIATIONS: &[&str] = &["mr.", "mrs.", "ms.", "dr.", "st."];

const CLITICS: &[&str] = &["'s", "'re", "'ve", "'ll", "'d", "'m"];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    /// Panics if any token is empty.
    pub fn new(tokens: Vec<String>) -> Self {
        assert!(tokens.iter().all(|t| !t.is_empty()), "empty token");
        TokenSeq { tokens }
    }

    pub fn from_strs(tokens: &[&str]) -> Self {
        Self::new(tokens.iter().map(|t| t.to_string()).collect())
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

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.iter().any(|t| t == token)
    }

    pub fn concat(&self, other: &TokenSeq) -> TokenSeq {
        let mut tokens = self.tokens.clone();
        tokens.extend(other.tokens.iter().cloned());
        TokenSeq { tokens }
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionKind {
    One,
    Multiple,
}

impl QuestionKind {
    pub fn prefix(self) -> &'static str {
        match self {
            QuestionKind::One => "one",
            QuestionKind::Multiple => "multiple",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionRecord {
    pub kind: QuestionKind,
    pub raw: String,
    pub text: TokenSeq,
    pub raw_candidates: [String; 4],
    pub candidates: [TokenSeq; 4],
    pub gold: Option<usize>,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Story {
    pub id: String,
    pub properties: String,
    /// Unescaped passage text.
    pub text: String,
    pub sentences: Vec<TokenSeq>,
    pub questions: Vec<QuestionRecord>,
}

impl Story {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(TokenSeq::len).sum()
    }

    /// Identifier used for this story's sentence `index` in parse files.
    pub fn sentence_id(&self, index: usize) -> String {
        format!("{}.{}", self.id, index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypothesis {
    pub question: TokenSeq,
    pub answer: TokenSeq,
    pub combined: TokenSeq,
}

fn unescape(field: &str) -> String {
    field.replace("\\newline", "\n").replace("\\tab", "\t")
}

fn escape(text: &str) -> String {
    text.replace('\n', "\\newline").replace('\t', "\\tab")
}

fn split_question(field: &str) -> Option<(QuestionKind, &str)> {
    if let Some(rest) = field.strip_prefix("one:") {
        Some((QuestionKind::One, rest.trim_start()))
    } else if let Some(rest) = field.strip_prefix("multiple:") {
        Some((QuestionKind::Multiple, rest.trim_start()))
    } else {
        None
    }
}

/// Builds a story from its raw parts, segmenting and tokenizing the text.
pub fn build_story(id: &str, properties: &str, text: &str, questions: Vec<(QuestionKind, String, [String; 4])>) -> Story {
    let sentences = split_sentences(text)
        .iter()
        .map(|s| tokenize(s))
        .filter(|t| !t.is_empty())
        .collect();
    let questions = questions
        .into_iter()
        .map(|(kind, raw, answers)| {
            let text = tokenize(&raw);
            let candidates = [0, 1, 2, 3].map(|i| tokenize(&answers[i]));
            QuestionRecord {
                kind,
                negated: detect_negation(&text),
                raw,
                text,
                raw_candidates: answers,
                candidates,
                gold: None,
            }
        })
        .collect();
    Story {
        id: id.to_string(),
        properties: properties.to_string(),
        text: text.to_string(),
        sentences,
        questions,
    }
}

/// Parses MCTest TSV content. `path` is used for diagnostics only.
pub fn parse_mctest_str(content: &str, path: &Path) -> Result<Vec<Story>> {
    let mut stories = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 23 {
            return Err(Error::parse(path, lineno + 1, format!("expected 23 columns, found {}", cols.len())));
        }
        let mut questions = Vec::with_capacity(4);
        for q in 0..4 {
            let base = 3 + q * 5;
            let (kind, qtext) = split_question(cols[base]).ok_or_else(|| {
                Error::parse(path, lineno + 1, format!("unknown question prefix in {:?}", cols[base]))
            })?;
            let answers = [1, 2, 3, 4].map(|k| unescape(cols[base + k]));
            questions.push((kind, unescape(qtext), answers));
        }
        let story = build_story(cols[0], cols[1], &unescape(cols[2]), questions);
        if story.sentences.is_empty() {
            return Err(Error::parse(path, lineno + 1, "story has no sentences"));
        }
        stories.push(story);
    }
    Ok(stories)
}

/// Parses `.ans` content, one line of four letters per story.
pub fn parse_answers_str(content: &str, path: &Path) -> Result<Vec<[usize; 4]>> {
    let mut out = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(path, lineno + 1, format!("expected 4 answers, found {}", cols.len())));
        }
        let mut gold = [0; 4];
        for (g, c) in gold.iter_mut().zip(&cols) {
            *g = match c.trim() {
                "A" => 0,
                "B" => 1,
                "C" => 2,
                "D" => 3,
                other => {
                    return Err(Error::parse(path, lineno + 1, format!("answer letter {other:?} outside A-D")));
                }
            };
        }
        out.push(gold);
    }
    Ok(out)
}

/// Reads a story file and, optionally, its answer file.
pub fn parse_mctest(story_file: &Path, answer_file: Option<&Path>) -> Result<Vec<Story>> {
    let content = fs::read_to_string(story_file).map_err(|e| Error::io(story_file, e))?;
    let mut stories = parse_mctest_str(&content, story_file)?;
    if let Some(ans) = answer_file {
        let content = fs::read_to_string(ans).map_err(|e| Error::io(ans, e))?;
        let golds = parse_answers_str(&content, ans)?;
        if golds.len() != stories.len() {
            return Err(Error::parse(
                ans,
                golds.len() + 1,
                format!("{} answer lines for {} stories", golds.len(), stories.len()),
            ));
        }
        for (story, gold) in stories.iter_mut().zip(golds) {
            for (q, g) in story.questions.iter_mut().zip(gold) {
                q.gold = Some(g);
            }
        }
    }
    Ok(stories)
}

/// Writes stories back out in the same TSV dialect.
pub fn write_mctest(stories: &[Story]) -> String {
    let mut out = String::new();
    for s in stories {
        let mut cols = vec![s.id.clone(), s.properties.clone(), escape(&s.text)];
        for q in &s.questions {
            cols.push(format!("{}: {}", q.kind.prefix(), escape(&q.raw)));
            cols.extend(q.raw_candidates.iter().map(|a| escape(a)));
        }
        out.push_str(&cols.join("\t"));
        out.push('\n');
    }
    out
}

/// Writes gold labels in `.ans` form; questions without gold are written as `A`.
pub fn write_answers(stories: &[Story]) -> String {
    let mut out = String::new();
    for s in stories {
        let letters: Vec<String> = s
            .questions
            .iter()
            .map(|q| ((b'A' + q.gold.unwrap_or(0) as u8) as char).to_string())
            .collect();
        out.push_str(&letters.join("\t"));
        out.push('\n');
    }
    out
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn ends_with_abbreviation(text: &str) -> bool {
    let word = text
        .rsplit(|c: char| c.is_whitespace())
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric());
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Splits passage text into sentences at `.`, `!` or `?` followed by
/// whitespace or end of text. Terminator runs and closing quotes stay with
/// their sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminator(chars[j].1) || CLOSERS.contains(&chars[j].1)) {
            j += 1;
        }
        let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
        let single_period = c == '.' && j == i + 1;
        if at_boundary && !(single_period && ends_with_abbreviation(&text[start..pos + 1])) {
            let end = if j == chars.len() { text.len() } else { chars[j].0 };
            let sentence = text[start..end].trim();
            if !sentence.is_empty() {
                out.push(sentence.to_string());
            }
            start = end;
        }
        i = j;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits a word-ish chunk (no whitespace, no leading/trailing punctuation)
/// into a stem and clitic tokens.
fn split_clitics(word: &str, out: &mut Vec<String>) {
    if word.len() > 3 && word.ends_with("n't") {
        out.push(word[..word.len() - 3].to_string());
        out.push("n't".to_string());
        return;
    }
    for clitic in CLITICS {
        if word.len() > clitic.len() && word.ends_with(clitic) {
            out.push(word[..word.len() - clitic.len()].to_string());
            out.push(clitic.to_string());
            return;
        }
    }
    out.push(word.to_string());
}

fn tokenize_chunk(chunk: &str, out: &mut Vec<String>) {
    if ABBREVIATIONS.contains(&chunk) || CLITICS.contains(&chunk) || chunk == "n't" {
        out.push(chunk.to_string());
        return;
    }
    let chars: Vec<char> = chunk.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_word_char(c) {
            // word: alphanumerics joined by internal apostrophes, hyphens or periods
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j];
                if is_word_char(cj) {
                    j += 1;
                } else if matches!(cj, '\'' | '-' | '.' | ',') && j + 1 < chars.len() && is_word_char(chars[j + 1]) {
                    if cj == ',' && !(chars[j - 1].is_ascii_digit() && chars[j + 1].is_ascii_digit()) {
                        break;
                    }
                    if cj == '.' && !chars[j + 1].is_ascii_digit() {
                        break;
                    }
                    j += 2;
                } else {
                    break;
                }
            }
            let word: String = chars[i..j].iter().collect();
            split_clitics(&word, out);
            i = j;
        } else {
            let mut j = i + 1;
            if c == '.' || c == '-' {
                while j < chars.len() && chars[j] == c {
                    j += 1;
                }
            }
            out.push(chars[i..j].iter().collect());
            i = j;
        }
    }
}

/// Lowercases and splits text into word and punctuation tokens.
pub fn tokenize(text: &str) -> TokenSeq {
    let normalized = text.replace(['\u{2019}', '\u{2018}'], "'").replace(['\u{201c}', '\u{201d}'], "\"");
    let mut out = Vec::new();
    for chunk in normalized.to_lowercase().split_whitespace() {
        tokenize_chunk(chunk, &mut out);
    }
    TokenSeq::new(out)
}

/// Forms the hypothesis for one candidate by concatenating question and answer.
pub fn form_hypothesis(q: &QuestionRecord, candidate_index: usize) -> Result<Hypothesis> {
    let answer = q
        .candidates
        .get(candidate_index)
        .ok_or_else(|| Error::InvalidArgument(format!("candidate index {candidate_index} out of range 0-3")))?
        .clone();
    Ok(Hypothesis {
        question: q.text.clone(),
        combined: q.text.concat(&answer),
        answer,
    })
}

/// True when the question contains both "which" and "not" (or "n't").
pub fn detect_negation(q: &TokenSeq) -> bool {
    q.contains("which") && (q.contains("not") || q.contains("n't"))
}
