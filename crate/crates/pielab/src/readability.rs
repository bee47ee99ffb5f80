//! Text-complexity battery: six grade-level formulas, difficult-word count,
//! and token length, plus the PIE-to-all ratio analysis.
//!
//! Formula constants are pinned here so every consumer agrees bit for bit:
//!
//! - ARI            = 4.71*(letters/words) + 0.5*(words/sentences) - 21.43
//! - Coleman-Liau   = 0.0588*L - 0.296*S - 15.8, with L = letters and
//!   S = sentences per 100 words
//! - Flesch-Kincaid = 0.39*(words/sentences) + 11.8*(syllables/words) - 15.59
//! - Linsear Write  = r/2 if r > 20 else r/2 - 1, with r = points/sentences
//!   and points = 1 per word of <= 2 syllables, 3 per word of >= 3
//! - Gunning Fog    = 0.4*((words/sentences) + 100*complex/words)
//! - Dale-Chall     = 0.1579*PDW + 0.0496*(words/sentences), + 3.6365 when
//!   PDW > 5, with PDW = 100*difficult/words
//!
//! Words come from the corpus tokenizer; sentences are split on the raw text.

use std::collections::HashSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{tokenize, RawExample};
use crate::pie::PIEVerdict;

#[derive(Debug, Error)]
pub enum ReadabilityError {
    #[error("easy-word list {0} is empty")]
    EmptyWordList(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Lowercase set of easily understandable words; tokens outside it count as
/// difficult.
#[derive(Debug, Clone)]
pub struct EasyWordList {
    words: HashSet<String>,
}

impl EasyWordList {
    /// Load a plain-text list, one word per line. Blank lines are skipped;
    /// lookup is case-insensitive.
    pub fn load(path: &Path) -> Result<Self, ReadabilityError> {
        let text = std::fs::read_to_string(path).map_err(|e| ReadabilityError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let list = Self::from_words(text.lines());
        if list.words.is_empty() {
            return Err(ReadabilityError::EmptyWordList(path.to_path_buf()));
        }
        Ok(list)
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        EasyWordList {
            words: words
                .into_iter()
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// The word list shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_words(include_str!("../data/easy_words.txt").lines())
    }

    /// Small fixed list for test fixtures only; production paths use
    /// [`EasyWordList::builtin`] or [`EasyWordList::load`].
    pub fn small_fallback() -> Self {
        Self::from_words(SMALL_FALLBACK)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

const SMALL_FALLBACK: [&str; 200] = [
    "a",
    "about",
    "after",
    "again",
    "all",
    "also",
    "always",
    "an",
    "and",
    "any",
    "are",
    "as",
    "ask",
    "at",
    "away",
    "back",
    "ball",
    "be",
    "been",
    "before",
    "best",
    "better",
    "big",
    "black",
    "blue",
    "book",
    "both",
    "boy",
    "but",
    "by",
    "call",
    "came",
    "can",
    "car",
    "cat",
    "city",
    "close",
    "cold",
    "come",
    "could",
    "cut",
    "day",
    "did",
    "do",
    "does",
    "dog",
    "down",
    "each",
    "eat",
    "end",
    "even",
    "every",
    "eye",
    "face",
    "far",
    "feet",
    "few",
    "find",
    "first",
    "five",
    "food",
    "for",
    "form",
    "found",
    "four",
    "from",
    "get",
    "girl",
    "give",
    "go",
    "good",
    "got",
    "great",
    "green",
    "group",
    "grow",
    "had",
    "hand",
    "hard",
    "has",
    "have",
    "he",
    "head",
    "hear",
    "help",
    "her",
    "here",
    "high",
    "him",
    "his",
    "home",
    "house",
    "how",
    "i",
    "idea",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "just",
    "keep",
    "kind",
    "know",
    "land",
    "large",
    "last",
    "learn",
    "leave",
    "left",
    "let",
    "life",
    "light",
    "like",
    "line",
    "little",
    "live",
    "long",
    "look",
    "made",
    "make",
    "man",
    "many",
    "mat",
    "may",
    "me",
    "mean",
    "men",
    "might",
    "mile",
    "more",
    "most",
    "mother",
    "move",
    "much",
    "must",
    "my",
    "name",
    "near",
    "need",
    "never",
    "new",
    "next",
    "night",
    "no",
    "not",
    "now",
    "number",
    "of",
    "off",
    "often",
    "old",
    "on",
    "once",
    "one",
    "only",
    "open",
    "or",
    "other",
    "our",
    "out",
    "over",
    "own",
    "page",
    "paper",
    "part",
    "people",
    "place",
    "play",
    "point",
    "put",
    "read",
    "right",
    "run",
    "said",
    "same",
    "sat",
    "saw",
    "say",
    "school",
    "sea",
    "second",
    "see",
    "set",
    "she",
    "show",
    "side",
    "small",
    "so",
    "some",
    "something",
    "sound",
    "still",
    "such",
    "take",
    "tell",
    "than",
    "that",
    "the",
];

/// Raw counts feeding the grade formulas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextStats {
    pub words: usize,
    pub sentences: usize,
    /// Alphabetic characters inside tokens.
    pub letters: usize,
    pub syllables_per_word: Vec<usize>,
    /// Words of three or more syllables.
    pub complex_word_count: usize,
    /// Tokens absent from the easy-word list (exact match, no stemming).
    pub difficult_word_count: usize,
    /// Token count; same tokens the classifier consumes.
    pub token_length: usize,
}

impl TextStats {
    pub fn total_syllables(&self) -> usize {
        self.syllables_per_word.iter().sum()
    }
}

/// Split on '.', '!', '?', ';' followed by whitespace or end of text. Empty
/// and punctuation-only segments are dropped; text with no terminator counts
/// as one sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    const TERMINATORS: [char; 4] = ['.', '!', '?', ';'];
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut push = |segment: &mut String| {
        let trimmed = segment.trim();
        if trimmed
            .chars()
            .any(|c| !TERMINATORS.contains(&c) && !c.is_whitespace())
        {
            sentences.push(trimmed.to_string());
        }
        segment.clear();
    };
    for (i, &c) in chars.iter().enumerate() {
        current.push(c);
        if TERMINATORS.contains(&c) {
            let at_end = i + 1 == chars.len();
            let before_space = chars.get(i + 1).is_some_and(|n| n.is_whitespace());
            if at_end || before_space {
                push(&mut current);
            }
        }
    }
    push(&mut current);
    sentences
}

/// Count maximal vowel groups (a, e, i, o, u, y), subtracting one for a
/// trailing silent 'e' unless it ends a consonant+"le" pair. Clamped to at
/// least 1. Deterministic heuristic, no dictionary.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphabetic())
        .collect();
    if letters.is_empty() {
        return 1;
    }
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0usize;
    let mut in_group = false;
    for &c in &letters {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
                in_group = true;
            }
        } else {
            in_group = false;
        }
    }
    let n = letters.len();
    if letters[n - 1] == 'e' {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

/// Tokenize, split sentences, and count everything the formulas need. Empty
/// text yields all-zero stats with zero sentences.
pub fn compute_stats(text: &str, easy_list: &EasyWordList) -> TextStats {
    let words = tokenize(text);
    if words.is_empty() {
        return TextStats {
            words: 0,
            sentences: 0,
            letters: 0,
            syllables_per_word: Vec::new(),
            complex_word_count: 0,
            difficult_word_count: 0,
            token_length: 0,
        };
    }
    let sentences = split_sentences(text).len().max(1);
    let letters = words
        .iter()
        .map(|w| w.chars().filter(|c| c.is_alphabetic()).count())
        .sum();
    let syllables_per_word: Vec<usize> = words.iter().map(|w| count_syllables(w)).collect();
    let complex_word_count = syllables_per_word.iter().filter(|&&s| s >= 3).count();
    let difficult_word_count = words.iter().filter(|w| !easy_list.contains(w)).count();
    TextStats {
        token_length: words.len(),
        words: words.len(),
        sentences,
        letters,
        syllables_per_word,
        complex_word_count,
        difficult_word_count,
    }
}

/// The six grade-level scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradeScores {
    pub ari: f64,
    pub coleman_liau: f64,
    pub flesch_kincaid: f64,
    pub linsear_write: f64,
    pub gunning_fog: f64,
    pub dale_chall: f64,
}

/// Evaluate every formula; `None` is the defined marker for empty text.
pub fn grade_scores(stats: &TextStats) -> Option<GradeScores> {
    if stats.words == 0 || stats.sentences == 0 {
        return None;
    }
    let words = stats.words as f64;
    let sentences = stats.sentences as f64;
    let letters = stats.letters as f64;
    let syllables = stats.total_syllables() as f64;
    let wps = words / sentences;

    let ari = 4.71 * (letters / words) + 0.5 * wps - 21.43;

    let l = 100.0 * letters / words;
    let s = 100.0 * sentences / words;
    let coleman_liau = 0.0588 * l - 0.296 * s - 15.8;

    let flesch_kincaid = 0.39 * wps + 11.8 * (syllables / words) - 15.59;

    let easy_words = stats
        .syllables_per_word
        .iter()
        .filter(|&&sy| sy <= 2)
        .count() as f64;
    let hard_words = stats.complex_word_count as f64;
    let points = easy_words + 3.0 * hard_words;
    let r = points / sentences;
    let linsear_write = if r > 20.0 { r / 2.0 } else { r / 2.0 - 1.0 };

    let gunning_fog = 0.4 * (wps + 100.0 * hard_words / words);

    let pdw = 100.0 * stats.difficult_word_count as f64 / words;
    let mut dale_chall = 0.1579 * pdw + 0.0496 * wps;
    if pdw > 5.0 {
        dale_chall += 3.6365;
    }

    Some(GradeScores {
        ari,
        coleman_liau,
        flesch_kincaid,
        linsear_write,
        gunning_fog,
        dale_chall,
    })
}

/// Names of the eight reported metrics, in CSV column order.
pub const METRIC_NAMES: [&str; 8] = [
    "ari",
    "coleman_liau",
    "flesch_kincaid",
    "linsear_write",
    "gunning_fog",
    "dale_chall",
    "difficult_words",
    "token_length",
];

/// The full battery for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleScores {
    pub example_id: u64,
    /// `None` marks empty text; count metrics below stay defined.
    pub grades: Option<GradeScores>,
    pub difficult_words: usize,
    pub token_length: usize,
}

impl ExampleScores {
    /// Metric value by index into [`METRIC_NAMES`]. Grade metrics of empty
    /// texts are `None`.
    pub fn metric(&self, index: usize) -> Option<f64> {
        match index {
            0..=5 => self.grades.map(|g| match index {
                0 => g.ari,
                1 => g.coleman_liau,
                2 => g.flesch_kincaid,
                3 => g.linsear_write,
                4 => g.gunning_fog,
                _ => g.dale_chall,
            }),
            6 => Some(self.difficult_words as f64),
            7 => Some(self.token_length as f64),
            _ => None,
        }
    }
}

/// Score every example of a split.
pub fn score_examples(examples: &[RawExample], easy_list: &EasyWordList) -> Vec<ExampleScores> {
    examples
        .iter()
        .map(|ex| {
            let stats = compute_stats(&ex.text, easy_list);
            ExampleScores {
                example_id: ex.id,
                grades: grade_scores(&stats),
                difficult_words: stats.difficult_word_count,
                token_length: stats.token_length,
            }
        })
        .collect()
}

/// One `readability_ratios.csv` row: mean metric over PIEs divided by the
/// mean over all examples. `None` marks an undefined ratio (empty PIE set or
/// zero denominator), never silently 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub pruner_id: String,
    pub threshold: f64,
    pub metric: &'static str,
    pub ratio: Option<f64>,
}

fn mean_metric(
    scores: &[ExampleScores],
    subset: Option<&HashSet<u64>>,
    index: usize,
) -> Option<f64> {
    let mut total = 0.0f64;
    let mut count = 0usize;
    for s in scores {
        if let Some(ids) = subset {
            if !ids.contains(&s.example_id) {
                continue;
            }
        }
        if let Some(v) = s.metric(index) {
            total += v;
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

/// Build the ratio table for a set of conditions, one verdict list per
/// (pruner, threshold), plus an across-pruner mean line per threshold
/// (pruner_id "mean").
pub fn ratio_report(
    scores: &[ExampleScores],
    conditions: &[(String, f64, Vec<PIEVerdict>)],
) -> Vec<RatioRow> {
    let mut rows = Vec::new();
    for (pruner_id, threshold, verdicts) in conditions {
        let pie_ids: HashSet<u64> = verdicts
            .iter()
            .filter(|v| v.is_pie)
            .map(|v| v.example_id)
            .collect();
        for (mi, metric) in METRIC_NAMES.iter().enumerate() {
            let ratio = if pie_ids.is_empty() {
                None
            } else {
                match (
                    mean_metric(scores, Some(&pie_ids), mi),
                    mean_metric(scores, None, mi),
                ) {
                    (Some(pie_mean), Some(all_mean)) if all_mean != 0.0 => {
                        Some(pie_mean / all_mean)
                    }
                    _ => None,
                }
            };
            rows.push(RatioRow {
                pruner_id: pruner_id.clone(),
                threshold: *threshold,
                metric,
                ratio,
            });
        }
    }
    // Across-pruner mean line per (threshold, metric).
    let mut thresholds: Vec<f64> = conditions.iter().map(|(_, t, _)| *t).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    for &t in &thresholds {
        for (mi, metric) in METRIC_NAMES.iter().enumerate() {
            let defined: Vec<f64> = rows
                .iter()
                .filter(|r| {
                    r.threshold == t && r.metric == METRIC_NAMES[mi] && r.pruner_id != "mean"
                })
                .filter_map(|r| r.ratio)
                .collect();
            let ratio = if defined.is_empty() {
                None
            } else {
                Some(defined.iter().sum::<f64>() / defined.len() as f64)
            };
            rows.push(RatioRow {
                pruner_id: "mean".to_string(),
                threshold: t,
                metric,
                ratio,
            });
        }
    }
    rows
}

/// Write `readability.csv` for one condition: per-example scores plus the
/// PIE flag. Grade columns of empty texts are left blank.
pub fn write_readability_csv(
    path: &Path,
    scores: &[ExampleScores],
    verdicts: &[PIEVerdict],
) -> Result<(), ReadabilityError> {
    let is_pie: std::collections::BTreeMap<u64, bool> =
        verdicts.iter().map(|v| (v.example_id, v.is_pie)).collect();
    let mut out = Vec::new();
    let io = |e: std::io::Error| ReadabilityError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    writeln!(
        out,
        "example_id,is_pie,ari,coleman_liau,flesch_kincaid,linsear_write,gunning_fog,dale_chall,difficult_words,token_length"
    )
    .map_err(io)?;
    for s in scores {
        let pie = is_pie.get(&s.example_id).copied().unwrap_or(false);
        let grade = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.example_id,
            pie,
            grade(s.metric(0)),
            grade(s.metric(1)),
            grade(s.metric(2)),
            grade(s.metric(3)),
            grade(s.metric(4)),
            grade(s.metric(5)),
            s.difficult_words,
            s.token_length
        )
        .map_err(io)?;
    }
    std::fs::write(path, out).map_err(|e| ReadabilityError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Write `readability_ratios.csv`: pruner_id, threshold, metric, ratio.
pub fn write_ratios_csv(path: &Path, rows: &[RatioRow]) -> Result<(), ReadabilityError> {
    let mut out = Vec::new();
    let io = |e: std::io::Error| ReadabilityError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    writeln!(out, "pruner_id,threshold,metric,ratio").map_err(io)?;
    for r in rows {
        let ratio = r.ratio.map_or("undefined".to_string(), |v| format!("{v}"));
        writeln!(
            out,
            "{},{},{},{}",
            r.pruner_id, r.threshold, r.metric, ratio
        )
        .map_err(io)?;
    }
    std::fs::write(path, out).map_err(|e| ReadabilityError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
