//! Corpus loading, tokenization, and fixed-length integer encoding.
//!
//! A corpus lives in a directory with a `manifest.json` plus one JSONL file
//! per split (`train.jsonl`, `validation.jsonl`, `test.jsonl`). Texts are
//! lowercased, stripped of punctuation and digits, truncated to a power-of-two
//! token budget, and padded with the reserved PAD id. Unknown tokens map to
//! the reserved OOV id. A synthetic generator provides deterministic
//! desk-scale corpora with a tunable fraction of hard examples.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rngutil::derive_seed;

/// Reserved token id used to fill positions past `true_length`.
pub const PAD_ID: u32 = 0;
/// Reserved token id for tokens absent from the vocabulary.
pub const OOV_ID: u32 = 1;

/// Errors raised while loading, validating, or generating corpora.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing corpus file {0}")]
    MissingFile(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {msg}")]
    BadManifest { path: PathBuf, msg: String },
    #[error("malformed record at {file} line {line}: {msg}")]
    BadRecord {
        file: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("empty label set at line {line} of {file}")]
    EmptyLabels { file: PathBuf, line: usize },
    #[error("label index {label} out of range (classes: {classes}) at {file} line {line}")]
    LabelOutOfRange {
        file: PathBuf,
        line: usize,
        label: usize,
        classes: usize,
    },
    #[error("duplicate example id {id} at {file} line {line}")]
    DuplicateId { file: PathBuf, line: usize, id: u64 },
    #[error("lengths must be non-empty")]
    EmptyLengths,
    #[error("coverage must lie in (0, 1], got {0}")]
    InvalidCoverage(f64),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// Whether each example carries exactly one class or a set of classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Single,
    Multi,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelKind::Single => write!(f, "single"),
            LabelKind::Multi => write!(f, "multi"),
        }
    }
}

/// One data point: an id, the raw text, and its class indices.
///
/// Single-label examples carry exactly one label; multi-label examples carry
/// a deduplicated, ascending label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExample {
    pub id: u64,
    pub text: String,
    pub labels: Vec<usize>,
}

/// The ordered class list shared by every split of a corpus.
///
/// Class order is fixed for the lifetime of an experiment; majority
/// tie-breaking depends on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub class_names: Vec<String>,
    pub kind: LabelKind,
}

impl LabelSpace {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Token-to-id mapping built from the train split only.
///
/// Ids are dense in `[0, size)`, with 0 and 1 reserved for PAD and OOV;
/// corpus tokens start at id 2 and are ordered by descending train frequency
/// (ties broken lexicographically).
#[derive(Debug, Clone)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    frequencies: Vec<u32>,
}

impl Vocabulary {
    /// Build from the train split. Frequencies count token occurrences, not
    /// documents.
    pub fn build(train: &[RawExample]) -> Self {
        let mut counts: HashMap<String, u32> = HashMap::new();
        for ex in train {
            for tok in tokenize(&ex.text) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut ordered: Vec<(String, u32)> = counts.into_iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut token_to_id = HashMap::with_capacity(ordered.len());
        let mut id_to_token = vec!["<pad>".to_string(), "<oov>".to_string()];
        let mut frequencies = vec![0u32, 0u32];
        for (tok, count) in ordered {
            token_to_id.insert(tok.clone(), id_to_token.len() as u32);
            id_to_token.push(tok);
            frequencies.push(count);
        }
        Vocabulary {
            token_to_id,
            id_to_token,
            frequencies,
        }
    }

    /// Total id count including the two reserved ids.
    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Token string for an id; reserved ids render as `<pad>` / `<oov>`.
    pub fn token_of(&self, id: u32) -> &str {
        &self.id_to_token[id as usize]
    }

    /// Train-split occurrence count for an id (0 for the reserved ids).
    pub fn frequency(&self, id: u32) -> u32 {
        self.frequencies[id as usize]
    }
}

/// A fixed-length encoded example ready for batching.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub id: u64,
    /// Exactly `max_tokens` entries; `token_ids[i] == PAD_ID` for `i >= true_length`.
    pub token_ids: Vec<u32>,
    pub true_length: usize,
    /// One-hot (single-label) or multi-hot (multi-label) target vector.
    pub label_vector: Vec<f32>,
}

/// The three splits of one corpus plus its label space.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplits {
    pub train: Vec<RawExample>,
    pub validation: Vec<RawExample>,
    pub test: Vec<RawExample>,
    pub label_space: LabelSpace,
    /// Manual truncation override from the manifest, when present.
    pub max_tokens_override: Option<usize>,
}

impl CorpusSplits {
    /// Truncation budget: the manifest override when present, otherwise the
    /// power-of-two rule computed on train-split token counts.
    pub fn max_tokens(&self, coverage: f64) -> Result<usize, CorpusError> {
        if let Some(m) = self.max_tokens_override {
            return Ok(m);
        }
        let lengths: Vec<usize> = self.train.iter().map(|e| tokenize(&e.text).len()).collect();
        compute_max_tokens(&lengths, coverage)
    }

    pub fn encode_split(
        &self,
        split: &[RawExample],
        vocab: &Vocabulary,
        max_tokens: usize,
    ) -> Vec<EncodedExample> {
        split
            .iter()
            .map(|ex| encode(ex, vocab, max_tokens, &self.label_space))
            .collect()
    }
}

/// Lowercase, strip punctuation and digits, split on whitespace.
///
/// Every character that is not a letter is replaced by a space, except an
/// apostrophe between two letters ("don't" stays one token). Deterministic;
/// empty input yields an empty list.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut cleaned = String::with_capacity(lower.len());
    for (i, &c) in chars.iter().enumerate() {
        let keep = c.is_alphabetic()
            || (c == '\''
                && i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphabetic()
                && chars[i + 1].is_alphabetic());
        cleaned.push(if keep { c } else { ' ' });
    }
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Smallest power of two covering at least `coverage` of the given lengths.
///
/// Returns the smallest `2^k` (k >= 0) such that the fraction of lengths
/// `<= 2^k` is at least `coverage`. Monotone in `coverage`.
pub fn compute_max_tokens(lengths: &[usize], coverage: f64) -> Result<usize, CorpusError> {
    if lengths.is_empty() {
        return Err(CorpusError::EmptyLengths);
    }
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(CorpusError::InvalidCoverage(coverage));
    }
    let n = lengths.len() as f64;
    let mut cap = 1usize;
    loop {
        let covered = lengths.iter().filter(|&&l| l <= cap).count() as f64;
        if covered / n >= coverage {
            return Ok(cap);
        }
        cap *= 2;
    }
}

/// Encode one example against a train-built vocabulary.
///
/// Keeps the token prefix (tokens beyond `max_tokens` are dropped from the
/// end), maps unknown tokens to OOV, and pads the remainder.
pub fn encode(
    example: &RawExample,
    vocab: &Vocabulary,
    max_tokens: usize,
    label_space: &LabelSpace,
) -> EncodedExample {
    let tokens = tokenize(&example.text);
    let true_length = tokens.len().min(max_tokens);
    let mut token_ids = Vec::with_capacity(max_tokens);
    for tok in tokens.iter().take(true_length) {
        token_ids.push(vocab.id_of(tok).unwrap_or(OOV_ID));
    }
    token_ids.resize(max_tokens, PAD_ID);

    let mut label_vector = vec![0.0f32; label_space.num_classes()];
    for &l in &example.labels {
        label_vector[l] = 1.0;
    }
    EncodedExample {
        id: example.id,
        token_ids,
        true_length,
        label_vector,
    }
}

/// Recover the token strings of an encoded example (OOV positions render as
/// `<oov>`). Inverse of [`encode`] up to truncation and OOV substitution.
pub fn decode(encoded: &EncodedExample, vocab: &Vocabulary) -> Vec<String> {
    encoded.token_ids[..encoded.true_length]
        .iter()
        .map(|&id| vocab.token_of(id).to_string())
        .collect()
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    classes: Vec<String>,
    kind: LabelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_tokens_override: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct Record {
    id: u64,
    text: String,
    labels: Vec<usize>,
}

/// Load a corpus directory (`manifest.json` + three JSONL splits).
///
/// The label kind and class list come from the manifest. Record ids must be
/// unique within a split and disjoint across splits. Multi-label duplicate
/// labels are deduplicated with a warning; single-label records must carry
/// exactly one label.
pub fn load_corpus(dir: &Path) -> Result<CorpusSplits, CorpusError> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(CorpusError::MissingFile(manifest_path));
    }
    let raw = fs::read_to_string(&manifest_path).map_err(|e| CorpusError::Io {
        path: manifest_path.clone(),
        source: e,
    })?;
    let manifest: Manifest = serde_json::from_str(&raw).map_err(|e| CorpusError::BadManifest {
        path: manifest_path.clone(),
        msg: e.to_string(),
    })?;
    if manifest.classes.len() < 2 {
        return Err(CorpusError::BadManifest {
            path: manifest_path,
            msg: format!("need at least 2 classes, got {}", manifest.classes.len()),
        });
    }
    let label_space = LabelSpace {
        class_names: manifest.classes,
        kind: manifest.kind,
    };

    let mut seen_ids: HashSet<u64> = HashSet::new();
    let mut load_split = |name: &str| -> Result<Vec<RawExample>, CorpusError> {
        let path = dir.join(format!("{name}.jsonl"));
        if !path.is_file() {
            return Err(CorpusError::MissingFile(path));
        }
        let file = fs::File::open(&path).map_err(|e| CorpusError::Io {
            path: path.clone(),
            source: e,
        })?;
        let reader = BufReader::new(file);
        let mut split_ids: HashSet<u64> = HashSet::new();
        let mut out = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| CorpusError::Io {
                path: path.clone(),
                source: e,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| CorpusError::BadRecord {
                file: path.clone(),
                line: line_no,
                msg: e.to_string(),
            })?;
            if rec.labels.is_empty() {
                return Err(CorpusError::EmptyLabels {
                    file: path.clone(),
                    line: line_no,
                });
            }
            for &l in &rec.labels {
                if l >= label_space.num_classes() {
                    return Err(CorpusError::LabelOutOfRange {
                        file: path.clone(),
                        line: line_no,
                        label: l,
                        classes: label_space.num_classes(),
                    });
                }
            }
            let labels = match label_space.kind {
                LabelKind::Single => {
                    if rec.labels.len() != 1 {
                        return Err(CorpusError::BadRecord {
                            file: path.clone(),
                            line: line_no,
                            msg: format!(
                                "single-label corpus requires exactly one label, got {}",
                                rec.labels.len()
                            ),
                        });
                    }
                    rec.labels
                }
                LabelKind::Multi => {
                    let mut set: Vec<usize> = rec.labels.clone();
                    set.sort_unstable();
                    set.dedup();
                    if set.len() != rec.labels.len() {
                        log::warn!(
                            "deduplicated labels {:?} -> {:?} at {} line {}",
                            rec.labels,
                            set,
                            path.display(),
                            line_no
                        );
                    }
                    set
                }
            };
            if !split_ids.insert(rec.id) || !seen_ids.insert(rec.id) {
                return Err(CorpusError::DuplicateId {
                    file: path.clone(),
                    line: line_no,
                    id: rec.id,
                });
            }
            out.push(RawExample {
                id: rec.id,
                text: rec.text,
                labels,
            });
        }
        Ok(out)
    };

    let train = load_split("train")?;
    let validation = load_split("validation")?;
    let test = load_split("test")?;
    Ok(CorpusSplits {
        train,
        validation,
        test,
        label_space,
        max_tokens_override: manifest.max_tokens_override,
    })
}

/// Write a corpus to the directory layout that [`load_corpus`] reads.
pub fn write_corpus(splits: &CorpusSplits, dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|e| CorpusError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let manifest = Manifest {
        classes: splits.label_space.class_names.clone(),
        kind: splits.label_space.kind,
        max_tokens_override: splits.max_tokens_override,
    };
    let manifest_path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, body).map_err(|e| CorpusError::Io {
        path: manifest_path,
        source: e,
    })?;
    for (name, split) in [
        ("train", &splits.train),
        ("validation", &splits.validation),
        ("test", &splits.test),
    ] {
        let path = dir.join(format!("{name}.jsonl"));
        let mut file = fs::File::create(&path).map_err(|e| CorpusError::Io {
            path: path.clone(),
            source: e,
        })?;
        for ex in split.iter() {
            let line = serde_json::to_string(ex).expect("record serializes");
            writeln!(file, "{line}").map_err(|e| CorpusError::Io {
                path: path.clone(),
                source: e,
            })?;
        }
    }
    Ok(())
}

fn default_hard_fraction() -> f64 {
    0.25
}

/// Size, class, and difficulty knobs for the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub seed: u64,
    /// Fraction of examples that are long, weakly class-indicative, and full
    /// of rare tokens.
    #[serde(default = "default_hard_fraction")]
    pub hard_fraction: f64,
    pub kind: LabelKind,
}

struct WordPools {
    /// Per-class lists of strongly class-indicative words.
    signal: Vec<Vec<String>>,
    /// Shared filler words, frequent enough to always enter the vocabulary.
    common: Vec<String>,
    /// Large pool of words that appear at most a handful of times each.
    rare: Vec<String>,
}

const SYLLABLES: [&str; 24] = [
    "ba", "ce", "di", "fo", "gu", "han", "jel", "kim", "lor", "mun", "nev", "pol", "qua", "rin",
    "sol", "tam", "ude", "vin", "wex", "yal", "zor", "eth", "ista", "ombre",
];

fn make_word(rng: &mut ChaCha8Rng, min_syll: usize, max_syll: usize) -> String {
    let n = rng.gen_range(min_syll..=max_syll);
    let mut w = String::new();
    for _ in 0..n {
        w.push_str(SYLLABLES[rng.gen_range(0..SYLLABLES.len())]);
    }
    w
}

fn build_pools(classes: usize, seed: u64) -> WordPools {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "pools"));
    let mut used: HashSet<String> = HashSet::new();
    let fresh = |rng: &mut ChaCha8Rng, min_s: usize, max_s: usize, used: &mut HashSet<String>| loop {
        let w = make_word(rng, min_s, max_s);
        if used.insert(w.clone()) {
            return w;
        }
    };

    let mut signal = Vec::with_capacity(classes);
    for _ in 0..classes {
        let mut words = Vec::with_capacity(20);
        for _ in 0..20 {
            words.push(fresh(&mut rng, 2, 3, &mut used));
        }
        signal.push(words);
    }
    // A base of real function words keeps the readability battery meaningful.
    let mut common: Vec<String> = [
        "the", "a", "an", "and", "or", "but", "of", "in", "on", "at", "to", "from", "with", "for",
        "by", "about", "over", "under", "it", "they", "we", "you", "she", "he", "this", "that",
        "was", "were", "is", "are", "be", "been", "has", "have", "had", "will", "would", "can",
        "could", "not", "very", "quite", "rather", "some", "many", "few", "most", "each", "every",
        "other", "such", "only", "also", "then", "there", "here", "when", "where", "while",
        "after", "before", "again", "once", "more", "less", "still", "just", "even", "both",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for _ in 0..150 {
        common.push(fresh(&mut rng, 1, 2, &mut used));
    }
    let mut rare = Vec::with_capacity(1500);
    for _ in 0..1500 {
        rare.push(fresh(&mut rng, 3, 5, &mut used));
    }
    WordPools {
        signal,
        common,
        rare,
    }
}

/// Skewed single-label class weights: weight of class c is 1/(c+1), normalized.
pub fn synthetic_class_weights(classes: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..classes).map(|c| 1.0 / (c as f64 + 1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Largest-remainder apportionment of `n` items over probabilities `p`.
fn apportion(n: usize, p: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = p.iter().map(|&q| (q * n as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = p
        .iter()
        .enumerate()
        .map(|(c, &q)| (c, q * n as f64 - counts[c] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    for k in 0..(n - assigned) {
        counts[remainders[k % p.len()].0] += 1;
    }
    counts
}

fn compose_text(
    rng: &mut ChaCha8Rng,
    pools: &WordPools,
    label_classes: &[usize],
    hard: bool,
) -> String {
    // Hard examples are longer, carry weaker signal, draw much of their
    // vocabulary from the rare pool, and 40% of their signal words come from
    // a uniformly random class, which makes them genuinely ambiguous.
    let (len, signal_prob, rare_prob, confusion) = if hard {
        (rng.gen_range(30..70), 0.15, 0.5, 0.4)
    } else {
        (rng.gen_range(10..24), 0.45, 0.0, 0.0)
    };
    let classes = pools.signal.len();
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        let r: f64 = rng.gen();
        let word = if r < signal_prob {
            let class = if rng.gen::<f64>() < confusion {
                rng.gen_range(0..classes)
            } else {
                label_classes[rng.gen_range(0..label_classes.len())]
            };
            let list = &pools.signal[class];
            &list[rng.gen_range(0..list.len())]
        } else if r < signal_prob + (1.0 - signal_prob) * rare_prob {
            &pools.rare[rng.gen_range(0..pools.rare.len())]
        } else {
            &pools.common[rng.gen_range(0..pools.common.len())]
        };
        words.push(word.clone());
    }
    // Sentence breaks every 6-9 words so the readability battery sees
    // realistic sentence lengths.
    let mut text = String::new();
    let mut until_break = rng.gen_range(6..10);
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            text.push(' ');
        }
        text.push_str(w);
        until_break -= 1;
        if until_break == 0 && i + 1 < words.len() {
            text.push('.');
            until_break = rng.gen_range(6..10);
        }
    }
    text.push('.');
    text
}

/// Generate a deterministic synthetic corpus.
///
/// Single-label: class frequencies follow [`synthetic_class_weights`]
/// exactly (largest-remainder apportionment, then shuffle). Multi-label:
/// per-class membership is Bernoulli with skewed probabilities, empty sets
/// resampled to one class. A `hard_fraction` of examples is longer, weakly
/// class-indicative, and drawn mostly from a large rare-word pool.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<CorpusSplits, CorpusError> {
    if spec.classes < 2 {
        return Err(CorpusError::InvalidSpec(format!(
            "need at least 2 classes, got {}",
            spec.classes
        )));
    }
    for (name, n) in [
        ("train", spec.train),
        ("validation", spec.validation),
        ("test", spec.test),
    ] {
        if n < 10 {
            return Err(CorpusError::InvalidSpec(format!(
                "{name} split needs at least 10 examples, got {n}"
            )));
        }
    }
    if !(0.0..=1.0).contains(&spec.hard_fraction) {
        return Err(CorpusError::InvalidSpec(format!(
            "hard_fraction must lie in [0, 1], got {}",
            spec.hard_fraction
        )));
    }

    let pools = build_pools(spec.classes, spec.seed);
    let weights = synthetic_class_weights(spec.classes);
    let mut next_id: u64 = 0;

    let mut gen_split = |name: &str, n: usize| -> Vec<RawExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, name));
        let label_sets: Vec<Vec<usize>> = match spec.kind {
            LabelKind::Single => {
                let counts = apportion(n, &weights);
                let mut labels: Vec<Vec<usize>> = Vec::with_capacity(n);
                for (c, &count) in counts.iter().enumerate() {
                    labels.extend(std::iter::repeat_n(vec![c], count));
                }
                labels.shuffle(&mut rng);
                labels
            }
            LabelKind::Multi => (0..n)
                .map(|_| {
                    let mut set: Vec<usize> = (0..spec.classes)
                        .filter(|&c| rng.gen::<f64>() < 0.55 / (c as f64 + 1.0))
                        .collect();
                    if set.is_empty() {
                        let r: f64 = rng.gen();
                        let mut acc = 0.0;
                        let mut chosen = spec.classes - 1;
                        for (c, &w) in weights.iter().enumerate() {
                            acc += w;
                            if r < acc {
                                chosen = c;
                                break;
                            }
                        }
                        set.push(chosen);
                    }
                    set
                })
                .collect(),
        };
        label_sets
            .into_iter()
            .map(|labels| {
                let hard = rng.gen::<f64>() < spec.hard_fraction;
                let text = compose_text(&mut rng, &pools, &labels, hard);
                let id = next_id;
                next_id += 1;
                RawExample { id, text, labels }
            })
            .collect()
    };

    let train = gen_split("train", spec.train);
    let validation = gen_split("validation", spec.validation);
    let test = gen_split("test", spec.test);
    let label_space = LabelSpace {
        class_names: (0..spec.classes).map(|c| format!("class_{c}")).collect(),
        kind: spec.kind,
    };
    Ok(CorpusSplits {
        train,
        validation,
        test,
        label_space,
        max_tokens_override: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_space() -> LabelSpace {
        LabelSpace {
            class_names: vec!["a".into(), "b".into(), "c".into()],
            kind: LabelKind::Single,
        }
    }

    #[test]
    fn tokenize_strips_case_and_punctuation() {
        assert_eq!(tokenize("The cat sat."), vec!["the", "cat", "sat"]);
    }

    #[test]
    fn tokenize_drops_digits_and_symbols() {
        assert_eq!(tokenize("Price: 42 dollars!"), vec!["price", "dollars"]);
    }

    #[test]
    fn tokenize_empty_input() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_keeps_internal_apostrophe() {
        assert_eq!(tokenize("Don't stop"), vec!["don't", "stop"]);
        assert_eq!(tokenize("'quoted'"), vec!["quoted"]);
    }

    #[test]
    fn max_tokens_power_of_two_rule() {
        // 85th-percentile length 430 -> 512; 242 -> 256.
        let long: Vec<usize> = (1..=100).map(|i| if i <= 85 { 430 } else { 900 }).collect();
        assert_eq!(compute_max_tokens(&long, 0.85).unwrap(), 512);
        let mid: Vec<usize> = (1..=100).map(|i| if i <= 85 { 242 } else { 600 }).collect();
        assert_eq!(compute_max_tokens(&mid, 0.85).unwrap(), 256);
    }

    #[test]
    fn max_tokens_degenerate_cases() {
        assert_eq!(compute_max_tokens(&[1, 1, 1], 0.85).unwrap(), 1);
        let lengths = [4, 4, 4, 4, 4, 4, 4, 4, 4, 100];
        assert_eq!(compute_max_tokens(&lengths, 0.85).unwrap(), 4);
        assert!(matches!(
            compute_max_tokens(&[], 0.85),
            Err(CorpusError::EmptyLengths)
        ));
        assert!(matches!(
            compute_max_tokens(&[3], 0.0),
            Err(CorpusError::InvalidCoverage(_))
        ));
    }

    #[test]
    fn encode_pads_truncates_and_maps_oov() {
        let train = vec![RawExample {
            id: 0,
            text: "alpha beta gamma alpha".into(),
            labels: vec![0],
        }];
        let vocab = Vocabulary::build(&train);
        let space = single_space();

        let short = RawExample {
            id: 1,
            text: "alpha beta gamma".into(),
            labels: vec![1],
        };
        let enc = encode(&short, &vocab, 5, &space);
        assert_eq!(enc.true_length, 3);
        assert_eq!(enc.token_ids[3], PAD_ID);
        assert_eq!(enc.token_ids[4], PAD_ID);
        assert_eq!(enc.label_vector, vec![0.0, 1.0, 0.0]);

        let long = RawExample {
            id: 2,
            text: "alpha beta gamma alpha beta gamma alpha".into(),
            labels: vec![0],
        };
        let enc = encode(&long, &vocab, 4, &space);
        assert_eq!(enc.true_length, 4);
        assert!(enc.token_ids.iter().all(|&t| t != PAD_ID));

        let unknown = RawExample {
            id: 3,
            text: "alpha zzz".into(),
            labels: vec![2],
        };
        let enc = encode(&unknown, &vocab, 4, &space);
        assert_eq!(enc.token_ids[1], OOV_ID);
    }

    #[test]
    fn vocab_ids_dense_and_frequency_ordered() {
        let train = vec![RawExample {
            id: 0,
            text: "b b b a a c".into(),
            labels: vec![0],
        }];
        let vocab = Vocabulary::build(&train);
        assert_eq!(vocab.size(), 5);
        assert_eq!(vocab.id_of("b"), Some(2));
        assert_eq!(vocab.id_of("a"), Some(3));
        assert_eq!(vocab.id_of("c"), Some(4));
        assert_eq!(vocab.frequency(2), 3);
    }

    #[test]
    fn vocab_ignores_non_train_splits() {
        let train = vec![RawExample {
            id: 0,
            text: "alpha beta".into(),
            labels: vec![0],
        }];
        let vocab = Vocabulary::build(&train);
        assert_eq!(vocab.id_of("gamma"), None);
        assert_eq!(vocab.size(), 4);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            classes: 3,
            train: 60,
            validation: 20,
            test: 20,
            seed: 7,
            hard_fraction: 0.3,
            kind: LabelKind::Single,
        };
        let a = generate_synthetic_corpus(&spec).unwrap();
        let b = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_class_frequencies_match_configured_skew() {
        let spec = SyntheticSpec {
            classes: 3,
            train: 2000,
            validation: 400,
            test: 400,
            seed: 0,
            hard_fraction: 0.25,
            kind: LabelKind::Single,
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let weights = synthetic_class_weights(3);
        let mut counts = [0usize; 3];
        for ex in &corpus.train {
            counts[ex.labels[0]] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            let freq = count as f64 / corpus.train.len() as f64;
            assert!(
                (freq - weights[c]).abs() < 0.05,
                "class {c}: freq {freq} vs weight {}",
                weights[c]
            );
        }
    }

    #[test]
    fn synthetic_hard_fraction_zero_means_uniform_lengths() {
        let spec = SyntheticSpec {
            classes: 2,
            train: 200,
            validation: 10,
            test: 10,
            seed: 1,
            hard_fraction: 0.0,
            kind: LabelKind::Single,
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        for ex in &corpus.train {
            let len = tokenize(&ex.text).len();
            assert!((10..24).contains(&len), "easy example length {len}");
        }
    }

    #[test]
    fn synthetic_ids_disjoint_across_splits() {
        let spec = SyntheticSpec {
            classes: 2,
            train: 30,
            validation: 10,
            test: 10,
            seed: 3,
            hard_fraction: 0.2,
            kind: LabelKind::Multi,
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let mut ids = HashSet::new();
        for ex in corpus
            .train
            .iter()
            .chain(&corpus.validation)
            .chain(&corpus.test)
        {
            assert!(ids.insert(ex.id), "duplicate id {}", ex.id);
            assert!(!ex.labels.is_empty());
        }
    }

    #[test]
    fn manifest_override_beats_computed_max_tokens() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("manifest.json"),
            r#"{"classes": ["x", "y"], "kind": "single", "max_tokens_override": 128}"#,
        )
        .unwrap();
        fs::write(
            dir.path().join("train.jsonl"),
            "{\"id\": 0, \"text\": \"a b c\", \"labels\": [0]}\n",
        )
        .unwrap();
        fs::write(dir.path().join("validation.jsonl"), "").unwrap();
        fs::write(dir.path().join("test.jsonl"), "").unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.max_tokens_override, Some(128));
        // The power-of-two rule would give 4; the override wins.
        assert_eq!(corpus.max_tokens(0.85).unwrap(), 128);
    }

    #[test]
    fn corpus_roundtrip_through_disk() {
        let spec = SyntheticSpec {
            classes: 3,
            train: 20,
            validation: 10,
            test: 10,
            seed: 5,
            hard_fraction: 0.5,
            kind: LabelKind::Multi,
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        let loaded = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus, loaded);
    }

    #[test]
    fn load_rejects_empty_label_set() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("manifest.json"),
            r#"{"classes": ["x", "y"], "kind": "multi"}"#,
        )
        .unwrap();
        fs::write(
            dir.path().join("train.jsonl"),
            "{\"id\": 0, \"text\": \"ok\", \"labels\": [0]}\n{\"id\": 1, \"text\": \"bad\", \"labels\": []}\n",
        )
        .unwrap();
        fs::write(dir.path().join("validation.jsonl"), "").unwrap();
        fs::write(dir.path().join("test.jsonl"), "").unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        match err {
            CorpusError::EmptyLabels { line, .. } => assert_eq!(line, 2),
            other => panic!("expected EmptyLabels, got {other:?}"),
        }
    }

    #[test]
    fn load_deduplicates_multi_labels() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("manifest.json"),
            r#"{"classes": ["x", "y", "z"], "kind": "multi"}"#,
        )
        .unwrap();
        fs::write(
            dir.path().join("train.jsonl"),
            "{\"id\": 0, \"text\": \"t\", \"labels\": [0, 2, 2]}\n",
        )
        .unwrap();
        fs::write(dir.path().join("validation.jsonl"), "").unwrap();
        fs::write(dir.path().join("test.jsonl"), "").unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.train[0].labels, vec![0, 2]);
    }

    #[test]
    fn load_rejects_label_out_of_range_and_duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("manifest.json"),
            r#"{"classes": ["x", "y"], "kind": "single"}"#,
        )
        .unwrap();
        fs::write(
            dir.path().join("train.jsonl"),
            "{\"id\": 0, \"text\": \"t\", \"labels\": [5]}\n",
        )
        .unwrap();
        fs::write(dir.path().join("validation.jsonl"), "").unwrap();
        fs::write(dir.path().join("test.jsonl"), "").unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(CorpusError::LabelOutOfRange { label: 5, .. })
        ));

        fs::write(
            dir.path().join("train.jsonl"),
            "{\"id\": 0, \"text\": \"t\", \"labels\": [0]}\n{\"id\": 0, \"text\": \"u\", \"labels\": [1]}\n",
        )
        .unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(CorpusError::DuplicateId { id: 0, .. })
        ));
    }

    #[test]
    fn load_reports_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(CorpusError::MissingFile(_))
        ));
    }

    proptest! {
        #[test]
        fn decode_recovers_prefix_with_oov_substitution(
            words in proptest::collection::vec("[a-z]{1,8}", 1..30),
            max_tokens in 1usize..40,
        ) {
            let train = vec![RawExample {
                id: 0,
                text: words[..words.len() / 2 + 1].join(" "),
                labels: vec![0],
            }];
            let vocab = Vocabulary::build(&train);
            let space = LabelSpace {
                class_names: vec!["a".into(), "b".into()],
                kind: LabelKind::Single,
            };
            let ex = RawExample { id: 1, text: words.join(" "), labels: vec![1] };
            let enc = encode(&ex, &vocab, max_tokens, &space);
            let decoded = decode(&enc, &vocab);
            let expect: Vec<String> = words
                .iter()
                .take(max_tokens)
                .map(|w| {
                    if vocab.id_of(w).is_some() { w.clone() } else { "<oov>".to_string() }
                })
                .collect();
            prop_assert_eq!(decoded, expect);
        }

        #[test]
        fn max_tokens_monotone_in_coverage(
            lengths in proptest::collection::vec(1usize..300, 1..50),
            a in 0.05f64..1.0,
            b in 0.05f64..1.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let ra = compute_max_tokens(&lengths, lo).unwrap();
            let rb = compute_max_tokens(&lengths, hi).unwrap();
            prop_assert!(ra <= rb);
        }

        #[test]
        fn tokenize_idempotent_on_own_output(text in "\\PC{0,80}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }
    }
}
