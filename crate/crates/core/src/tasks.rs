//! Datasets: the Temporal Order task and text corpora for language modelling.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math::Rng;

/// What a batch is trained to predict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Targets {
    /// `[batch × time]`: the token following each input position.
    NextToken(Vec<Vec<usize>>),
    /// One class per sequence, predicted after the last step.
    Class(Vec<usize>),
    /// Nothing to predict (a leading truncation window of a classified sequence).
    None,
}

/// Rectangular block of token ids, `[batch × time]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceBatch {
    pub tokens: Vec<Vec<usize>>,
    pub targets: Targets,
    pub vocab_size: usize,
}

impl SequenceBatch {
    pub fn batch_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn seq_len(&self) -> usize {
        self.tokens.first().map_or(0, Vec::len)
    }

    /// Number of (sequence, step) pairs that carry a target.
    pub fn predicted_positions(&self) -> usize {
        match &self.targets {
            Targets::NextToken(t) => t.iter().map(Vec::len).sum(),
            Targets::Class(l) => l.len(),
            Targets::None => 0,
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Class(l) => Some(l),
            _ => None,
        }
    }

    /// Checks shape and id ranges against a model's vocabulary and output size.
    pub fn validate(&self, vocab: usize, outputs: usize) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::Empty("batch has no sequences"));
        }
        let len = self.seq_len();
        if len == 0 {
            return Err(Error::Empty("sequence has no steps"));
        }
        check_dim("batch vocabulary", vocab, self.vocab_size)?;
        for row in &self.tokens {
            check_dim("sequence length", len, row.len())?;
            if let Some(&bad) = row.iter().find(|&&t| t >= vocab) {
                return Err(Error::OutOfVocab { token: bad, vocab });
            }
        }
        match &self.targets {
            Targets::NextToken(t) => {
                check_dim("target rows", self.tokens.len(), t.len())?;
                for row in t {
                    check_dim("target length", len, row.len())?;
                    if let Some(&bad) = row.iter().find(|&&t| t >= outputs) {
                        return Err(Error::OutOfVocab { token: bad, vocab: outputs });
                    }
                }
            }
            Targets::Class(l) => {
                check_dim("labels", self.tokens.len(), l.len())?;
                if let Some(&bad) = l.iter().find(|&&c| c >= outputs) {
                    return Err(Error::OutOfVocab { token: bad, vocab: outputs });
                }
            }
            Targets::None => {}
        }
        Ok(())
    }

    /// Splits along time into consecutive windows of at most `len` steps.
    /// Class labels stay with the final window.
    pub fn split_time(&self, len: usize) -> Result<Vec<SequenceBatch>> {
        if len == 0 {
            return Err(Error::Config("window length must be positive".into()));
        }
        let total = self.seq_len();
        if total == 0 {
            return Err(Error::Empty("sequence has no steps"));
        }
        let mut out = Vec::new();
        let mut start = 0;
        while start < total {
            let end = (start + len).min(total);
            let tokens = self.tokens.iter().map(|r| r[start..end].to_vec()).collect();
            let targets = match &self.targets {
                Targets::NextToken(t) => Targets::NextToken(t.iter().map(|r| r[start..end].to_vec()).collect()),
                Targets::Class(l) if end == total => Targets::Class(l.clone()),
                Targets::Class(_) | Targets::None => Targets::None,
            };
            out.push(SequenceBatch {
                tokens,
                targets,
                vocab_size: self.vocab_size,
            });
            start = end;
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Temporal Order

/// Symbols `A, B, C, D` map to ids `0..4`.
pub const TEMPORAL_ORDER_VOCAB: usize = 4;
/// Classes `AA, AB, BA, BB` map to ids `0..4`.
pub const TEMPORAL_ORDER_CLASSES: usize = 4;
const SYMBOLS: [char; 4] = ['A', 'B', 'C', 'D'];
const CLASS_NAMES: [&str; 4] = ["AA", "AB", "BA", "BB"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalOrderMode {
    Short,
    Medium,
}

impl TemporalOrderMode {
    pub fn seq_len(self) -> usize {
        match self {
            TemporalOrderMode::Short => 15,
            TemporalOrderMode::Medium => 30,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TemporalOrderMode::Short => "short",
            TemporalOrderMode::Medium => "medium",
        }
    }
}

impl fmt::Display for TemporalOrderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemporalOrderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short" => Ok(TemporalOrderMode::Short),
            "medium" => Ok(TemporalOrderMode::Medium),
            other => Err(Error::Config(format!("unknown temporal-order mode `{other}`"))),
        }
    }
}

/// Sequences with one class label each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub sequences: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
    pub vocab_size: usize,
    pub classes: usize,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Consecutive batches in the given order; a short final batch is kept.
    pub fn batches(&self, batch: usize, order: Option<&[usize]>) -> Vec<SequenceBatch> {
        let default: Vec<usize>;
        let order = match order {
            Some(o) => o,
            None => {
                default = (0..self.len()).collect();
                &default
            }
        };
        order
            .chunks(batch.max(1))
            .map(|idx| SequenceBatch {
                tokens: idx.iter().map(|&i| self.sequences[i].clone()).collect(),
                targets: Targets::Class(idx.iter().map(|&i| self.labels[i]).collect()),
                vocab_size: self.vocab_size,
            })
            .collect()
    }

    /// One line per sequence: symbols, a tab, the class name.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * 40);
        for (seq, &label) in self.sequences.iter().zip(&self.labels) {
            s.extend(seq.iter().map(|&t| SYMBOLS[t]));
            s.push('\t');
            s.push_str(CLASS_NAMES[label]);
            s.push('\n');
        }
        s
    }

    /// Parses the format written by [`to_text`](Self::to_text).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut sequences = Vec::new();
        let mut labels = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (seq, label) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("line {}: expected `<sequence>\\t<label>`", n + 1)))?;
            let tokens = seq
                .chars()
                .map(|c| {
                    SYMBOLS
                        .iter()
                        .position(|&s| s == c)
                        .ok_or_else(|| Error::Config(format!("line {}: unknown symbol `{c}`", n + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            let label = CLASS_NAMES
                .iter()
                .position(|&c| c == label.trim())
                .ok_or_else(|| Error::Config(format!("line {}: unknown label `{label}`", n + 1)))?;
            sequences.push(tokens);
            labels.push(label);
        }
        if sequences.is_empty() {
            return Err(Error::Empty("dataset file has no sequences"));
        }
        let len = sequences[0].len();
        if let Some(bad) = sequences.iter().find(|s| s.len() != len) {
            return Err(Error::dim("sequence length", len, bad.len()));
        }
        Ok(LabeledDataset {
            sequences,
            labels,
            vocab_size: TEMPORAL_ORDER_VOCAB,
            classes: TEMPORAL_ORDER_CLASSES,
        })
    }
}

/// Generates `n` Temporal Order sequences.
///
/// Each sequence is cut into three equal parts. One symbol from `{A, B}` is
/// placed uniformly at random inside the first part and one inside the
/// second; every other position is uniform over `{C, D}`. The label is the
/// ordered pair of the two `{A, B}` symbols.
pub fn gen_temporal_order(mode: TemporalOrderMode, n: usize, rng: &mut Rng) -> LabeledDataset {
    let len = mode.seq_len();
    let part = len / 3;
    let mut sequences = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut seq: Vec<usize> = (0..len).map(|_| 2 + rng.below(2)).collect();
        let first = rng.below(2);
        let second = rng.below(2);
        let p1 = rng.below(part);
        let p2 = part + rng.below(part);
        seq[p1] = first;
        seq[p2] = second;
        sequences.push(seq);
        labels.push(first * 2 + second);
    }
    LabeledDataset {
        sequences,
        labels,
        vocab_size: TEMPORAL_ORDER_VOCAB,
        classes: TEMPORAL_ORDER_CLASSES,
    }
}

// ---------------------------------------------------------------------------
// Text corpora

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Char,
    Word,
}

impl FromStr for Unit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char" => Ok(Unit::Char),
            "word" => Ok(Unit::Word),
            other => Err(Error::Config(format!("unknown corpus unit `{other}`"))),
        }
    }
}

pub const UNK: &str = "<unk>";

/// Bijection between tokens and ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Ids by descending frequency, ties broken lexicographically.
    fn from_counts(counts: HashMap<String, usize>, cap: Option<usize>, with_unk: bool) -> Self {
        let mut entries: Vec<(String, usize)> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(cap) = cap {
            entries.truncate(cap);
        }
        let mut tokens: Vec<String> = entries.into_iter().map(|(t, _)| t).collect();
        if with_unk && !tokens.iter().any(|t| t == UNK) {
            tokens.push(UNK.to_string());
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub stream: Vec<usize>,
    pub vocab: Vocab,
    pub unit: Unit,
    pub train: Range<usize>,
    pub valid: Range<usize>,
    pub test: Range<usize>,
}

impl Corpus {
    pub fn train(&self) -> &[usize] {
        &self.stream[self.train.clone()]
    }

    pub fn valid(&self) -> &[usize] {
        &self.stream[self.valid.clone()]
    }

    pub fn test(&self) -> &[usize] {
        &self.stream[self.test.clone()]
    }

    /// Re-partitions the stream as contiguous train/valid/test fractions.
    pub fn with_split(mut self, train_frac: f64, valid_frac: f64) -> Result<Self> {
        if !(train_frac > 0.0 && valid_frac >= 0.0 && train_frac + valid_frac <= 1.0) {
            return Err(Error::Config(format!(
                "invalid split fractions train={train_frac} valid={valid_frac}"
            )));
        }
        let n = self.stream.len();
        let a = ((n as f64) * train_frac).round() as usize;
        let b = (a + ((n as f64) * valid_frac).round() as usize).min(n);
        self.train = 0..a;
        self.valid = a..b;
        self.test = b..n;
        Ok(self)
    }
}

fn split_units(text: &str, unit: Unit) -> Vec<String> {
    match unit {
        Unit::Char => text.chars().map(String::from).collect(),
        Unit::Word => text.split_whitespace().map(String::from).collect(),
    }
}

/// Builds a corpus from UTF-8 text.
///
/// Character units keep every distinct character. Word units split on
/// whitespace, keep the `vocab_cap` most frequent words and map the rest to
/// [`UNK`]. The whole stream is assigned to the training split; use
/// [`Corpus::with_split`] to carve out validation and test data.
pub fn corpus_from_text(text: &str, unit: Unit, vocab_cap: Option<usize>) -> Result<Corpus> {
    let units = split_units(text, unit);
    if units.is_empty() {
        return Err(Error::Empty("corpus text has no tokens"));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for u in &units {
        *counts.entry(u.clone()).or_default() += 1;
    }
    let cap = match unit {
        Unit::Char => None,
        Unit::Word => vocab_cap,
    };
    let vocab = Vocab::from_counts(counts, cap, unit == Unit::Word);
    let unk = vocab.id(UNK);
    let stream: Vec<usize> = units
        .iter()
        .map(|u| vocab.id(u).or(unk).expect("char vocab covers its own text"))
        .collect();
    let n = stream.len();
    Ok(Corpus {
        stream,
        vocab,
        unit,
        train: 0..n,
        valid: n..n,
        test: n..n,
    })
}

/// Reads a UTF-8 file with [`corpus_from_text`].
pub fn load_text_corpus(path: &Path, unit: Unit, vocab_cap: Option<usize>) -> Result<Corpus> {
    let text = fs::read_to_string(path)?;
    corpus_from_text(&text, unit, vocab_cap)
}

/// Builds one corpus from separate train/valid/test files.
///
/// The vocabulary comes from the training text; out-of-vocabulary units in
/// the other splits map to [`UNK`] (characters included).
pub fn load_split_corpus(train: &Path, valid: &Path, test: &Path, unit: Unit, vocab_cap: Option<usize>) -> Result<Corpus> {
    let texts = [fs::read_to_string(train)?, fs::read_to_string(valid)?, fs::read_to_string(test)?];
    let parts: Vec<Vec<String>> = texts.iter().map(|t| split_units(t, unit)).collect();
    if parts[0].is_empty() {
        return Err(Error::Empty("training text has no tokens"));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for u in &parts[0] {
        *counts.entry(u.clone()).or_default() += 1;
    }
    let cap = if unit == Unit::Word { vocab_cap } else { None };
    let needs_unk = unit == Unit::Word
        || parts[1..].iter().flatten().any(|u| !counts.contains_key(u));
    let vocab = Vocab::from_counts(counts, cap, needs_unk);
    let unk = vocab.id(UNK);
    let mut stream = Vec::new();
    let mut bounds = [0usize; 4];
    for (k, part) in parts.iter().enumerate() {
        stream.extend(part.iter().map(|u| vocab.id(u).or(unk).expect("unk present when needed")));
        bounds[k + 1] = stream.len();
    }
    Ok(Corpus {
        stream,
        vocab,
        unit,
        train: bounds[0]..bounds[1],
        valid: bounds[1]..bounds[2],
        test: bounds[2]..bounds[3],
    })
}

/// Cuts a token stream into `batch` contiguous rows and then into
/// non-overlapping windows of `seq_len` steps.
///
/// Window `k` of row `r` holds inputs `row[k·L .. k·L+L]` and targets shifted
/// by one. Consecutive windows continue the same rows, so state can be
/// carried between them. Tokens that do not fill a whole row or window are
/// dropped.
pub fn batch_lm(split: &[usize], vocab_size: usize, batch: usize, seq_len: usize) -> Result<Vec<SequenceBatch>> {
    if batch == 0 || seq_len == 0 {
        return Err(Error::Config("batch and seq_len must be positive".into()));
    }
    if split.len() < batch * (seq_len + 1) {
        return Err(Error::Config(format!(
            "split of {} tokens is too small for batch {batch} × (seq_len {seq_len} + 1)",
            split.len()
        )));
    }
    let row_len = split.len() / batch;
    let windows = (row_len - 1) / seq_len;
    let rows: Vec<&[usize]> = (0..batch).map(|r| &split[r * row_len..(r + 1) * row_len]).collect();
    Ok((0..windows)
        .map(|k| {
            let s = k * seq_len;
            SequenceBatch {
                tokens: rows.iter().map(|r| r[s..s + seq_len].to_vec()).collect(),
                targets: Targets::NextToken(rows.iter().map(|r| r[s + 1..s + seq_len + 1].to_vec()).collect()),
                vocab_size,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_sequences_have_two_marked_symbols() {
        let ds = gen_temporal_order(TemporalOrderMode::Short, 500, &mut Rng::new(1));
        for (seq, &label) in ds.sequences.iter().zip(&ds.labels) {
            assert_eq!(seq.len(), 15);
            let marks: Vec<(usize, usize)> = seq.iter().copied().enumerate().filter(|&(_, s)| s < 2).collect();
            assert_eq!(marks.len(), 2);
            assert!(marks[0].0 < 5 && (5..10).contains(&marks[1].0));
            assert_eq!(label, marks[0].1 * 2 + marks[1].1);
        }
    }

    #[test]
    fn medium_thirds() {
        let ds = gen_temporal_order(TemporalOrderMode::Medium, 300, &mut Rng::new(2));
        for seq in &ds.sequences {
            assert_eq!(seq.len(), 30);
            assert_eq!(seq[..10].iter().filter(|&&s| s < 2).count(), 1);
            assert_eq!(seq[10..20].iter().filter(|&&s| s < 2).count(), 1);
            assert!(seq[20..].iter().all(|&s| s >= 2));
        }
    }

    #[test]
    fn label_names_follow_symbol_order() {
        let ds = LabeledDataset::from_text("CACCDBCDCCCCDCD\tAB\n").unwrap();
        assert_eq!(ds.labels, vec![1]);
        let mut a_then_b = ds.clone();
        a_then_b.labels = vec![1];
        assert_eq!(a_then_b.to_text(), "CACCDBCDCCCCDCD\tAB\n");
    }

    #[test]
    fn classes_are_balanced() {
        let ds = gen_temporal_order(TemporalOrderMode::Short, 100_000, &mut Rng::new(3));
        let mut counts = [0usize; 4];
        for &l in &ds.labels {
            counts[l] += 1;
        }
        for c in counts {
            let f = c as f64 / 100_000.0;
            assert!((f - 0.25).abs() <= 0.01, "{counts:?}");
        }
    }

    #[test]
    fn text_roundtrip() {
        let ds = gen_temporal_order(TemporalOrderMode::Medium, 20, &mut Rng::new(4));
        assert_eq!(LabeledDataset::from_text(&ds.to_text()).unwrap(), ds);
        assert!(LabeledDataset::from_text("ABX\tAA\n").is_err());
        assert!(LabeledDataset::from_text("ABCD\tZZ\n").is_err());
        assert!(LabeledDataset::from_text("").is_err());
    }

    #[test]
    fn char_corpus() {
        let c = corpus_from_text("abab", Unit::Char, None).unwrap();
        assert_eq!(c.vocab.len(), 2);
        assert_eq!(c.stream, vec![0, 1, 0, 1]);
    }

    #[test]
    fn word_corpus_with_unknowns() {
        let c = corpus_from_text("a b a", Unit::Word, Some(10)).unwrap();
        assert_eq!(c.vocab.tokens(), &["a", "b", UNK]);
        assert_eq!(c.stream, vec![0, 1, 0]);
        let capped = corpus_from_text("x y y z z z", Unit::Word, Some(2)).unwrap();
        assert_eq!(capped.vocab.tokens(), &["z", "y", UNK]);
        assert_eq!(capped.stream, vec![2, 1, 1, 0, 0, 0]);
    }

    #[test]
    fn corpus_loading_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        fs::write(&p, "the cat sat on the mat. the end\n").unwrap();
        let a = load_text_corpus(&p, Unit::Char, None).unwrap();
        let b = load_text_corpus(&p, Unit::Char, None).unwrap();
        assert_eq!(a, b);
        let empty = dir.path().join("e.txt");
        fs::write(&empty, "").unwrap();
        assert!(load_text_corpus(&empty, Unit::Char, None).is_err());
        assert!(load_text_corpus(&dir.path().join("missing"), Unit::Char, None).is_err());
    }

    #[test]
    fn split_corpus_maps_unseen_to_unk() {
        let dir = tempfile::tempdir().unwrap();
        let w = |n: &str, t: &str| {
            let p = dir.path().join(n);
            fs::write(&p, t).unwrap();
            p
        };
        let c = load_split_corpus(&w("a", "abba"), &w("b", "abz"), &w("c", "b"), Unit::Char, None).unwrap();
        assert_eq!(c.train(), &[0, 1, 1, 0]);
        assert_eq!(c.valid()[2], c.vocab.id(UNK).unwrap());
        assert_eq!(c.test(), &[1]);
    }

    #[test]
    fn lm_windows_arithmetic() {
        let stream: Vec<usize> = (0..401).map(|i| i % 7).collect();
        let b = batch_lm(&stream, 7, 1, 100).unwrap();
        assert_eq!(b.len(), 4);
        let used: usize = b.iter().map(|w| w.seq_len()).sum();
        assert_eq!(stream.len() - used, 1);
    }

    #[test]
    fn lm_windows_reassemble_prefix_and_align_targets() {
        let stream: Vec<usize> = (0..1000).map(|i| (i * 31 + 7) % 13).collect();
        let batches = batch_lm(&stream, 13, 3, 25).unwrap();
        let row_len = 1000 / 3;
        for r in 0..3 {
            let joined: Vec<usize> = batches.iter().flat_map(|b| b.tokens[r].clone()).collect();
            assert_eq!(&joined[..], &stream[r * row_len..r * row_len + joined.len()]);
        }
        for b in &batches {
            let Targets::NextToken(t) = &b.targets else { panic!() };
            for (row, trow) in b.tokens.iter().zip(t) {
                assert_eq!(&row[1..], &trow[..trow.len() - 1]);
            }
        }
        // Windows are disjoint: every stream index appears at most once.
        let mut seen = vec![false; 1000];
        for (k, b) in batches.iter().enumerate() {
            for r in 0..3 {
                for t in 0..b.seq_len() {
                    let idx = r * row_len + k * 25 + t;
                    assert!(!seen[idx]);
                    seen[idx] = true;
                }
            }
        }
    }

    #[test]
    fn lm_rejects_small_split() {
        assert!(batch_lm(&[0; 10], 1, 2, 5).is_err());
        assert!(batch_lm(&[0; 12], 1, 2, 5).is_ok());
    }

    #[test]
    fn split_time_keeps_label_on_last_window() {
        let ds = gen_temporal_order(TemporalOrderMode::Short, 4, &mut Rng::new(5));
        let batch = ds.batches(4, None).remove(0);
        let parts = batch.split_time(6).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[0].targets, Targets::None);
        assert_eq!(parts[2].labels().unwrap(), &ds.labels[..]);
        assert_eq!(parts[2].seq_len(), 3);
    }

    #[test]
    fn validate_rejects_bad_batches() {
        let b = SequenceBatch {
            tokens: vec![vec![0, 5]],
            targets: Targets::Class(vec![0]),
            vocab_size: 4,
        };
        assert!(matches!(b.validate(4, 4), Err(Error::OutOfVocab { token: 5, .. })));
        let empty = SequenceBatch {
            tokens: vec![vec![]],
            targets: Targets::Class(vec![0]),
            vocab_size: 4,
        };
        assert!(empty.validate(4, 4).is_err());
    }
}
