//! Normalization of raw SMILES into a one-character-per-atom alphabet,
//! vocabulary construction and fixed-length training windows.
//!
//! Two-letter halogens and the pyrrole-type aromatic nitrogen are folded
//! into single symbols so that every atom is exactly one character:
//!
//! | raw    | normalized |
//! |--------|------------|
//! | `Cl`   | `L`        |
//! | `Br`   | `R`        |
//! | `[nH]` | `A`        |
//!
//! Stereo markers are dropped, charged species are rejected and only ring
//! closure labels `1`..=`5` survive.

use std::collections::BTreeSet;
use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Corpus line terminator; always part of a vocabulary.
pub const NEWLINE: char = '\n';

/// Default number of symbols in a training window.
pub const DEFAULT_SEQ_LEN: usize = 40;

/// Default distance between consecutive window starts.
pub const DEFAULT_STRIDE: usize = 3;

const ORGANIC: [&str; 10] = ["H", "C", "N", "O", "S", "P", "F", "Cl", "Br", "I"];

/// Why a raw SMILES string was excluded from the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectionReason {
    NonOrganicElement,
    Charged,
    TooManyRingClosures,
    UnsupportedSyntax,
}

impl RejectionReason {
    pub const ALL: [RejectionReason; 4] = [
        RejectionReason::NonOrganicElement,
        RejectionReason::Charged,
        RejectionReason::TooManyRingClosures,
        RejectionReason::UnsupportedSyntax,
    ];
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RejectionReason::NonOrganicElement => "NonOrganicElement",
            RejectionReason::Charged => "Charged",
            RejectionReason::TooManyRingClosures => "TooManyRingClosures",
            RejectionReason::UnsupportedSyntax => "UnsupportedSyntax",
        };
        f.write_str(name)
    }
}

/// A SMILES string over the single-character alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NormalizedSmiles(String);

impl NormalizedSmiles {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Wraps text that is already known to be normalized, such as a corpus line
    /// or a canonical string. No validation is performed.
    pub fn from_trusted(text: impl Into<String>) -> Self {
        NormalizedSmiles(text.into())
    }
}

impl fmt::Display for NormalizedSmiles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedSmiles {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Maps a raw SMILES string onto the normalized alphabet.
///
/// Already-normalized input (containing `L`, `R` or `A`) is accepted as well,
/// which makes the operation idempotent.
pub fn normalize(raw: &str) -> Result<NormalizedSmiles, RejectionReason> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(RejectionReason::UnsupportedSyntax);
    }
    let chars: Vec<char> = raw.chars().collect();
    let mut out = String::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            'C' if chars.get(i + 1) == Some(&'l') => {
                out.push('L');
                i += 2;
            }
            'B' if chars.get(i + 1) == Some(&'r') => {
                out.push('R');
                i += 2;
            }
            'C' | 'N' | 'O' | 'S' | 'P' | 'F' | 'I' | 'L' | 'R' | 'A' => {
                out.push(c);
                i += 1;
            }
            'c' | 'n' | 'o' | 's' | 'p' => {
                out.push(c);
                i += 1;
            }
            // boron and aromatic boron are valid unbracketed SMILES but not organic here
            'B' | 'b' => return Err(RejectionReason::NonOrganicElement),
            '[' => {
                let close = chars[i + 1..]
                    .iter()
                    .position(|&ch| ch == ']')
                    .ok_or(RejectionReason::UnsupportedSyntax)?;
                let body: String = chars[i + 1..i + 1 + close].iter().collect();
                out.push(normalize_bracket(&body)?);
                i += close + 2;
            }
            '=' | '#' | '(' | ')' | '1'..='5' => {
                out.push(c);
                i += 1;
            }
            '0' | '6'..='9' | '%' => return Err(RejectionReason::TooManyRingClosures),
            '/' | '\\' | '-' => i += 1,
            '+' => return Err(RejectionReason::Charged),
            _ => return Err(RejectionReason::UnsupportedSyntax),
        }
    }
    if out.is_empty() {
        return Err(RejectionReason::UnsupportedSyntax);
    }
    Ok(NormalizedSmiles(out))
}

/// Normalizes the contents of a `[...]` atom to a single symbol.
fn normalize_bracket(body: &str) -> Result<char, RejectionReason> {
    let chars: Vec<char> = body.chars().collect();
    let mut i = 0;
    if chars.first().is_some_and(|c| c.is_ascii_digit()) {
        // isotope; checked after the element so that [13C+] still reports Charged first
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
    }
    let has_isotope = i > 0;
    let start = i;
    if i >= chars.len() || !chars[i].is_ascii_alphabetic() {
        return Err(RejectionReason::UnsupportedSyntax);
    }
    let aromatic = chars[i].is_ascii_lowercase();
    i += 1;
    if !aromatic && i < chars.len() && chars[i].is_ascii_lowercase() {
        i += 1;
    } else if aromatic && i < chars.len() && chars[i - 1] == 's' && chars[i] == 'e' {
        // [se]
        i += 1;
    }
    let symbol: String = chars[start..i].iter().collect();
    let element_key = if aromatic {
        let mut s = symbol.clone();
        s[..1].make_ascii_uppercase();
        s
    } else {
        symbol.clone()
    };
    if !ORGANIC.contains(&element_key.as_str()) {
        return Err(RejectionReason::NonOrganicElement);
    }
    let mut chiral = false;
    while i < chars.len() && chars[i] == '@' {
        chiral = true;
        i += 1;
    }
    let mut h_count: Option<u32> = None;
    if i < chars.len() && chars[i] == 'H' {
        i += 1;
        let mut n = 0u32;
        let mut digits = false;
        while i < chars.len() && chars[i].is_ascii_digit() {
            n = n * 10 + chars[i].to_digit(10).unwrap_or(0);
            digits = true;
            i += 1;
        }
        h_count = Some(if digits { n } else { 1 });
    }
    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
        return Err(RejectionReason::Charged);
    }
    if i != chars.len() || has_isotope {
        // atom class, malformed tail or isotope label
        return Err(RejectionReason::UnsupportedSyntax);
    }
    match (symbol.as_str(), h_count, chiral) {
        ("n", Some(1), false) => Ok('A'),
        ("H", _, _) => Err(RejectionReason::UnsupportedSyntax),
        // the hydrogen on a stereocentre is only written because of the stereo mark
        (sym, _, true) => Ok(single_char(sym)),
        _ => Err(RejectionReason::UnsupportedSyntax),
    }
}

fn single_char(symbol: &str) -> char {
    match symbol {
        "Cl" => 'L',
        "Br" => 'R',
        other => other.chars().next().unwrap_or('C'),
    }
}

/// Converts a normalized string back to conventional SMILES.
pub fn to_standard_smiles(normalized: &str) -> String {
    let mut out = String::with_capacity(normalized.len() + 8);
    for c in normalized.chars() {
        match c {
            'L' => out.push_str("Cl"),
            'R' => out.push_str("Br"),
            'A' => out.push_str("[nH]"),
            other => out.push(other),
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("symbol {0:?} is not in the vocabulary")]
    UnknownSymbol(char),
    #[error("index {index} is out of range for a vocabulary of {size} symbols")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("corpus of {len} symbols is too short for windows of {seq_len} plus a target")]
    CorpusTooShort { len: usize, seq_len: usize },
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("vocabulary entries must be single characters, got {0:?}")]
    BadEntry(String),
    #[error("vocabulary contains {0:?} twice")]
    DuplicateSymbol(char),
    #[error("vocabulary is missing the newline terminator")]
    MissingNewline,
}

/// Ordered symbol table. Symbols are sorted by code point, so the newline
/// terminator is always index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<char>,
    index: [Option<u8>; 128],
}

impl Vocabulary {
    pub fn from_symbols(symbols: Vec<char>) -> Result<Self, LexiconError> {
        let mut index = [None; 128];
        for (i, &c) in symbols.iter().enumerate() {
            if !c.is_ascii() {
                return Err(LexiconError::UnknownSymbol(c));
            }
            let slot = &mut index[c as usize];
            if slot.is_some() {
                return Err(LexiconError::DuplicateSymbol(c));
            }
            *slot = Some(i as u8);
        }
        if index[NEWLINE as usize].is_none() {
            return Err(LexiconError::MissingNewline);
        }
        Ok(Vocabulary { symbols, index })
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        if c.is_ascii() {
            self.index[c as usize].map(usize::from)
        } else {
            None
        }
    }

    pub fn symbol(&self, index: usize) -> Option<char> {
        self.symbols.get(index).copied()
    }

    pub fn newline_index(&self) -> usize {
        self.index[NEWLINE as usize].map(usize::from).unwrap_or(0)
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>, LexiconError> {
        text.chars()
            .map(|c| self.index_of(c).ok_or(LexiconError::UnknownSymbol(c)))
            .collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Result<String, LexiconError> {
        indices
            .iter()
            .map(|&i| {
                self.symbol(i).ok_or(LexiconError::IndexOutOfRange {
                    index: i,
                    size: self.len(),
                })
            })
            .collect()
    }

    /// JSON array of single-character strings in index order.
    pub fn to_json(&self) -> String {
        let entries: Vec<String> = self.symbols.iter().map(|c| c.to_string()).collect();
        serde_json::to_string(&entries).expect("string array serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let entries: Vec<String> =
            serde_json::from_str(text).map_err(|e| LexiconError::BadEntry(e.to_string()))?;
        Self::from_entries(&entries)
    }

    pub fn from_entries(entries: &[String]) -> Result<Self, LexiconError> {
        let symbols = entries
            .iter()
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(LexiconError::BadEntry(s.clone())),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_symbols(symbols)
    }

    pub fn entries(&self) -> Vec<String> {
        self.symbols.iter().map(|c| c.to_string()).collect()
    }
}

/// Collects the distinct symbols of a corpus plus the newline terminator.
pub fn build_vocabulary<S: AsRef<str>>(corpus: &[S]) -> Result<Vocabulary, LexiconError> {
    if corpus.is_empty() {
        return Err(LexiconError::EmptyCorpus);
    }
    let mut set: BTreeSet<char> = BTreeSet::new();
    set.insert(NEWLINE);
    for line in corpus {
        set.extend(line.as_ref().chars());
    }
    Vocabulary::from_symbols(set.into_iter().collect())
}

/// Joins corpus lines, terminating each with a newline.
pub fn corpus_text<S: AsRef<str>>(corpus: &[S]) -> String {
    let mut text = String::new();
    for line in corpus {
        text.push_str(line.as_ref());
        text.push(NEWLINE);
    }
    text
}

/// A fixed-length input sequence and the symbol that follows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingWindow {
    pub input: Vec<usize>,
    pub target: usize,
}

/// Number of windows of `seq_len` (plus one target) starting every `stride`
/// symbols in a corpus of `len` symbols.
pub fn window_count(len: usize, seq_len: usize, stride: usize) -> Result<usize, LexiconError> {
    if stride == 0 {
        return Err(LexiconError::ZeroStride);
    }
    if len < seq_len + 1 {
        return Err(LexiconError::CorpusTooShort { len, seq_len });
    }
    Ok((len - seq_len - 1) / stride + 1)
}

/// An encoded corpus ready to be cut into training windows.
#[derive(Debug, Clone)]
pub struct EncodedCorpus {
    symbols: Vec<usize>,
    seq_len: usize,
    stride: usize,
}

impl EncodedCorpus {
    pub fn new(
        corpus_text: &str,
        vocab: &Vocabulary,
        seq_len: usize,
        stride: usize,
    ) -> Result<Self, LexiconError> {
        let symbols = vocab.encode(corpus_text)?;
        window_count(symbols.len(), seq_len, stride)?;
        Ok(EncodedCorpus {
            symbols,
            seq_len,
            stride,
        })
    }

    pub fn len(&self) -> usize {
        window_count(self.symbols.len(), self.seq_len, self.stride).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    /// Start offset of window `n`.
    pub fn start(&self, n: usize) -> usize {
        n * self.stride
    }

    /// Input slice and target of window `n`.
    pub fn window_slices(&self, n: usize) -> (&[usize], usize) {
        let s = self.start(n);
        (&self.symbols[s..s + self.seq_len], self.symbols[s + self.seq_len])
    }

    pub fn window(&self, n: usize) -> TrainingWindow {
        let (input, target) = self.window_slices(n);
        TrainingWindow {
            input: input.to_vec(),
            target,
        }
    }

    /// Windows with index in `range`; lets parallel consumers partition the stream.
    pub fn windows(&self, range: std::ops::Range<usize>) -> impl Iterator<Item = TrainingWindow> + '_ {
        range.map(move |n| self.window(n))
    }
}

/// Cuts a corpus into windows starting at offsets 0, stride, 2·stride, …
pub fn window_corpus(
    corpus_text: &str,
    vocab: &Vocabulary,
    seq_len: usize,
    stride: usize,
) -> Result<Vec<TrainingWindow>, LexiconError> {
    let encoded = EncodedCorpus::new(corpus_text, vocab, seq_len, stride)?;
    Ok(encoded.windows(0..encoded.len()).collect())
}

/// One-hot input matrix `(seq_len, vocab)` and target vector `(vocab)`.
pub fn encode_one_hot(
    window: &TrainingWindow,
    vocab: &Vocabulary,
) -> Result<(Array2<f64>, Array1<f64>), LexiconError> {
    let size = vocab.len();
    let check = |index: usize| {
        if index < size {
            Ok(index)
        } else {
            Err(LexiconError::IndexOutOfRange { index, size })
        }
    };
    let mut input = Array2::zeros((window.input.len(), size));
    for (t, &ix) in window.input.iter().enumerate() {
        input[[t, check(ix)?]] = 1.0;
    }
    let mut target = Array1::zeros(size);
    target[check(window.target)?] = 1.0;
    Ok((input, target))
}

/// Inverse of [`encode_one_hot`]: the arg-max of every row.
pub fn decode_one_hot(input: &Array2<f64>, target: &Array1<f64>) -> TrainingWindow {
    let argmax = |row: ndarray::ArrayView1<f64>| {
        row.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    };
    TrainingWindow {
        input: input.rows().into_iter().map(argmax).collect(),
        target: argmax(target.view()),
    }
}
