use std::collections::HashMap;
use std::path::Path;

use super::Corpus;
use crate::error::{read_to_string, write_string, Error, Result};

pub type TokenId = u32;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const BOS_ID: TokenId = 0;
pub const EOS_ID: TokenId = 1;
pub const UNK_ID: TokenId = 2;

const RESERVED: [&str; 3] = [BOS, EOS, UNK];

/// Dense word <-> id mapping. Ids 0, 1 and 2 are always sentence-begin,
/// sentence-end and unknown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved symbols.
    pub fn new() -> Self {
        let mut v = Vocabulary {
            words: Vec::new(),
            index: HashMap::new(),
        };
        for w in RESERVED {
            v.push(w);
        }
        v
    }

    /// Appends `words` in order, skipping duplicates and reserved symbols.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self::new();
        for w in words {
            v.insert(w.as_ref());
        }
        v
    }

    fn push(&mut self, word: &str) -> TokenId {
        let id = self.words.len() as TokenId;
        self.words.push(word.to_owned());
        self.index.insert(word.to_owned(), id);
        id
    }

    /// Returns the id of `word`, adding it if absent.
    pub fn insert(&mut self, word: &str) -> TokenId {
        match self.index.get(word) {
            Some(&id) => id,
            None => self.push(word),
        }
    }

    pub fn id(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn id_or_unk(&self, word: &str) -> TokenId {
        self.id(word).unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: TokenId) -> &str {
        &self.words[id as usize]
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Total number of entries including the reserved symbols.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Non-reserved entries in id order.
    pub fn regular_words(&self) -> &[String] {
        &self.words[RESERVED.len()..]
    }

    pub fn is_reserved(id: TokenId) -> bool {
        (id as usize) < RESERVED.len()
    }

    /// One word per line, reserved symbols omitted: line `i` holds id `i + 3`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for w in self.regular_words() {
            out.push_str(w);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut v = Self::new();
        for (i, line) in text.lines().enumerate() {
            let w = line.trim();
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "vocabulary line {}: expected a single word",
                    i + 1
                )));
            }
            if RESERVED.contains(&w) || v.contains(w) {
                return Err(Error::InvalidArgument(format!(
                    "vocabulary line {}: duplicate or reserved word {w:?}",
                    i + 1
                )));
            }
            v.push(w);
        }
        Ok(v)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read_to_string(path.as_ref())?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_string(path.as_ref(), &self.to_text())
    }
}

/// Keeps the `max_size` most frequent words of `corpus` (all when `None`),
/// ordered by descending count with ties broken lexicographically.
pub fn build_vocabulary(corpus: &Corpus, max_size: Option<usize>) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for w in corpus.words() {
        if !RESERVED.contains(&w) {
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if let Some(max) = max_size {
        ranked.truncate(max);
    }
    Ok(Vocabulary::from_words(ranked.into_iter().map(|(w, _)| w)))
}

/// Fraction of running tokens of `corpus` missing from `vocab`; zero for an
/// empty corpus.
pub fn oov_rate(corpus: &Corpus, vocab: &Vocabulary) -> f64 {
    let total = corpus.running_words();
    if total == 0 {
        return 0.0;
    }
    let oov = corpus.words().filter(|w| !vocab.contains(w)).count();
    oov as f64 / total as f64
}
