use std::collections::HashMap;
use std::path::Path;

use super::inventory::{normalize_inventory, strip_stress, Inventory, UnitId, WORD_END_MARK};
use crate::error::{read_to_string, write_string, Error, Result};
use crate::text::{BpeModel, Vocabulary};

#[derive(Clone, Debug, PartialEq)]
pub struct LexiconEntry {
    pub word: String,
    pub prons: Vec<Vec<UnitId>>,
}

/// Pronunciation lexicon over an [`Inventory`]. Word ids are positions in
/// insertion order. Pronunciations of a word are equally likely.
#[derive(Clone, Debug)]
pub struct Lexicon {
    inventory: Inventory,
    entries: Vec<LexiconEntry>,
    index: HashMap<String, u32>,
}

impl Lexicon {
    /// Builds a lexicon from words with unit-id pronunciations. Repeated words
    /// collect their pronunciations; duplicate pronunciations are dropped.
    pub fn new<I>(inventory: Inventory, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<UnitId>)>,
    {
        let mut lex = Lexicon {
            inventory,
            entries: Vec::new(),
            index: HashMap::new(),
        };
        for (word, pron) in entries {
            lex.add(word, pron)?;
        }
        if lex.entries.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        Ok(lex)
    }

    fn add(&mut self, word: String, pron: Vec<UnitId>) -> Result<()> {
        let inv = &self.inventory;
        if word.is_empty() || word.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "invalid lexicon word {word:?}"
            )));
        }
        if pron.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "empty pronunciation for {word:?}"
            )));
        }
        for (i, &u) in pron.iter().enumerate() {
            if u as usize >= inv.len() {
                return Err(Error::InvalidArgument(format!(
                    "unit id {u} out of range in {word:?}"
                )));
            }
            if Some(u) == inv.silence() {
                return Err(Error::InvalidArgument(format!(
                    "silence inside pronunciation of {word:?}"
                )));
            }
            let last = i + 1 == pron.len();
            if inv.is_word_end(u) != last {
                return Err(Error::InvalidArgument(format!(
                    "pronunciation of {word:?} must carry the word-end flag exactly on its final unit"
                )));
            }
        }
        let id = match self.index.get(&word) {
            Some(&id) => id as usize,
            None => {
                self.index.insert(word.clone(), self.entries.len() as u32);
                self.entries.push(LexiconEntry {
                    word,
                    prons: Vec::new(),
                });
                self.entries.len() - 1
            }
        };
        let prons = &mut self.entries[id].prons;
        if !prons.contains(&pron) {
            prons.push(pron);
        }
        Ok(())
    }

    /// Parses "WORD<tab>PH1 PH2 .. PHn" lines. Stress digits are stripped and
    /// the final phoneme is mapped to its word-end twin. Without an explicit
    /// inventory one is derived from the phonemes in the file.
    pub fn parse(text: &str, inventory: Option<&Inventory>) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (word, rest) = match line.split_once('\t') {
                Some((w, r)) => (w.trim(), r),
                None => line.split_once(char::is_whitespace).unwrap_or((line, "")),
            };
            let phones: Vec<&str> = rest.split_whitespace().map(strip_stress).collect();
            if phones.is_empty() {
                return Err(Error::LexiconParse {
                    line: i + 1,
                    msg: format!("no pronunciation for {word:?}"),
                });
            }
            if let Some(p) = phones.iter().find(|p| p.ends_with(WORD_END_MARK)) {
                return Err(Error::LexiconParse {
                    line: i + 1,
                    msg: format!("phoneme {p:?} already carries the word-end mark"),
                });
            }
            rows.push((i + 1, word, phones));
        }
        if rows.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        let inventory = match inventory {
            Some(inv) => inv.clone(),
            None => normalize_inventory(rows.iter().flat_map(|(_, _, p)| p.iter().copied()))?,
        };
        let mut lex = Lexicon {
            inventory,
            entries: Vec::new(),
            index: HashMap::new(),
        };
        for (line, word, phones) in rows {
            let n = phones.len();
            let mut pron = Vec::with_capacity(n);
            for (j, p) in phones.iter().enumerate() {
                let id = if j + 1 == n {
                    lex.inventory.word_end_twin(p)
                } else {
                    lex.inventory
                        .id(p)
                        .filter(|&u| !lex.inventory.is_word_end(u))
                };
                pron.push(id.ok_or_else(|| Error::LexiconParse {
                    line,
                    msg: format!("phoneme {p:?} not in inventory"),
                })?);
            }
            lex.add(word.to_owned(), pron)
                .map_err(|e| Error::LexiconParse {
                    line,
                    msg: e.to_string(),
                })?;
        }
        Ok(lex)
    }

    pub fn read(path: impl AsRef<Path>, inventory: Option<&Inventory>) -> Result<Self> {
        Self::parse(&read_to_string(path.as_ref())?, inventory)
    }

    /// Closed-vocabulary subword lexicon: every word is spelled by its BPE
    /// segmentation.
    pub fn from_bpe<I, S>(model: &BpeModel, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let inventory = Inventory::subwords(model)?;
        let mut entries = Vec::new();
        for w in words {
            let w = w.as_ref();
            let mut pron = Vec::new();
            for tok in model.segment(w) {
                pron.push(inventory.id(&tok).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "word {w:?} segments into unknown token {tok:?}"
                    ))
                })?);
            }
            entries.push((w.to_owned(), pron));
        }
        Self::new(inventory, entries)
    }

    /// Text form with base phoneme names (word-end marks removed), one line
    /// per pronunciation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            for p in &e.prons {
                let phones: Vec<&str> = p
                    .iter()
                    .map(|&u| self.inventory.symbol(u).trim_end_matches(WORD_END_MARK))
                    .collect();
                out.push_str(&e.word);
                out.push('\t');
                out.push_str(&phones.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_string(path.as_ref(), &self.to_text())
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn word(&self, id: u32) -> &str {
        &self.entries[id as usize].word
    }

    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn prons(&self, id: u32) -> &[Vec<UnitId>] {
        &self.entries[id as usize].prons
    }

    /// Natural-log pronunciation probability of each pronunciation of `id`.
    pub fn pron_log_prob(&self, id: u32) -> f64 {
        -(self.entries[id as usize].prons.len() as f64).ln()
    }

    pub fn num_units(&self) -> usize {
        self.entries
            .iter()
            .flat_map(|e| &e.prons)
            .map(Vec::len)
            .sum()
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_words(self.entries.iter().map(|e| e.word.as_str()))
    }

    /// Regular words of `vocab` that have no pronunciation.
    pub fn missing_words(&self, vocab: &Vocabulary) -> Vec<String> {
        vocab
            .regular_words()
            .iter()
            .filter(|w| !self.index.contains_key(w.as_str()))
            .cloned()
            .collect()
    }
}
