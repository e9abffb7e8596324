//! Byte-pair-encoding subword units.
//!
//! Words are split into characters and the end-of-word marker is glued to the
//! final character (`"ab"` becomes `["a", "b</w>"]`). Learning greedily merges
//! the most frequent adjacent symbol pair, breaking count ties by the
//! lexicographic order of the pair. Application replays the learned merges in
//! order, so segmentation is deterministic and lossless: concatenating the
//! tokens of a word and removing the marker gives the word back.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::{Corpus, UNK};
use crate::error::{read_to_string, write_string, Error, Result};

pub const END_OF_WORD: &str = "</w>";

const HEADER: &str = "#bpe v1";
const ALPHABET_PREFIX: &str = "#alphabet";

const UNK_INNER: u32 = u32::MAX - 1;
const UNK_FINAL: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BpeModel {
    alphabet: Vec<String>,
    merges: Vec<(String, String)>,
    symbols: Vec<String>,
    index: HashMap<String, u32>,
    merge_ids: Vec<(u32, u32, u32)>,
}

fn initial_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    chars
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            if i + 1 == n {
                format!("{c}{END_OF_WORD}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

fn replay(merges: &[(u32, u32, u32)], seq: &mut Vec<u32>) {
    for &(l, r, m) in merges {
        if seq.len() < 2 {
            break;
        }
        let mut write = 0;
        let mut read = 0;
        while read < seq.len() {
            if read + 1 < seq.len() && seq[read] == l && seq[read + 1] == r {
                seq[write] = m;
                read += 2;
            } else {
                seq[write] = seq[read];
                read += 1;
            }
            write += 1;
        }
        seq.truncate(write);
    }
}

impl BpeModel {
    /// Builds a model from its initial alphabet and ordered merge list.
    ///
    /// With `alphabet == None` the alphabet is inferred as every merge operand
    /// that is not produced by an earlier merge.
    pub fn from_parts(
        alphabet: Option<Vec<String>>,
        merges: Vec<(String, String)>,
    ) -> Result<Self> {
        let infer = alphabet.is_none();
        let mut model = BpeModel {
            alphabet: Vec::new(),
            merges: Vec::new(),
            symbols: Vec::new(),
            index: HashMap::new(),
            merge_ids: Vec::new(),
        };
        let mut alphabet: BTreeSet<String> = alphabet.unwrap_or_default().into_iter().collect();
        if infer {
            let mut produced = BTreeSet::new();
            for (l, r) in &merges {
                for s in [l, r] {
                    if !produced.contains(s) {
                        alphabet.insert(s.clone());
                    }
                }
                produced.insert(format!("{l}{r}"));
            }
        }
        for s in &alphabet {
            model.intern(s);
        }
        model.alphabet = alphabet.into_iter().collect();
        let mut seen = BTreeSet::new();
        for (i, (l, r)) in merges.into_iter().enumerate() {
            if !seen.insert((l.clone(), r.clone())) {
                return Err(Error::BpeParse {
                    line: i + 1,
                    msg: format!("duplicate merge {l} {r}"),
                });
            }
            let (Some(&li), Some(&ri)) = (model.index.get(&l), model.index.get(&r)) else {
                return Err(Error::BpeParse {
                    line: i + 1,
                    msg: format!("merge {l} {r} uses an unknown symbol"),
                });
            };
            let m = model.intern(&format!("{l}{r}"));
            model.merge_ids.push((li, ri, m));
            model.merges.push((l, r));
        }
        Ok(model)
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.index.get(s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(s.to_owned());
        self.index.insert(s.to_owned(), id);
        id
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    /// Every subword symbol the model can emit (alphabet plus merge products).
    pub fn vocab(&self) -> &[String] {
        &self.symbols
    }

    fn symbol_name(&self, id: u32) -> String {
        match id {
            UNK_INNER => UNK.to_owned(),
            UNK_FINAL => format!("{UNK}{END_OF_WORD}"),
            _ => self.symbols[id as usize].clone(),
        }
    }

    /// Segments a single word. Characters outside the alphabet become the
    /// unknown symbol (carrying the marker when word-final).
    pub fn segment(&self, word: &str) -> Vec<String> {
        let init = initial_symbols(word);
        let n = init.len();
        let mut seq: Vec<u32> = init
            .iter()
            .enumerate()
            .map(|(i, s)| match self.index.get(s) {
                Some(&id) => id,
                None if i + 1 == n => UNK_FINAL,
                None => UNK_INNER,
            })
            .collect();
        replay(&self.merge_ids, &mut seq);
        seq.into_iter().map(|id| self.symbol_name(id)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        out.push_str(ALPHABET_PREFIX);
        for s in &self.alphabet {
            out.push(' ');
            out.push_str(s);
        }
        out.push('\n');
        for (l, r) in &self.merges {
            out.push_str(l);
            out.push('\t');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == HEADER => {}
            _ => {
                return Err(Error::BpeParse {
                    line: 1,
                    msg: format!("expected header {HEADER:?}"),
                })
            }
        }
        let mut alphabet = None;
        let mut merges = Vec::new();
        for (i, line) in lines {
            if let Some(rest) = line.strip_prefix(ALPHABET_PREFIX) {
                alphabet = Some(rest.split_whitespace().map(str::to_owned).collect());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_owned(), r.to_owned()))
                }
                _ => {
                    return Err(Error::BpeParse {
                        line: i + 1,
                        msg: "expected two tab-separated symbols".into(),
                    })
                }
            }
        }
        Self::from_parts(alphabet, merges)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read_to_string(path.as_ref())?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_string(path.as_ref(), &self.to_text())
    }
}

/// Learns `num_merges` merge operations from the words of `corpus`.
/// Stops early once no adjacent pair is left.
pub fn bpe_learn(corpus: &Corpus, num_merges: usize) -> Result<BpeModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for w in corpus.words() {
        *freq.entry(w).or_default() += 1;
    }
    let mut types: Vec<(&str, u64)> = freq.into_iter().collect();
    types.sort();

    let mut symbols: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut intern = |s: String, symbols: &mut Vec<String>| -> u32 {
        *index.entry(s.clone()).or_insert_with(|| {
            symbols.push(s);
            (symbols.len() - 1) as u32
        })
    };

    let mut alphabet = BTreeSet::new();
    let mut words: Vec<(Vec<u32>, u64)> = Vec::with_capacity(types.len());
    for (w, c) in types {
        let seq = initial_symbols(w)
            .into_iter()
            .map(|s| {
                alphabet.insert(s.clone());
                intern(s, &mut symbols)
            })
            .collect();
        words.push((seq, c));
    }

    let mut merges = Vec::with_capacity(num_merges);
    for _ in 0..num_merges {
        let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
        for (seq, c) in &words {
            for p in seq.windows(2) {
                *pairs.entry((p[0], p[1])).or_default() += c;
            }
        }
        let best = pairs.into_iter().max_by(|(pa, ca), (pb, cb)| {
            ca.cmp(cb).then_with(|| {
                let ka = (&symbols[pa.0 as usize], &symbols[pa.1 as usize]);
                let kb = (&symbols[pb.0 as usize], &symbols[pb.1 as usize]);
                kb.cmp(&ka)
            })
        });
        let Some(((l, r), _)) = best else { break };
        let merged = format!("{}{}", symbols[l as usize], symbols[r as usize]);
        let m = intern(merged, &mut symbols);
        let op = [(l, r, m)];
        for (seq, _) in &mut words {
            replay(&op, seq);
        }
        merges.push((symbols[l as usize].clone(), symbols[r as usize].clone()));
    }
    BpeModel::from_parts(Some(alphabet.into_iter().collect()), merges)
}

/// Segments every word of `words` and concatenates the results.
pub fn bpe_apply<S: AsRef<str>>(model: &BpeModel, words: &[S]) -> Vec<String> {
    words
        .iter()
        .flat_map(|w| model.segment(w.as_ref()))
        .collect()
}

/// Rebuilds words from subword tokens: a token carrying the end-of-word
/// marker closes the current word. A trailing unterminated piece becomes a
/// word of its own.
pub fn tokens_to_words<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    for t in tokens {
        let t = t.as_ref();
        match t.strip_suffix(END_OF_WORD) {
            Some(stem) => {
                cur.push_str(stem);
                words.push(std::mem::take(&mut cur));
            }
            None => cur.push_str(t),
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

/// Subword tokens per running word of `corpus`.
pub fn token_word_ratio(model: &BpeModel, corpus: &Corpus) -> Result<f64> {
    let words = corpus.running_words();
    if words == 0 {
        return Err(Error::EmptyCorpus);
    }
    let tokens: usize = corpus.words().map(|w| model.segment(w).len()).sum();
    Ok(tokens as f64 / words as f64)
}
