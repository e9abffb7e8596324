use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::text::{BpeModel, END_OF_WORD};

pub type UnitId = u32;

/// Label of the optional between-word silence.
pub const SILENCE: &str = "[SIL]";
/// Suffix marking the word-final variant of a phoneme.
pub const WORD_END_MARK: char = '#';

/// Ordered set of output units with a word-final flag per unit.
///
/// Phoneme inventories place base `i` at id `2i`, its word-final twin at
/// `2i + 1` and silence last. Subword inventories take the BPE symbol list
/// as is; a unit is word-final when it carries the end-of-word marker.
#[derive(Clone, Debug, PartialEq)]
pub struct Inventory {
    symbols: Vec<String>,
    word_end: Vec<bool>,
    silence: Option<UnitId>,
    index: HashMap<String, UnitId>,
}

impl Inventory {
    /// Phoneme inventory over `bases`, in the given order.
    pub fn phonemes<I, S>(bases: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut symbols = Vec::new();
        let mut word_end = Vec::new();
        for b in bases {
            let b = b.as_ref();
            if b.is_empty()
                || b.ends_with(WORD_END_MARK)
                || b == SILENCE
                || b.contains(char::is_whitespace)
            {
                return Err(Error::InvalidArgument(format!(
                    "invalid base phoneme {b:?}"
                )));
            }
            symbols.push(b.to_owned());
            word_end.push(false);
            symbols.push(format!("{b}{WORD_END_MARK}"));
            word_end.push(true);
        }
        let silence = symbols.len() as UnitId;
        symbols.push(SILENCE.to_owned());
        word_end.push(false);
        Self::from_symbols(symbols, word_end, Some(silence))
    }

    /// Subword inventory over the symbols of a BPE model.
    pub fn subwords(model: &BpeModel) -> Result<Self> {
        let symbols = model.vocab().to_vec();
        let word_end = symbols.iter().map(|s| s.ends_with(END_OF_WORD)).collect();
        Self::from_symbols(symbols, word_end, None)
    }

    fn from_symbols(
        symbols: Vec<String>,
        word_end: Vec<bool>,
        silence: Option<UnitId>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i as UnitId).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate unit {s:?}")));
            }
        }
        Ok(Inventory {
            symbols,
            word_end,
            silence,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, id: UnitId) -> &str {
        &self.symbols[id as usize]
    }

    pub fn id(&self, symbol: &str) -> Option<UnitId> {
        self.index.get(symbol).copied()
    }

    pub fn is_word_end(&self, id: UnitId) -> bool {
        self.word_end[id as usize]
    }

    pub fn silence(&self) -> Option<UnitId> {
        self.silence
    }

    /// Base phonemes, without twins or silence. Empty for subword inventories.
    pub fn bases(&self) -> Vec<&str> {
        if self.silence.is_none() {
            return Vec::new();
        }
        self.symbols
            .iter()
            .zip(&self.word_end)
            .filter(|(s, &we)| !we && s.as_str() != SILENCE)
            .map(|(s, _)| s.as_str())
            .collect()
    }

    /// Word-final twin of a phoneme given by its base symbol.
    pub fn word_end_twin(&self, base: &str) -> Option<UnitId> {
        self.id(&format!("{base}{WORD_END_MARK}"))
    }
}

/// Strips one trailing stress digit (0, 1 or 2) from a phoneme symbol.
pub fn strip_stress(phone: &str) -> &str {
    match phone.as_bytes().last() {
        Some(b'0'..=b'2') if phone.len() > 1 => &phone[..phone.len() - 1],
        _ => phone,
    }
}

/// Merges stress variants and adds word-final twins plus silence. Bases are
/// sorted; silence and already-marked symbols in the input are ignored.
pub fn normalize_inventory<I, S>(raw: I) -> Result<Inventory>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut bases = BTreeSet::new();
    for p in raw {
        let p = p.as_ref().trim();
        if p.is_empty() || p == SILENCE {
            continue;
        }
        let p = strip_stress(p.trim_end_matches(WORD_END_MARK));
        if !p.is_empty() {
            bases.insert(p.to_owned());
        }
    }
    Inventory::phonemes(bases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stress_variants_merge() {
        let inv = normalize_inventory(["AH0", "AH1", "AH2"]).unwrap();
        assert_eq!(inv.symbols(), ["AH", "AH#", SILENCE]);
        assert!(inv.is_word_end(1));
        assert!(!inv.is_word_end(0));
    }

    #[test]
    fn single_base_gets_twin() {
        let inv = normalize_inventory(["T"]).unwrap();
        assert_eq!(inv.symbols(), ["T", "T#", SILENCE]);
        assert_eq!(inv.word_end_twin("T"), Some(1));
        assert_eq!(inv.silence(), Some(2));
    }

    #[test]
    fn merged_count_is_two_per_base_plus_silence() {
        // k bases with up to three stress variants each, checked against a
        // direct count of distinct stripped symbols
        let raw: Vec<String> = ["AA", "IY", "K", "S", "ER"]
            .iter()
            .enumerate()
            .flat_map(|(i, b)| {
                (0..=(i % 3)).map(move |d| {
                    if b.len() > 1 {
                        format!("{b}{d}")
                    } else {
                        b.to_string()
                    }
                })
            })
            .collect();
        let distinct: BTreeSet<&str> = raw.iter().map(|p| strip_stress(p)).collect();
        let inv = normalize_inventory(&raw).unwrap();
        assert_eq!(inv.len(), 2 * distinct.len() + 1);
        assert_eq!(inv.bases(), distinct.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn digits_beyond_two_are_kept() {
        assert_eq!(strip_stress("AH3"), "AH3");
        assert_eq!(strip_stress("AH1"), "AH");
        assert_eq!(strip_stress("1"), "1");
    }

    #[test]
    fn invalid_base_rejected() {
        assert!(Inventory::phonemes(["a", "a"]).is_err());
        assert!(Inventory::phonemes(["a#"]).is_err());
    }

    #[test]
    fn subword_flags_follow_marker() {
        let bpe = BpeModel::from_parts(None, vec![("a".into(), "b</w>".into())]).unwrap();
        let inv = Inventory::subwords(&bpe).unwrap();
        assert_eq!(inv.silence(), None);
        for (i, s) in inv.symbols().iter().enumerate() {
            assert_eq!(inv.is_word_end(i as UnitId), s.ends_with(END_OF_WORD));
        }
        assert!(inv.id("ab</w>").is_some());
    }
}
