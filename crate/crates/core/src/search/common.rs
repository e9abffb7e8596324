use std::collections::HashMap;
use std::hash::Hash;

use super::LmScorer;
use crate::error::{Error, Result};
use crate::ngram::{LmState, LN_10};
use crate::text::{TokenId, EOS_ID};

pub(crate) const NIL: u32 = u32::MAX;

/// Backpointer arena. Entry `(a, b, parent)`; the meaning of `a` and `b`
/// belongs to the decoder.
#[derive(Default)]
pub(crate) struct Traces {
    items: Vec<(u32, u32, u32)>,
}

impl Traces {
    pub fn push(&mut self, parent: u32, a: u32, b: u32) -> u32 {
        self.items.push((a, b, parent));
        (self.items.len() - 1) as u32
    }

    /// Entries from the oldest to `id`.
    pub fn collect(&self, mut id: u32) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        while id != NIL {
            let (a, b, p) = self.items[id as usize];
            out.push((a, b));
            id = p;
        }
        out.reverse();
        out
    }
}

/// Interned LM states with memoized transitions. An inactive cache (zero
/// scale) keeps a single state and scores everything 0, so the LM has no
/// influence on search at all.
pub(crate) struct LmCache<'a> {
    lm: &'a dyn LmScorer,
    scale: f64,
    states: Vec<LmState>,
    index: HashMap<LmState, u32>,
    memo: HashMap<(u32, TokenId), (f64, u32)>,
}

impl<'a> LmCache<'a> {
    pub fn new(lm: &'a dyn LmScorer, scale: f64) -> Self {
        let begin = if scale > 0.0 {
            lm.begin_state()
        } else {
            LmState::default()
        };
        let mut index = HashMap::new();
        index.insert(begin.clone(), 0);
        LmCache {
            lm,
            scale,
            states: vec![begin],
            index,
            memo: HashMap::new(),
        }
    }

    pub fn lm(&self) -> &'a dyn LmScorer {
        self.lm
    }

    pub fn active(&self) -> bool {
        self.scale > 0.0
    }

    /// Scaled natural-log score of `token` and the successor state.
    pub fn step(&mut self, state: u32, token: TokenId) -> (f64, u32) {
        if !self.active() {
            return (0.0, 0);
        }
        if let Some(&hit) = self.memo.get(&(state, token)) {
            return hit;
        }
        let (lp, next) = self.lm.score(&self.states[state as usize], token);
        let next_id = match self.index.get(&next) {
            Some(&id) => id,
            None => {
                let id = self.states.len() as u32;
                self.states.push(next.clone());
                self.index.insert(next, id);
                id
            }
        };
        let s = if lp == f64::NEG_INFINITY {
            lp
        } else {
            self.scale * lp * LN_10
        };
        self.memo.insert((state, token), (s, next_id));
        (s, next_id)
    }

    pub fn end(&mut self, state: u32) -> f64 {
        self.step(state, EOS_ID).0
    }
}

/// LM ids of `words`; every word must be in the LM vocabulary.
pub(crate) fn lm_ids<'w>(
    lm: &dyn LmScorer,
    words: impl Iterator<Item = &'w str>,
) -> Result<Vec<TokenId>> {
    let mut ids = Vec::new();
    let mut missing = Vec::new();
    for w in words {
        match lm.vocab().id(w) {
            Some(id) => ids.push(id),
            None => {
                missing.push(w.to_owned());
                ids.push(0);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::VocabMismatch(format!(
            "{} entries missing from the LM vocabulary: {}",
            missing.len(),
            missing
                .iter()
                .take(5)
                .cloned()
                .collect::<Vec<_>>()
                .join(" ")
        )));
    }
    Ok(ids)
}

pub(crate) fn check_granularity(lm: &dyn LmScorer, subword: bool) -> Result<()> {
    if lm.is_subword() != subword {
        let (want, got) = if subword {
            ("subword", "word")
        } else {
            ("word", "subword")
        };
        return Err(Error::LmGranularity(format!(
            "search needs a {want} LM, got a {got} LM"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Hyp<K> {
    pub key: K,
    pub score: f64,
    pub trace: u32,
}

/// Hypotheses of one frame with recombination on the key.
pub(crate) struct Beam<K> {
    hyps: Vec<Hyp<K>>,
    index: HashMap<K, usize>,
}

impl<K: Copy + Eq + Hash + Ord> Beam<K> {
    pub fn new() -> Self {
        Beam {
            hyps: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Keeps the better of two hypotheses with equal keys; on a tie the one
    /// added first stays. Non-finite scores are dropped.
    pub fn add(&mut self, key: K, score: f64, trace: u32) {
        if !score.is_finite() {
            return;
        }
        match self.index.get(&key) {
            Some(&i) => {
                let h = &mut self.hyps[i];
                if score > h.score {
                    h.score = score;
                    h.trace = trace;
                }
            }
            None => {
                self.index.insert(key, self.hyps.len());
                self.hyps.push(Hyp { key, score, trace });
            }
        }
    }

    /// Best `beam` hypotheses (score, then key order), minus those below the
    /// margin.
    pub fn finish(self, beam: usize, margin: Option<f64>) -> Vec<Hyp<K>> {
        let mut hyps = self.hyps;
        hyps.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.key.cmp(&b.key)));
        hyps.truncate(beam);
        if let (Some(m), Some(best)) = (margin, hyps.first().map(|h| h.score)) {
            hyps.retain(|h| h.score >= best - m);
        }
        hyps
    }
}

/// Lexicographic order on label ids, then length.
pub(crate) fn history_cmp(a: &[u32], b: &[u32]) -> std::cmp::Ordering {
    a.iter().cmp(b.iter()).then(a.len().cmp(&b.len()))
}
