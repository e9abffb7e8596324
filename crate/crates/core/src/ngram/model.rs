use std::collections::HashMap;

use super::NGramCounts;
use crate::error::{Error, Result};
use crate::text::{Corpus, TokenId, Vocabulary, BOS_ID, EOS_ID, UNK_ID};

pub const MAX_ORDER: usize = 8;
pub const DEFAULT_DISCOUNT: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Smoothing {
    /// Relative frequencies with no mass reserved for unseen events.
    Mle,
    /// Interpolated absolute discounting with a single discount `d` in (0, 1).
    AbsoluteDiscount(f64),
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::AbsoluteDiscount(DEFAULT_DISCOUNT)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Entry {
    pub log10_prob: f64,
    pub backoff: Option<f64>,
}

/// Back-off n-gram model. `tables[k]` holds the `(k+1)`-grams.
#[derive(Clone, Debug)]
pub struct NGramModel {
    order: usize,
    vocab: Vocabulary,
    tables: Vec<HashMap<Vec<TokenId>, Entry>>,
}

/// Scoring context: the last `order - 1` tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LmState {
    context: Vec<TokenId>,
}

impl LmState {
    pub fn new(context: Vec<TokenId>) -> Self {
        LmState { context }
    }

    pub fn context(&self) -> &[TokenId] {
        &self.context
    }
}

impl NGramModel {
    pub(crate) fn from_tables(
        order: usize,
        vocab: Vocabulary,
        tables: Vec<HashMap<Vec<TokenId>, Entry>>,
    ) -> Self {
        NGramModel {
            order,
            vocab,
            tables,
        }
    }

    pub(crate) fn tables(&self) -> &[HashMap<Vec<TokenId>, Entry>] {
        &self.tables
    }

    /// Uniform unigram over every vocabulary entry except sentence-begin.
    pub fn uniform(vocab: &Vocabulary) -> Self {
        let support: Vec<TokenId> = (0..vocab.len() as TokenId)
            .filter(|&id| id != BOS_ID)
            .collect();
        Self::uniform_over(vocab, &support)
    }

    /// Uniform unigram over `support`; every other token has probability zero.
    pub fn uniform_over(vocab: &Vocabulary, support: &[TokenId]) -> Self {
        let lp = -(support.len() as f64).log10();
        let mut table = HashMap::new();
        for id in 0..vocab.len() as TokenId {
            let log10_prob = if support.contains(&id) {
                lp
            } else {
                f64::NEG_INFINITY
            };
            table.insert(
                vec![id],
                Entry {
                    log10_prob,
                    backoff: None,
                },
            );
        }
        NGramModel {
            order: 1,
            vocab: vocab.clone(),
            tables: vec![table],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Number of stored n-grams of order `n`.
    pub fn num_ngrams(&self, n: usize) -> usize {
        self.tables[n - 1].len()
    }

    /// State before the first word of a sentence.
    pub fn begin_state(&self) -> LmState {
        if self.order > 1 {
            LmState::new(vec![BOS_ID])
        } else {
            LmState::default()
        }
    }

    /// log10 P(token | context) by back-off recursion. Only the last
    /// `order - 1` context tokens are used.
    pub fn log10_prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        let keep = self.order - 1;
        let ctx = if context.len() > keep {
            &context[context.len() - keep..]
        } else {
            context
        };
        let mut key = [0 as TokenId; MAX_ORDER];
        let mut backoff = 0.0;
        for start in 0..=ctx.len() {
            let h = &ctx[start..];
            key[..h.len()].copy_from_slice(h);
            key[h.len()] = token;
            if let Some(e) = self.tables[h.len()].get(&key[..=h.len()]) {
                return backoff + e.log10_prob;
            }
            if !h.is_empty() {
                if let Some(b) = self.tables[h.len() - 1].get(h).and_then(|e| e.backoff) {
                    backoff += b;
                }
            }
        }
        f64::NEG_INFINITY
    }

    /// Scores `token` after `state` and returns the successor state.
    pub fn score(&self, state: &LmState, token: TokenId) -> (f64, LmState) {
        let lp = self.log10_prob(&state.context, token);
        (lp, self.next_state(state, token))
    }

    pub fn next_state(&self, state: &LmState, token: TokenId) -> LmState {
        let keep = self.order - 1;
        if keep == 0 {
            return LmState::default();
        }
        let mut ctx = Vec::with_capacity(keep);
        let prev = &state.context;
        let tail = if prev.len() + 1 > keep {
            &prev[prev.len() + 1 - keep..]
        } else {
            &prev[..]
        };
        ctx.extend_from_slice(tail);
        ctx.push(token);
        LmState::new(ctx)
    }

    /// Contexts with stored continuations (those carrying a back-off weight).
    pub fn contexts(&self) -> Vec<Vec<TokenId>> {
        let mut out: Vec<Vec<TokenId>> = self
            .tables
            .iter()
            .flat_map(|t| {
                t.iter()
                    .filter(|(_, e)| e.backoff.is_some())
                    .map(|(k, _)| k.clone())
            })
            .collect();
        out.sort();
        out
    }

    /// True when the vocabulary holds subword tokens (entries carrying the
    /// end-of-word marker) rather than whole words.
    pub fn is_subword(&self) -> bool {
        self.vocab
            .regular_words()
            .iter()
            .any(|w| w.ends_with(crate::text::END_OF_WORD))
    }
}

/// Free-function form of [`NGramModel::score`].
pub fn lm_logprob(model: &NGramModel, state: &LmState, token: TokenId) -> (f64, LmState) {
    model.score(state, token)
}

/// Estimates a back-off model from raw counts.
///
/// With absolute discounting, a seen n-gram gets
/// `(c(h,w) - d) / c(h) + gamma(h) * P(w | h')` and an unseen one
/// `gamma(h) * P(w | h')`, where `gamma(h) = d * N1+(h .) / c(h)` and `h'`
/// drops the oldest context token. Unigrams interpolate with the uniform
/// distribution over all predictable tokens, so every context normalizes
/// over the full vocabulary.
pub fn estimate_ngram(counts: &NGramCounts, smoothing: Smoothing) -> Result<NGramModel> {
    let discount = match smoothing {
        Smoothing::Mle => None,
        Smoothing::AbsoluteDiscount(d) => {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "discount must lie in (0, 1), got {d}"
                )));
            }
            Some(d)
        }
    };
    let order = counts.order();
    let vocab = counts.vocab().clone();
    let mut model = NGramModel {
        order,
        vocab,
        tables: vec![HashMap::new(); order],
    };

    let unigrams = counts.table(1);
    let total: u64 = unigrams.values().sum();
    let predictable = model.vocab.len() - 1;
    for id in 0..model.vocab.len() as TokenId {
        let c = unigrams.get(&vec![id]).copied().unwrap_or(0);
        let p = if id == BOS_ID {
            0.0
        } else {
            match discount {
                None if total == 0 => 0.0,
                None => c as f64 / total as f64,
                Some(_) if total == 0 => 1.0 / predictable as f64,
                Some(d) => {
                    let seen = if c > 0 {
                        (c as f64 - d) / total as f64
                    } else {
                        0.0
                    };
                    seen + d * unigrams.len() as f64 / total as f64 / predictable as f64
                }
            }
        };
        if p > 0.0 || discount.is_some() || id == BOS_ID {
            model.tables[0].insert(
                vec![id],
                Entry {
                    log10_prob: p.log10(),
                    backoff: None,
                },
            );
        }
    }

    for n in 2..=order {
        let table = counts.table(n);
        let mut ctx_stats: HashMap<&[TokenId], (u64, u64)> = HashMap::new();
        for (ngram, &c) in table {
            let s = ctx_stats.entry(&ngram[..n - 1]).or_default();
            s.0 += c;
            s.1 += 1;
        }
        let mut entries = Vec::with_capacity(table.len());
        for (ngram, &c) in table {
            let (ctx_total, _) = ctx_stats[&ngram[..n - 1]];
            let p = match discount {
                None => c as f64 / ctx_total as f64,
                Some(d) => {
                    let (_, types) = ctx_stats[&ngram[..n - 1]];
                    let gamma = d * types as f64 / ctx_total as f64;
                    let lower = model.log10_prob(&ngram[1..n - 1], ngram[n - 1]);
                    (c as f64 - d) / ctx_total as f64 + gamma * 10f64.powf(lower)
                }
            };
            entries.push((ngram.clone(), p.log10()));
        }
        for (ctx, (ctx_total, types)) in ctx_stats {
            let bow = match discount {
                None => f64::NEG_INFINITY,
                Some(d) => (d * types as f64 / ctx_total as f64).log10(),
            };
            match model.tables[n - 2].get_mut(ctx) {
                Some(e) => e.backoff = Some(bow),
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "inconsistent counts: context {ctx:?} has no {}-gram entry",
                        n - 1
                    )))
                }
            }
        }
        model.tables[n - 1].extend(entries.into_iter().map(|(k, lp)| {
            (
                k,
                Entry {
                    log10_prob: lp,
                    backoff: None,
                },
            )
        }));
    }
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perplexity {
    pub perplexity: f64,
    pub log10_prob: f64,
    /// Scored events: running words plus one sentence end per line.
    pub tokens: usize,
    pub oov: usize,
    pub sentences: usize,
}

/// Per-token perplexity of `corpus`, scoring out-of-vocabulary words as the
/// unknown symbol and counting them separately.
pub fn perplexity(model: &NGramModel, corpus: &Corpus) -> Result<Perplexity> {
    if corpus.num_lines() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut sum = 0.0;
    let mut tokens = 0;
    let mut oov = 0;
    for line in corpus.lines() {
        let mut state = model.begin_state();
        let ids = line
            .iter()
            .map(|w| match model.vocab.id(w) {
                Some(id) => (id, w.as_str()),
                None => {
                    oov += 1;
                    (UNK_ID, w.as_str())
                }
            })
            .chain(std::iter::once((EOS_ID, crate::text::EOS)));
        for (id, w) in ids {
            let (lp, next) = model.score(&state, id);
            if lp == f64::NEG_INFINITY {
                return Err(Error::ZeroProbability {
                    token: w.to_owned(),
                });
            }
            sum += lp;
            tokens += 1;
            state = next;
        }
    }
    Ok(Perplexity {
        perplexity: 10f64.powf(-sum / tokens as f64),
        log10_prob: sum,
        tokens,
        oov,
        sentences: corpus.num_lines(),
    })
}

/// Converts a subword-level perplexity to word level:
/// `ppl ^ (token_count / word_count)`.
pub fn renormalize_subword_ppl(
    subword_ppl: f64,
    token_count: usize,
    word_count: usize,
) -> Result<f64> {
    if word_count == 0 || token_count == 0 {
        return Err(Error::InvalidArgument(
            "token and word counts must be positive".into(),
        ));
    }
    if !(subword_ppl > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "perplexity must be positive, got {subword_ppl}"
        )));
    }
    Ok(subword_ppl.powf(token_count as f64 / word_count as f64))
}
