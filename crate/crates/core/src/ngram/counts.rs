use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ngram::MAX_ORDER;
use crate::text::{Corpus, TokenId, Vocabulary, BOS_ID, EOS_ID};

/// Raw n-gram counts for orders `1..=order`.
///
/// Every line is wrapped as `<s> w1 .. wn </s>` and all windows of each
/// length are counted. The sentence-begin symbol is never counted as a
/// unigram since it is never predicted.
#[derive(Clone, Debug)]
pub struct NGramCounts {
    order: usize,
    vocab: Vocabulary,
    tables: Vec<HashMap<Vec<TokenId>, u64>>,
}

impl NGramCounts {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Counts of the `n`-grams (1-based order).
    pub fn table(&self, n: usize) -> &HashMap<Vec<TokenId>, u64> {
        &self.tables[n - 1]
    }

    pub fn count(&self, ngram: &[TokenId]) -> u64 {
        if ngram.is_empty() || ngram.len() > self.order {
            return 0;
        }
        self.tables[ngram.len() - 1]
            .get(ngram)
            .copied()
            .unwrap_or(0)
    }
}

/// Counts n-grams of `corpus` up to `order`, mapping out-of-vocabulary words
/// to the unknown symbol.
pub fn count_ngrams(corpus: &Corpus, vocab: &Vocabulary, order: usize) -> Result<NGramCounts> {
    if order < 1 || order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "n-gram order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let mut tables = vec![HashMap::new(); order];
    for line in corpus.lines() {
        let mut ids = Vec::with_capacity(line.len() + 2);
        ids.push(BOS_ID);
        ids.extend(line.iter().map(|w| vocab.id_or_unk(w)));
        ids.push(EOS_ID);
        for (n, table) in tables.iter_mut().enumerate() {
            let n = n + 1;
            for window in ids.windows(n) {
                if n == 1 && window[0] == BOS_ID {
                    continue;
                }
                *table.entry(window.to_vec()).or_insert(0) += 1;
            }
        }
    }
    Ok(NGramCounts {
        order,
        vocab: vocab.clone(),
        tables,
    })
}
