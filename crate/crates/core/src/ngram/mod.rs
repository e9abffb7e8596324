//! Count-based back-off n-gram language models.
//!
//! Probabilities are kept in log10 (the ARPA convention); search code converts
//! to natural log at the boundary with [`LN_10`].

mod arpa;
mod counts;
mod model;

pub use arpa::{read_arpa, write_arpa};
pub use counts::{count_ngrams, NGramCounts};
pub use model::{
    estimate_ngram, lm_logprob, perplexity, renormalize_subword_ppl, LmState, NGramModel,
    Perplexity, Smoothing, DEFAULT_DISCOUNT, MAX_ORDER,
};

/// Natural logarithm of 10, for converting log10 scores to natural log.
pub const LN_10: f64 = std::f64::consts::LN_10;
