//! Corpus handling, vocabularies, OOV statistics and BPE subword units.

mod bpe;
mod corpus;
mod vocab;

pub use bpe::{bpe_apply, bpe_learn, token_word_ratio, tokens_to_words, BpeModel, END_OF_WORD};
pub use corpus::Corpus;
pub use vocab::{
    build_vocabulary, oov_rate, TokenId, Vocabulary, BOS, BOS_ID, EOS, EOS_ID, UNK, UNK_ID,
};
