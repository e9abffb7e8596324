//! Beam search decoders.
//!
//! Scores are natural-log throughout. LM scores enter as
//! `lm_scale * ln P_LM`, converted from the model's log10 values.
//!
//! Closed-vocabulary transducer decoding applies the word LM when a word-end
//! node of the lexical prefix tree is reached, exactly as the time-synchronous
//! hybrid and CTC decoders do. No LM lookahead is used.

mod common;
mod label_sync;
mod time_sync;
mod transducer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{build_prefix_tree, Lexicon, PrefixTree};
use crate::ngram::{LmState, NGramModel};
use crate::text::{TokenId, Vocabulary};

pub use label_sync::decode_label_sync;
pub use time_sync::{decode_time_sync, TimeSyncModel};
pub use transducer::{decode_transducer, TransducerVocab};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabMode {
    #[default]
    Closed,
    Open,
}

/// Search exponents and pruning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    /// λ, the external LM exponent.
    pub lm_scale: f64,
    /// α, the exponent of the divided-out prior or internal LM.
    pub prior_scale: f64,
    /// β, the HMM transition exponent.
    pub transition_scale: f64,
    /// δ, the length normalization weight of label-synchronous search.
    pub length_norm: f64,
    pub beam_size: usize,
    /// Drop hypotheses scoring more than this below the frame best.
    pub score_margin: Option<f64>,
    pub vocab_mode: VocabMode,
    /// Step limit of label-synchronous search; derived from the number of
    /// score rows when unset.
    pub max_output_len: Option<usize>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            lm_scale: 1.0,
            prior_scale: 0.0,
            transition_scale: 1.0,
            length_norm: 0.0,
            beam_size: 16,
            score_margin: None,
            vocab_mode: VocabMode::Closed,
            max_output_len: None,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        let exps = [
            ("lm_scale", self.lm_scale),
            ("prior_scale", self.prior_scale),
            ("transition_scale", self.transition_scale),
            ("length_norm", self.length_norm),
        ];
        for (name, v) in exps {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.beam_size == 0 {
            return Err(Error::InvalidArgument(
                "beam_size must be at least 1".into(),
            ));
        }
        if let Some(m) = self.score_margin {
            if !(m >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "score_margin must be >= 0, got {m}"
                )));
            }
        }
        if self.max_output_len == Some(0) {
            return Err(Error::InvalidArgument(
                "max_output_len must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Best hypothesis of one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub words: Vec<String>,
    /// Total natural-log score, including LM, prior and length terms.
    pub score: f64,
    /// Output units: pronunciation units of the chosen words for closed
    /// vocabulary, emitted tokens for open vocabulary.
    pub units: Vec<String>,
}

/// Language model as seen by the decoders. Scores are log10.
pub trait LmScorer: Sync {
    fn vocab(&self) -> &Vocabulary;

    /// True for subword-token models.
    fn is_subword(&self) -> bool;

    fn begin_state(&self) -> LmState;

    fn score(&self, state: &LmState, token: TokenId) -> (f64, LmState);
}

impl LmScorer for NGramModel {
    fn vocab(&self) -> &Vocabulary {
        NGramModel::vocab(self)
    }

    fn is_subword(&self) -> bool {
        NGramModel::is_subword(self)
    }

    fn begin_state(&self) -> LmState {
        NGramModel::begin_state(self)
    }

    fn score(&self, state: &LmState, token: TokenId) -> (f64, LmState) {
        NGramModel::score(self, state, token)
    }
}

/// A lexicon together with its prefix tree.
#[derive(Clone, Debug)]
pub struct SearchLexicon {
    lexicon: Lexicon,
    tree: PrefixTree,
}

impl SearchLexicon {
    pub fn new(lexicon: Lexicon) -> Result<Self> {
        let tree = build_prefix_tree(&lexicon)?;
        Ok(SearchLexicon { lexicon, tree })
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn tree(&self) -> &PrefixTree {
        &self.tree
    }
}
