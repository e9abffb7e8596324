//! Sequence decoding engine and domain-shift evaluation harness.
//!
//! The crate covers four ASR decision rules behind one search API: a factored
//! hybrid HMM (diphone and triphone), phoneme CTC with a label prior, monotonic
//! transducers with internal-LM subtraction, and a label-synchronous
//! attention-style decoder with length normalization. External count-based
//! n-gram LMs are fused log-linearly. A temperature-controlled emitter
//! synthesizes acoustic scores so that language-domain shift can be studied
//! with acoustic conditions held fixed.

pub mod acoustic;
pub mod emitter;
pub mod error;
pub mod harness;
pub mod lexicon;
pub mod ngram;
pub mod search;
pub mod text;
pub mod topology;

pub use error::{Error, Result};
