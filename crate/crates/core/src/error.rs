use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the decoding engine and evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero probability for token `{token}`")]
    ZeroProbability { token: String },

    #[error("arpa parse error at line {line}: {msg}")]
    Arpa { line: usize, msg: String },

    #[error("bpe model parse error at line {line}: {msg}")]
    BpeParse { line: usize, msg: String },

    #[error("lexicon parse error at line {line}: {msg}")]
    LexiconParse { line: usize, msg: String },

    #[error("posteriorgram: {0}")]
    Posteriorgram(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("empty lexicon")]
    EmptyLexicon,

    #[error("vocabulary/lexicon mismatch: {0}")]
    VocabMismatch(String),

    #[error("LM granularity mismatch: {0}")]
    LmGranularity(String),

    #[error("no terminated hypothesis within {0} steps")]
    NoTerminatedHypothesis(usize),

    #[error("no hypothesis ends at a word boundary")]
    NoFinalHypothesis,

    #[error("profile undefined: report contains no errors")]
    ProfileUndefined,

    #[error("target WER {target:.4} unreachable in [0, {tau_max}]: WER(0) = {wer_low:.4}, WER(tau_max) = {wer_high:.4}")]
    Unreachable {
        target: f64,
        tau_max: f64,
        wer_low: f64,
        wer_high: f64,
    },

    #[error("calibration did not converge after {iterations} iterations (last tau {tau:.6}, WER {wer:.4})")]
    NotConverged {
        iterations: usize,
        tau: f64,
        wer: f64,
    },

    #[error("experiment: {0}")]
    Experiment(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or inconsistent user input, as
    /// opposed to failures that happen while running a valid job.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::EmptyCorpus
                | Error::InvalidArgument(_)
                | Error::Arpa { .. }
                | Error::BpeParse { .. }
                | Error::LexiconParse { .. }
                | Error::Posteriorgram(_)
                | Error::UnknownLabel(_)
                | Error::EmptyLexicon
                | Error::VocabMismatch(_)
                | Error::LmGranularity(_)
                | Error::Experiment(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
