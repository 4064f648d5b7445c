use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet for language `{language}`: {reason}")]
    InvalidAlphabet { language: String, reason: String },

    #[error("unknown language `{0}`")]
    UnknownLanguage(String),

    #[error("unknown character {character:?} at position {position} for language `{language}`")]
    UnknownCharacter {
        character: char,
        position: usize,
        language: String,
    },

    #[error("invalid text: {0}")]
    InvalidText(String),

    #[error("invalid token sequence: {0}")]
    InvalidSequence(String),

    #[error("target of length {target_len} needs {required} frames but only {frames} are available")]
    InfeasibleTarget {
        target_len: usize,
        required: usize,
        frames: usize,
    },

    #[error("target token {token} is masked out of the lattice")]
    MaskedTarget { token: usize },

    #[error("target has zero probability under the lattice (numeric underflow)")]
    ZeroProbability,

    #[error("brute-force enumeration of {0} alignments exceeds the guard")]
    EnumerationGuard(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("label set mismatch, checkpoint lacks tokens: {}", .0.join(" "))]
    LabelSetMismatch(Vec<String>),

    #[error("missing utterance ids: {}", .0.join(", "))]
    MissingIds(Vec<String>),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
