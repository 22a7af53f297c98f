use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("MIDI parse error: {0}")]
    MidiParse(String),

    #[error("line {line}: {message}")]
    TextParse { line: usize, message: String },

    #[error("melody contains no notes")]
    EmptyMelody,

    #[error("cannot decode sequence: {0}")]
    Decode(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("{} file(s) failed to load: {}", .0.len(), format_failures(.0))]
    CorpusLoad(Vec<(PathBuf, String)>),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sequence of length {len} is shorter than the filter length {filter}")]
    SequenceTooShort { len: usize, filter: usize },

    #[error("alphabet mismatch: model has {model} symbols, data has {data}")]
    AlphabetMismatch { model: usize, data: usize },

    #[error("no evaluation window fits: {0}")]
    NoWindows(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_failures(failures: &[(PathBuf, String)]) -> String {
    failures
        .iter()
        .map(|(p, e)| format!("{}: {}", p.display(), e))
        .collect::<Vec<_>>()
        .join("; ")
}
