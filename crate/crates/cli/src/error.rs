use std::io;
use std::path::PathBuf;

use lemmacon_core::{
    AssembleError, CorpusError, DecodeError, EvalError, LexiconError, MorphError, SynthError, TestSetError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or invalid settings.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("pair {pair_id}: {source}")]
    Assemble {
        pair_id: usize,
        #[source]
        source: AssembleError,
    },
    /// Assembly errors that already name their pair.
    #[error(transparent)]
    Format(AssembleError),
    #[error(transparent)]
    TestSet(#[from] TestSetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Attaches `pair_id` to errors that lack it.
    pub fn assemble(pair_id: usize, e: AssembleError) -> Self {
        match e {
            AssembleError::MissingSourceSpan(_) | AssembleError::OverlappingSourceSpans(..) | AssembleError::Synth(_) => {
                CliError::Assemble { pair_id, source: e }
            }
            e => CliError::Format(e),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for usage and configuration problems, 2 for bad input data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }
}
