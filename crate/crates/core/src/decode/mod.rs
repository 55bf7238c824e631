//! Lexically constrained decoding over a pluggable next-token scorer.

mod beam;
mod external;
mod ngram;
mod scorer;

use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

pub use beam::{
    beam_search, constrained_beam_search, contains_all, ConstraintState, ConstraintTracker, DecodeResult, Hypothesis,
    SearchConfig,
};
pub use external::ExternalScorer;
pub use ngram::{train_ngram, NGramLM};
pub use scorer::{Scorer, TokenId, Vocab, BOS, EOS, UNK};

use crate::synth::{EmitForm, SynthError};
use crate::testset::TestSet;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("constraint token `{0}` is not in the scorer vocabulary")]
    ConstraintTokenOutOfVocab(String),
    #[error("no training sentences")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("discount must lie in (0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("beam size must be positive")]
    InvalidBeam,
    #[error("case {pair_id}: {source}")]
    Form {
        pair_id: usize,
        #[source]
        source: SynthError,
    },
    #[error("scorer protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl DecodeError {
    pub(crate) fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        DecodeError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}

/// Constraint token sequences of every case in `form`.
pub fn realized_constraints(testset: &TestSet, form: EmitForm) -> Result<Vec<Vec<Vec<String>>>, DecodeError> {
    testset
        .cases
        .iter()
        .map(|case| {
            case.constraints
                .iter()
                .map(|c| {
                    c.form(form)
                        .map(<[String]>::to_vec)
                        .ok_or(DecodeError::Form {
                            pair_id: case.pair_id,
                            source: SynthError::MissingForm(form),
                        })
                })
                .collect()
        })
        .collect()
}

/// One hypothesis line per case, in test set order.
pub fn decode_corpus(
    scorer: &dyn Scorer,
    testset: &TestSet,
    form: EmitForm,
    cfg: SearchConfig,
) -> Result<Vec<String>, DecodeError> {
    let vocab = scorer.vocab();
    let cases = realized_constraints(testset, form)?;
    cases
        .par_iter()
        .map(|constraints| {
            let ids = constraints
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|t| vocab.id(t).ok_or_else(|| DecodeError::ConstraintTokenOutOfVocab(t.clone())))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let result = constrained_beam_search(scorer, &ids, cfg)?;
            Ok(vocab.decode(&result.tokens))
        })
        .collect()
}
