//! Training-data synthesis, test set construction, evaluation and
//! constrained decoding for lexically constrained machine translation into
//! morphologically rich languages.

pub mod assemble;
pub mod corpus;
pub mod decode;
pub mod draws;
pub mod eval;
pub mod lexicon;
pub mod morph;
pub mod synth;
pub mod testset;

pub use assemble::{assemble, AnnotatedExample, AssembleError, FactorLabel, InputFormat, CSEP, SEP, SHIFT_BASE};
pub use corpus::{load_parallel, Corpus, CorpusError, CorpusFormat, Sentence, SentencePair, Side, SidecarFormat};
pub use decode::{decode_corpus, train_ngram, DecodeError, NGramLM, Scorer, SearchConfig, Vocab};
pub use draws::{Domain, DrawStream};
pub use eval::{bleu, coverage, evaluate, EvalError, EvalReport};
pub use lexicon::{build_lexicon, LexiconError, LexiconMode, Span, TermEntry, TermLexicon};
pub use morph::{Analyzer, AnalyzerKind, LemmaTable, MorphError, Stemmer};
pub use synth::{synthesize, Constraint, ConstraintSet, EmitForm, FormMode, Origin, Sampler, SamplerConfig, SynthError};
pub use testset::{Policy, SplitTag, TestCase, TestSet, TestSetError, TestSetKind};
