//! Parallel corpus ingestion with optional lemma layers.
//!
//! Sentences are whitespace-tokenized. Lemma sidecars (CoNLL-U or
//! `token<TAB>lemma` blocks) are attached per side and lowercased on the way in.

use std::collections::HashSet;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morph::Analyzer;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line count mismatch: source has {0} lines, target has {1}")]
    LineCountMismatch(usize, usize),
    #[error("invalid UTF-8 on line {0}")]
    Utf8Error(usize),
    #[error("line {0}: expected `source<TAB>target`")]
    MalformedTsv(usize),
    #[error("pair {0}: lemma sidecar token count does not match the sentence")]
    TokenCountMismatch(usize),
    #[error("pair {0}: lemma sidecar has no sentence for this pair")]
    MissingSentence(usize),
    #[error("lemma sidecar has {0} more sentences than the corpus")]
    SurplusSentences(usize),
    #[error("sidecar line {0}: malformed record")]
    MalformedSidecar(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// Two aligned files, one sentence per line.
    Moses2Files,
    /// One file of `source<TAB>target` lines.
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SidecarFormat {
    Conllu,
    TsvTokenLemma,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub index: usize,
    /// Character offset in the single-space-joined sentence.
    pub char_start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub raw: String,
}

impl Sentence {
    /// Whitespace tokenization of a raw line.
    pub fn parse(raw: &str) -> Self {
        let mut tokens = Vec::new();
        let mut offset = 0;
        for (index, surface) in raw.split_whitespace().enumerate() {
            tokens.push(Token {
                surface: surface.to_string(),
                index,
                char_start: offset,
            });
            offset += surface.chars().count() + 1;
        }
        Sentence {
            tokens,
            raw: raw.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.clone()).collect()
    }

    pub fn surface_refs(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    /// Tokens joined by single spaces.
    pub fn detokenized(&self) -> String {
        self.surface_refs().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: usize,
    pub source: Sentence,
    pub target: Sentence,
    pub source_lemmas: Option<Vec<String>>,
    pub target_lemmas: Option<Vec<String>>,
}

impl SentencePair {
    pub fn new(id: usize, source: &str, target: &str) -> Self {
        SentencePair {
            id,
            source: Sentence::parse(source),
            target: Sentence::parse(target),
            source_lemmas: None,
            target_lemmas: None,
        }
    }

    pub fn sentence(&self, side: Side) -> &Sentence {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }

    pub fn lemmas(&self, side: Side) -> Option<&[String]> {
        match side {
            Side::Source => self.source_lemmas.as_deref(),
            Side::Target => self.target_lemmas.as_deref(),
        }
    }

    fn lemmas_mut(&mut self, side: Side) -> &mut Option<Vec<String>> {
        match side {
            Side::Source => &mut self.source_lemmas,
            Side::Target => &mut self.target_lemmas,
        }
    }

    /// Sets a lemma layer, lowercasing every lemma.
    pub fn set_lemmas(&mut self, side: Side, lemmas: Vec<String>) -> Result<(), CorpusError> {
        if lemmas.len() != self.sentence(side).len() {
            return Err(CorpusError::TokenCountMismatch(self.id));
        }
        *self.lemmas_mut(side) = Some(lemmas.into_iter().map(|l| l.to_lowercase()).collect());
        Ok(())
    }

    /// Fills a lemma layer by running `analyzer` over the surfaces.
    pub fn lemmatize_with(&mut self, side: Side, analyzer: &Analyzer) {
        let lemmas = analyzer.normalize_sequence(&self.sentence(side).surface_refs());
        *self.lemmas_mut(side) = Some(lemmas);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub paths: Vec<PathBuf>,
    pub format: Option<CorpusFormat>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub pairs: Vec<SentencePair>,
    pub provenance: Provenance,
}

fn read_file(path: &Path) -> Result<Vec<u8>, CorpusError> {
    fs::read(path).map_err(|e| CorpusError::io(path, e))
}

/// Splits LF-terminated bytes into UTF-8 lines. A trailing newline does not
/// open an extra line. Line numbers in errors are 0-based.
fn split_lines(bytes: &[u8]) -> Result<Vec<String>, CorpusError> {
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let raw: Vec<&[u8]> = body.split(|&b| b == b'\n').collect();
    raw.par_iter()
        .enumerate()
        .map(|(no, line)| {
            std::str::from_utf8(line)
                .map(str::to_string)
                .map_err(|_| CorpusError::Utf8Error(no))
        })
        .collect()
}

impl Corpus {
    pub fn from_pairs(pairs: Vec<SentencePair>) -> Self {
        Corpus {
            pairs,
            provenance: Provenance::default(),
        }
    }

    /// Builds a corpus from in-memory aligned lines.
    pub fn from_lines<S: AsRef<str> + Sync>(source: &[S], target: &[S]) -> Result<Self, CorpusError> {
        if source.len() != target.len() {
            return Err(CorpusError::LineCountMismatch(source.len(), target.len()));
        }
        let pairs = source
            .par_iter()
            .zip(target.par_iter())
            .enumerate()
            .map(|(id, (s, t))| SentencePair::new(id, s.as_ref(), t.as_ref()))
            .collect();
        Ok(Corpus::from_pairs(pairs))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SentencePair> {
        self.pairs.iter()
    }

    pub fn has_lemmas(&self, side: Side) -> bool {
        self.pairs.iter().all(|p| p.lemmas(side).is_some())
    }

    /// Fills missing lemma layers on `side` using `analyzer`.
    pub fn lemmatize_missing(&mut self, side: Side, analyzer: &Analyzer) {
        self.pairs.par_iter_mut().for_each(|p| {
            if p.lemmas(side).is_none() {
                p.lemmatize_with(side, analyzer);
            }
        });
    }

    /// Writes the raw source and target lines back out, LF-terminated.
    pub fn write_moses<W: Write>(&self, source: &mut W, target: &mut W) -> io::Result<()> {
        for pair in &self.pairs {
            writeln!(source, "{}", pair.source.raw)?;
            writeln!(target, "{}", pair.target.raw)?;
        }
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for pair in &self.pairs {
            writeln!(out, "{}\t{}", pair.source.raw, pair.target.raw)?;
        }
        Ok(())
    }
}

/// Loads a parallel corpus. For [`CorpusFormat::Tsv`] the pairs are read from
/// `source_path` and `target_path` is ignored.
pub fn load_parallel(
    source_path: &Path,
    target_path: Option<&Path>,
    format: CorpusFormat,
) -> Result<Corpus, CorpusError> {
    let mut corpus = match format {
        CorpusFormat::Moses2Files => {
            let target_path = target_path.ok_or_else(|| {
                CorpusError::io(
                    source_path,
                    io::Error::new(io::ErrorKind::InvalidInput, "moses-2-files needs a target file"),
                )
            })?;
            let src = split_lines(&read_file(source_path)?)?;
            let tgt = split_lines(&read_file(target_path)?)?;
            let mut corpus = Corpus::from_lines(&src, &tgt)?;
            corpus.provenance.paths = vec![source_path.to_path_buf(), target_path.to_path_buf()];
            corpus
        }
        CorpusFormat::Tsv => {
            let lines = split_lines(&read_file(source_path)?)?;
            let pairs = lines
                .par_iter()
                .enumerate()
                .map(|(id, line)| {
                    let (s, t) = line.split_once('\t').ok_or(CorpusError::MalformedTsv(id))?;
                    Ok(SentencePair::new(id, s, t))
                })
                .collect::<Result<Vec<_>, CorpusError>>()?;
            let mut corpus = Corpus::from_pairs(pairs);
            corpus.provenance.paths = vec![source_path.to_path_buf()];
            corpus
        }
    };
    corpus.provenance.format = Some(format);
    Ok(corpus)
}

/// Parses a lemma sidecar into per-sentence `(form, lemma)` rows.
pub fn parse_sidecar<R: BufRead>(reader: R, format: SidecarFormat) -> Result<Vec<Vec<(String, String)>>, CorpusError> {
    let mut sentences = Vec::new();
    let mut current: Vec<(String, String)> = Vec::new();
    let mut in_sentence = false;
    for (no, line) in reader.lines().enumerate() {
        let line = line.map_err(|_| CorpusError::Utf8Error(no))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if in_sentence {
                sentences.push(std::mem::take(&mut current));
                in_sentence = false;
            }
            continue;
        }
        match format {
            SidecarFormat::Conllu => {
                if line.starts_with('#') {
                    in_sentence = true;
                    continue;
                }
                let cols: Vec<&str> = line.split('\t').collect();
                if cols.len() < 3 {
                    return Err(CorpusError::MalformedSidecar(no));
                }
                in_sentence = true;
                // multiword ranges ("3-4") and empty nodes ("5.1") carry no token of their own
                if cols[0].contains('-') || cols[0].contains('.') {
                    continue;
                }
                current.push((cols[1].to_string(), cols[2].to_string()));
            }
            SidecarFormat::TsvTokenLemma => {
                let (form, lemma) = line.split_once('\t').ok_or(CorpusError::MalformedSidecar(no))?;
                in_sentence = true;
                current.push((form.to_string(), lemma.to_string()));
            }
        }
    }
    if in_sentence {
        sentences.push(current);
    }
    Ok(sentences)
}

/// Attaches lemma rows (one sentence per pair, in corpus order) to `side`.
pub fn attach_lemma_rows(
    mut corpus: Corpus,
    side: Side,
    rows: Vec<Vec<(String, String)>>,
) -> Result<Corpus, CorpusError> {
    if rows.len() > corpus.len() {
        return Err(CorpusError::SurplusSentences(rows.len() - corpus.len()));
    }
    if rows.len() < corpus.len() {
        return Err(CorpusError::MissingSentence(corpus.pairs[rows.len()].id));
    }
    for (pair, sentence) in corpus.pairs.iter_mut().zip(rows) {
        let lemmas = sentence.into_iter().map(|(_, lemma)| lemma).collect();
        pair.set_lemmas(side, lemmas)?;
    }
    Ok(corpus)
}

pub fn attach_lemmas(
    corpus: Corpus,
    side: Side,
    sidecar_path: &Path,
    format: SidecarFormat,
) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(sidecar_path).map_err(|e| CorpusError::io(sidecar_path, e))?;
    let rows = parse_sidecar(BufReader::new(file), format)?;
    attach_lemma_rows(corpus, side, rows)
}

/// Lowercases and collapses runs of whitespace.
pub fn normalize_line(line: &str) -> String {
    line.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Drops pairs whose normalized target line is blacklisted. Survivors keep
/// their ids and order.
pub fn exclude(corpus: Corpus, blacklist: &HashSet<String>) -> Corpus {
    if blacklist.is_empty() {
        return corpus;
    }
    let Corpus { pairs, provenance } = corpus;
    let pairs = pairs
        .into_iter()
        .filter(|p| !blacklist.contains(&normalize_line(&p.target.raw)))
        .collect();
    Corpus { pairs, provenance }
}
