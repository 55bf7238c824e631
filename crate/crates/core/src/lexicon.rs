//! Bilingual dictionaries and terminology bases, keyed by normalized token
//! sequences, plus longest-match search of term pairs inside sentence pairs.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, SentencePair, Side};
use crate::morph::Analyzer;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {0}: empty source or target term")]
    EmptyEntry(usize),
    #[error("pair {pair_id}: missing {side:?} lemma layer")]
    MissingLemmaLayer { pair_id: usize, side: Side },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconMode {
    /// One source term may have many translations.
    Dictionary,
    /// One translation per source term is expected.
    Terminology,
}

/// Half-open token range `[start, end)`. Serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(end > start);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from(v: [usize; 2]) -> Self {
        Span { start: v[0], end: v[1] }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermEntry {
    pub entry_id: usize,
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
    pub source_key: Vec<String>,
    pub target_key: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermMatch {
    pub entry_id: usize,
    pub source_span: Span,
    pub target_span: Option<Span>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// Source and target keys are identical.
    Copy,
    /// A single-token key of at most two characters.
    ShortToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedTerm {
    pub line_no: usize,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: HashMap<String, usize>,
    /// Entry ids whose source key ends here, ascending.
    entries: Vec<usize>,
}

/// Token trie over source keys.
#[derive(Debug, Clone)]
struct KeyTrie {
    nodes: Vec<TrieNode>,
}

impl Default for KeyTrie {
    fn default() -> Self {
        KeyTrie {
            nodes: vec![TrieNode::default()],
        }
    }
}

impl KeyTrie {
    fn insert(&mut self, key: &[String], entry_id: usize) {
        let mut node = 0;
        for tok in key {
            node = match self.nodes[node].children.get(tok) {
                Some(&next) => next,
                None => {
                    self.nodes.push(TrieNode::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[node].children.insert(tok.clone(), next);
                    next
                }
            };
        }
        self.nodes[node].entries.push(entry_id);
    }

    /// Calls `f(end, entry_ids)` for every key that starts at `start`.
    fn walk_from<S: AsRef<str>>(&self, tokens: &[S], start: usize, mut f: impl FnMut(usize, &[usize])) {
        let mut node = 0;
        for (i, tok) in tokens.iter().enumerate().skip(start) {
            match self.nodes[node].children.get(tok.as_ref()) {
                Some(&next) => node = next,
                None => return,
            }
            if !self.nodes[node].entries.is_empty() {
                f(i + 1, &self.nodes[node].entries);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TermLexicon {
    pub entries: Vec<TermEntry>,
    pub source_index: HashMap<Vec<String>, Vec<usize>>,
    pub mode: LexiconMode,
    pub dropped: Vec<DroppedTerm>,
    pub provenance: Option<PathBuf>,
    trie: KeyTrie,
}

/// Finds the first occurrence of `needle` in `hay` that avoids every span in `taken`.
pub fn find_free_occurrence<S: AsRef<str>, T: AsRef<str>>(hay: &[S], needle: &[T], taken: &[Span]) -> Option<Span> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len())
        .map(|s| Span::new(s, s + needle.len()))
        .filter(|span| !taken.iter().any(|t| t.overlaps(span)))
        .find(|span| {
            hay[span.start..span.end]
                .iter()
                .zip(needle)
                .all(|(h, n)| h.as_ref() == n.as_ref())
        })
}

impl TermLexicon {
    pub fn new(mode: LexiconMode) -> Self {
        TermLexicon {
            entries: Vec::new(),
            source_index: HashMap::new(),
            mode,
            dropped: Vec::new(),
            provenance: None,
            trie: KeyTrie::default(),
        }
    }

    /// Adds an entry unless it is trivial. Returns the drop reason otherwise.
    pub fn push(
        &mut self,
        source: &str,
        target: &str,
        src_analyzer: &Analyzer,
        tgt_analyzer: &Analyzer,
    ) -> Option<DropReason> {
        let source_tokens: Vec<String> = source.split_whitespace().map(str::to_string).collect();
        let target_tokens: Vec<String> = target.split_whitespace().map(str::to_string).collect();
        let source_key = src_analyzer.normalize_sequence(&source_tokens);
        let target_key = tgt_analyzer.normalize_sequence(&target_tokens);
        if let Some(reason) = trivial_reason(&source_key, &target_key) {
            return Some(reason);
        }
        let entry_id = self.entries.len();
        self.trie.insert(&source_key, entry_id);
        self.source_index.entry(source_key.clone()).or_default().push(entry_id);
        self.entries.push(TermEntry {
            entry_id,
            source_tokens,
            target_tokens,
            source_key,
            target_key,
        });
        None
    }

    /// Parses `source<TAB>target` lines; `#` comments and blank lines are skipped.
    pub fn from_tsv(
        text: &str,
        src_analyzer: &Analyzer,
        tgt_analyzer: &Analyzer,
        mode: LexiconMode,
    ) -> Result<Self, LexiconError> {
        let mut lexicon = TermLexicon::new(mode);
        for (line_no, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (source, target) = line.split_once('\t').unwrap_or((line, ""));
            if source.trim().is_empty() || target.trim().is_empty() {
                return Err(LexiconError::EmptyEntry(line_no));
            }
            if let Some(reason) = lexicon.push(source, target, src_analyzer, tgt_analyzer) {
                lexicon.dropped.push(DroppedTerm { line_no, reason });
            }
        }
        if !lexicon.dropped.is_empty() {
            log::info!("lexicon: dropped {} trivial terms", lexicon.dropped.len());
        }
        Ok(lexicon)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: usize) -> &TermEntry {
        &self.entries[id]
    }

    /// All entries sharing `entry`'s source key (its translation variants).
    pub fn variants(&self, source_key: &[String]) -> &[usize] {
        self.source_index.get(source_key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// A lexicon holding only the entries accepted by `keep`. Entry ids are preserved.
    pub fn restrict(&self, mut keep: impl FnMut(&TermEntry) -> bool) -> TermLexicon {
        let mut sub = TermLexicon {
            entries: self.entries.clone(),
            source_index: HashMap::new(),
            mode: self.mode,
            dropped: self.dropped.clone(),
            provenance: self.provenance.clone(),
            trie: KeyTrie::default(),
        };
        for entry in &self.entries {
            if keep(entry) {
                sub.trie.insert(&entry.source_key, entry.entry_id);
                sub.source_index.entry(entry.source_key.clone()).or_default().push(entry.entry_id);
            }
        }
        sub
    }

    pub fn is_indexed(&self, entry_id: usize) -> bool {
        self.variants(&self.entries[entry_id].source_key).contains(&entry_id)
    }

    /// Greedy left-to-right longest-match search on the source lemma layer.
    ///
    /// Each returned span carries the lowest entry id among its variants; with
    /// `require_target`, the lowest one whose target key occurs in the target
    /// lemma layer (outside target spans already claimed by earlier matches).
    pub fn find_matches(&self, pair: &SentencePair, require_target: bool) -> Result<Vec<TermMatch>, LexiconError> {
        let src = pair.lemmas(Side::Source).ok_or(LexiconError::MissingLemmaLayer {
            pair_id: pair.id,
            side: Side::Source,
        })?;
        let tgt = if require_target {
            Some(pair.lemmas(Side::Target).ok_or(LexiconError::MissingLemmaLayer {
                pair_id: pair.id,
                side: Side::Target,
            })?)
        } else {
            None
        };
        let mut out = Vec::new();
        let mut claimed: Vec<Span> = Vec::new();
        let mut i = 0;
        while i < src.len() {
            let mut longest: Option<(usize, Vec<usize>)> = None;
            self.trie.walk_from(src, i, |end, ids| longest = Some((end, ids.to_vec())));
            let Some((end, ids)) = longest else {
                i += 1;
                continue;
            };
            let source_span = Span::new(i, end);
            match tgt {
                None => out.push(TermMatch {
                    entry_id: ids[0],
                    source_span,
                    target_span: None,
                }),
                Some(tgt) => {
                    let hit = ids.iter().find_map(|&id| {
                        find_free_occurrence(tgt, &self.entries[id].target_key, &claimed).map(|span| (id, span))
                    });
                    if let Some((entry_id, span)) = hit {
                        claimed.push(span);
                        out.push(TermMatch {
                            entry_id,
                            source_span,
                            target_span: Some(span),
                        });
                    }
                }
            }
            i = end;
        }
        Ok(out)
    }

    /// Counts every (possibly overlapping) source-side occurrence of each
    /// indexed entry's source key. Every entry id appears in the result.
    pub fn term_frequencies(&self, corpus: &Corpus) -> Result<HashMap<usize, usize>, LexiconError> {
        use rayon::prelude::*;
        let partial = corpus
            .pairs
            .par_iter()
            .map(|pair| {
                let src = pair.lemmas(Side::Source).ok_or(LexiconError::MissingLemmaLayer {
                    pair_id: pair.id,
                    side: Side::Source,
                })?;
                let mut counts: HashMap<usize, usize> = HashMap::new();
                for start in 0..src.len() {
                    self.trie.walk_from(src, start, |_, ids| {
                        for &id in ids {
                            *counts.entry(id).or_default() += 1;
                        }
                    });
                }
                Ok(counts)
            })
            .collect::<Result<Vec<_>, LexiconError>>()?;
        let mut total: HashMap<usize, usize> = self.entries.iter().map(|e| (e.entry_id, 0)).collect();
        for counts in partial {
            for (id, n) in counts {
                *total.entry(id).or_default() += n;
            }
        }
        Ok(total)
    }
}

fn trivial_reason(source_key: &[String], target_key: &[String]) -> Option<DropReason> {
    if source_key == target_key {
        return Some(DropReason::Copy);
    }
    let short = |key: &[String]| key.len() == 1 && key[0].chars().count() <= 2;
    if short(source_key) || short(target_key) {
        return Some(DropReason::ShortToken);
    }
    None
}

pub fn build_lexicon(
    path: &Path,
    src_analyzer: &Analyzer,
    tgt_analyzer: &Analyzer,
    mode: LexiconMode,
) -> Result<TermLexicon, LexiconError> {
    let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lexicon = TermLexicon::from_tsv(&text, src_analyzer, tgt_analyzer, mode)?;
    lexicon.provenance = Some(path.to_path_buf());
    Ok(lexicon)
}
