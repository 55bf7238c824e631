//! Token normalization backends: a context-free lemma table, a rule-driven
//! light stemmer, and plain lowercasing. All share one [`Analyzer`] contract:
//! the same token always normalizes to the same non-empty string.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Side};

/// Rule table shipped with the crate.
pub const CZECH_LIGHT_STEMMER_RULES: &str = include_str!("../data/czech_light_stemmer.tsv");

/// Stems never get shorter than this many characters.
pub const MIN_STEM_CHARS: usize = 2;

#[derive(Debug, Error)]
pub enum MorphError {
    #[error("line {0}: expected `surface<TAB>lemma`")]
    MalformedTable(usize),
    #[error("line {0}: expected `suffix<TAB>replacement`")]
    MalformedRule(usize),
    #[error("line {0}: rule could rewrite forever (it must shrink the word or remove rewritable letters)")]
    NonTerminatingRule(usize),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyzerKind {
    LemmaTable,
    Stemmer,
    Identity,
}

/// Ambiguity bookkeeping for a lemma table built from observed pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableStats {
    pub surfaces: usize,
    pub ambiguous_surfaces: usize,
    /// Observations whose lemma disagrees with the chosen one.
    pub conflicting_tokens: usize,
    pub observations: usize,
}

impl TableStats {
    pub fn ambiguity_rate(&self) -> f64 {
        if self.surfaces == 0 {
            0.0
        } else {
            self.ambiguous_surfaces as f64 / self.surfaces as f64
        }
    }
}

/// Context-free surface → lemma map keyed by lowercased surface.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaTable {
    map: HashMap<String, String>,
    pub stats: TableStats,
}

impl LemmaTable {
    /// Builds a table from `(surface, lemma)` observations. For each surface
    /// the most frequent lemma wins; ties go to the one seen first.
    pub fn from_observations<I, S, L>(observations: I) -> Self
    where
        I: IntoIterator<Item = (S, L)>,
        S: AsRef<str>,
        L: AsRef<str>,
    {
        // surface -> [(lemma, count, first_seen)]
        let mut seen: HashMap<String, Vec<(String, usize, usize)>> = HashMap::new();
        let mut observations_total = 0;
        for (order, (surface, lemma)) in observations.into_iter().enumerate() {
            observations_total += 1;
            let surface = surface.as_ref().to_lowercase();
            let lemma = lemma.as_ref().to_lowercase();
            let slot = seen.entry(surface).or_default();
            match slot.iter_mut().find(|(l, _, _)| *l == lemma) {
                Some(entry) => entry.1 += 1,
                None => slot.push((lemma, 1, order)),
            }
        }
        let mut stats = TableStats {
            surfaces: seen.len(),
            observations: observations_total,
            ..TableStats::default()
        };
        let mut map = HashMap::with_capacity(seen.len());
        for (surface, mut lemmas) in seen {
            lemmas.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
            if lemmas.len() > 1 {
                stats.ambiguous_surfaces += 1;
                stats.conflicting_tokens += lemmas[1..].iter().map(|l| l.1).sum::<usize>();
            }
            map.insert(surface, lemmas.swap_remove(0).0);
        }
        if stats.ambiguous_surfaces > 0 {
            log::info!(
                "lemma table: {} of {} surfaces ambiguous ({:.2}%)",
                stats.ambiguous_surfaces,
                stats.surfaces,
                100.0 * stats.ambiguity_rate()
            );
        }
        LemmaTable { map, stats }
    }

    /// Parses `surface<TAB>lemma` lines. Blank lines and `#` comments are skipped.
    pub fn from_tsv(text: &str) -> Result<Self, MorphError> {
        let mut rows = Vec::new();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, lemma) = line.split_once('\t').ok_or(MorphError::MalformedTable(no))?;
            let (surface, lemma) = (surface.trim(), lemma.trim());
            if surface.is_empty() || lemma.is_empty() {
                return Err(MorphError::MalformedTable(no));
            }
            rows.push((surface.to_string(), lemma.to_string()));
        }
        Ok(Self::from_observations(rows))
    }

    pub fn from_tsv_file(path: &Path) -> Result<Self, MorphError> {
        Self::from_tsv(&fs::read_to_string(path)?)
    }

    /// Builds a table from a corpus side that carries a lemma layer.
    pub fn from_corpus(corpus: &Corpus, side: Side) -> Self {
        let observations = corpus.iter().filter_map(|pair| {
            pair.lemmas(side).map(|lemmas| {
                pair.sentence(side)
                    .tokens
                    .iter()
                    .map(|t| t.surface.as_str())
                    .zip(lemmas.iter().map(String::as_str))
                    .collect::<Vec<_>>()
            })
        });
        Self::from_observations(observations.flatten())
    }

    pub fn insert(&mut self, surface: &str, lemma: &str) {
        self.map.insert(surface.to_lowercase(), lemma.to_lowercase());
    }

    pub fn get(&self, surface: &str) -> Option<&str> {
        self.map.get(surface).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SuffixRule {
    suffix: Vec<char>,
    replacement: Vec<char>,
}

/// Suffix-stripping stemmer driven by a rule table.
///
/// At each step the longest rule suffix matching the word is rewritten,
/// provided the result keeps at least [`MIN_STEM_CHARS`] characters. Steps
/// repeat until no rule fires, so stemming is idempotent. Tokens without any
/// alphabetic character are returned lowercased and otherwise untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stemmer {
    // sorted by suffix length, longest first; stable w.r.t. file order
    rules: Vec<SuffixRule>,
}

impl Stemmer {
    pub fn czech_light() -> Self {
        Self::from_rules(CZECH_LIGHT_STEMMER_RULES).expect("shipped stemmer rules are valid")
    }

    pub fn from_rules_file(path: &Path) -> Result<Self, MorphError> {
        Self::from_rules(&fs::read_to_string(path)?)
    }

    pub fn from_rules(text: &str) -> Result<Self, MorphError> {
        let mut rules = Vec::new();
        let mut lines = Vec::new();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (suffix, replacement) = line.split_once('\t').ok_or(MorphError::MalformedRule(no))?;
            if suffix.is_empty() || suffix.contains(char::is_whitespace) {
                return Err(MorphError::MalformedRule(no));
            }
            rules.push(SuffixRule {
                suffix: suffix.to_lowercase().chars().collect(),
                replacement: replacement.trim_end().to_lowercase().chars().collect(),
            });
            lines.push(no);
        }
        // Termination: letters that non-shrinking rules consume form the set
        // `rewritable`; every rule must lower (length + rewritable letters).
        let rewritable: HashSet<char> = rules
            .iter()
            .filter(|r| r.replacement.len() >= r.suffix.len())
            .flat_map(|r| r.suffix.iter().copied())
            .collect();
        let weight = |s: &[char]| s.len() + s.iter().filter(|c| rewritable.contains(c)).count();
        for (rule, no) in rules.iter().zip(&lines) {
            if weight(&rule.replacement) >= weight(&rule.suffix) {
                return Err(MorphError::NonTerminatingRule(*no));
            }
        }
        rules.sort_by_key(|r| std::cmp::Reverse(r.suffix.len()));
        Ok(Stemmer { rules })
    }

    pub fn stem(&self, token: &str) -> String {
        let lower = token.to_lowercase();
        if !lower.chars().any(char::is_alphabetic) {
            return lower;
        }
        let mut word: Vec<char> = lower.chars().collect();
        while let Some(rule) = self.rules.iter().find(|r| {
            word.ends_with(&r.suffix) && word.len() - r.suffix.len() + r.replacement.len() >= MIN_STEM_CHARS
        }) {
            word.truncate(word.len() - rule.suffix.len());
            word.extend_from_slice(&rule.replacement);
        }
        word.into_iter().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Analyzer {
    LemmaTable(LemmaTable),
    Stemmer(Stemmer),
    #[default]
    Identity,
}

impl Analyzer {
    pub fn kind(&self) -> AnalyzerKind {
        match self {
            Analyzer::LemmaTable(_) => AnalyzerKind::LemmaTable,
            Analyzer::Stemmer(_) => AnalyzerKind::Stemmer,
            Analyzer::Identity => AnalyzerKind::Identity,
        }
    }

    pub fn normalize(&self, token: &str) -> String {
        let lower = token.to_lowercase();
        match self {
            Analyzer::Identity => lower,
            Analyzer::LemmaTable(table) => match table.get(&lower) {
                Some(lemma) => lemma.to_string(),
                None => lower,
            },
            Analyzer::Stemmer(stemmer) => stemmer.stem(&lower),
        }
    }

    pub fn normalize_sequence<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        tokens.iter().map(|t| self.normalize(t.as_ref())).collect()
    }
}
