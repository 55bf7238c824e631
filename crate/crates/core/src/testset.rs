//! Evaluation set builders: oracle constraints, terminology sets with
//! same/diff splits, and rare-word sets with translation-choice policies.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{normalize_line, Corpus, SentencePair, Side};
use crate::draws::{Domain, DrawStream};
use crate::lexicon::{find_free_occurrence, LexiconError, LexiconMode, Span, TermLexicon};
use crate::synth::{Constraint, EmitForm, Origin};

/// Definition of trivial terms recorded in every manifest.
pub const TRIVIAL_TERM_RULE: &str =
    "dropped at lexicon build: source key equals target key, or either key is a single token of at most 2 characters";

#[derive(Debug, Error)]
pub enum TestSetError {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("pair {pair_id}: no translation of `{term}` occurs in the reference")]
    NoReferenceVariant { pair_id: usize, term: String },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Same,
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Reference,
    Random,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestSetKind {
    Oracle,
    Terminology,
    Rare,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub pair_id: usize,
    pub source_line: String,
    pub reference_line: String,
    pub constraints: Vec<Constraint>,
    /// Case-level tag: `diff` as soon as one constraint is `diff`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_tag: Option<SplitTag>,
    /// Per-constraint tags, aligned with `constraints`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraint_splits: Vec<SplitTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_policy: Option<Policy>,
}

impl TestCase {
    pub fn new(pair: &SentencePair, constraints: Vec<Constraint>) -> Self {
        TestCase {
            pair_id: pair.id,
            source_line: pair.source.raw.clone(),
            reference_line: pair.target.raw.clone(),
            constraints,
            split_tag: None,
            constraint_splits: Vec::new(),
            chosen_policy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSetManifest {
    pub kind: TestSetKind,
    pub params: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub lexicon: Option<PathBuf>,
    pub lexicon_entries: usize,
    pub trivial_terms_dropped: usize,
    pub trivial_term_rule: String,
    pub cases: usize,
    pub constraints: usize,
    #[serde(default)]
    pub split_counts: BTreeMap<String, usize>,
}

impl TestSetManifest {
    fn new(kind: TestSetKind, lexicon: &TermLexicon) -> Self {
        TestSetManifest {
            kind,
            params: BTreeMap::new(),
            seed: None,
            lexicon: lexicon.provenance.clone(),
            lexicon_entries: lexicon.len(),
            trivial_terms_dropped: lexicon.dropped.len(),
            trivial_term_rule: TRIVIAL_TERM_RULE.to_string(),
            cases: 0,
            constraints: 0,
            split_counts: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub cases: Vec<TestCase>,
    pub manifest: TestSetManifest,
}

impl TestSet {
    fn finish(cases: Vec<TestCase>, mut manifest: TestSetManifest) -> Self {
        manifest.cases = cases.len();
        manifest.constraints = cases.iter().map(|c| c.constraints.len()).sum();
        for case in &cases {
            for tag in &case.constraint_splits {
                *manifest.split_counts.entry(format!("constraint_{}", tag_name(*tag))).or_default() += 1;
            }
            if let Some(tag) = case.split_tag {
                *manifest.split_counts.entry(format!("case_{}", tag_name(tag))).or_default() += 1;
            }
        }
        TestSet { cases, manifest }
    }

    /// Wraps hand-made cases; the manifest records no lexicon.
    pub fn from_cases(kind: TestSetKind, cases: Vec<TestCase>) -> Self {
        TestSet::finish(cases, TestSetManifest::new(kind, &TermLexicon::new(LexiconMode::Dictionary)))
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// One JSON object per case.
    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for case in &self.cases {
            serde_json::to_writer(&mut *out, case)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R, manifest: TestSetManifest) -> Result<Self, TestSetError> {
        let mut cases = Vec::new();
        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            cases.push(serde_json::from_str(&line).map_err(|source| TestSetError::Parse { line: line_no, source })?);
        }
        Ok(TestSet { cases, manifest })
    }
}

fn tag_name(tag: SplitTag) -> &'static str {
    match tag {
        SplitTag::Same => "same",
        SplitTag::Diff => "diff",
    }
}

fn origin_for(lexicon: &TermLexicon) -> Origin {
    match lexicon.mode {
        LexiconMode::Dictionary => Origin::Dictionary,
        LexiconMode::Terminology => Origin::Terminology,
    }
}

fn reference_constraint(pair: &SentencePair, lexicon: &TermLexicon, entry_id: usize, source_span: Span, target_span: Span) -> Constraint {
    let lemmas = pair.lemmas(Side::Target).expect("checked by matching");
    Constraint {
        surface_tokens: pair.target.surfaces()[target_span.start..target_span.end].to_vec(),
        lemma_tokens: Some(lemmas[target_span.start..target_span.end].to_vec()),
        emit_form: EmitForm::Surface,
        canonical_tokens: Some(lexicon.entry(entry_id).target_tokens.clone()),
        target_span: Some(target_span),
        source_span: Some(source_span),
        origin: origin_for(lexicon),
        entry_id: Some(entry_id),
    }
}

/// One case per pair holding at least one bilingual match.
pub fn build_oracle(corpus: &Corpus, lexicon: &TermLexicon) -> Result<TestSet, TestSetError> {
    use rayon::prelude::*;
    let cases = corpus
        .pairs
        .par_iter()
        .map(|pair| {
            let matches = lexicon.find_matches(pair, true)?;
            if matches.is_empty() {
                return Ok(None);
            }
            let constraints = matches
                .iter()
                .map(|m| reference_constraint(pair, lexicon, m.entry_id, m.source_span, m.target_span.unwrap()))
                .collect();
            Ok(Some(TestCase::new(pair, constraints)))
        })
        .collect::<Result<Vec<_>, TestSetError>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(TestSet::finish(cases, TestSetManifest::new(TestSetKind::Oracle, lexicon)))
}

/// `same` when the reference realizes the term exactly in its canonical form.
pub fn split_tag(constraint: &Constraint) -> SplitTag {
    match &constraint.canonical_tokens {
        Some(canonical) if *canonical == constraint.surface_tokens => SplitTag::Same,
        _ => SplitTag::Diff,
    }
}

/// Scans pairs in corpus order, keeping at most `cap_per_term` pairs per
/// source term. Only terms still under their cap become constraints.
pub fn build_terminology(corpus: &Corpus, termbase: &TermLexicon, cap_per_term: usize) -> Result<TestSet, TestSetError> {
    use rayon::prelude::*;
    // matching is independent per pair; admission must follow corpus order
    let matched = corpus
        .pairs
        .par_iter()
        .map(|pair| termbase.find_matches(pair, true))
        .collect::<Result<Vec<_>, LexiconError>>()?;
    let mut admitted: HashMap<&[String], usize> = HashMap::new();
    let mut cases = Vec::new();
    for (pair, matches) in corpus.pairs.iter().zip(&matched) {
        let keep: Vec<_> = matches
            .iter()
            .filter(|m| admitted.get(termbase.entry(m.entry_id).source_key.as_slice()).copied().unwrap_or(0) < cap_per_term)
            .collect();
        if keep.is_empty() {
            continue;
        }
        let terms: BTreeSet<&[String]> = keep.iter().map(|m| termbase.entry(m.entry_id).source_key.as_slice()).collect();
        for term in terms {
            *admitted.entry(term).or_default() += 1;
        }
        let mut constraints = Vec::with_capacity(keep.len());
        let mut splits = Vec::with_capacity(keep.len());
        for m in keep {
            let mut c = reference_constraint(pair, termbase, m.entry_id, m.source_span, m.target_span.unwrap());
            c.origin = Origin::Terminology;
            splits.push(split_tag(&c));
            constraints.push(c);
        }
        let mut case = TestCase::new(pair, constraints);
        case.split_tag = Some(if splits.contains(&SplitTag::Diff) { SplitTag::Diff } else { SplitTag::Same });
        case.constraint_splits = splits;
        cases.push(case);
    }
    let mut manifest = TestSetManifest::new(TestSetKind::Terminology, termbase);
    manifest.params.insert("cap_per_term".into(), Value::from(cap_per_term));
    Ok(TestSet::finish(cases, manifest))
}

/// Lowest-id variant whose target lemmas occur in `reference_lemmas` outside `taken`.
pub fn choose_reference_variant(
    lexicon: &TermLexicon,
    variants: &[usize],
    reference_lemmas: &[String],
    taken: &[Span],
    pair_id: usize,
) -> Result<(usize, Span), TestSetError> {
    variants
        .iter()
        .find_map(|&id| find_free_occurrence(reference_lemmas, &lexicon.entry(id).target_key, taken).map(|s| (id, s)))
        .ok_or_else(|| TestSetError::NoReferenceVariant {
            pair_id,
            term: variants
                .first()
                .map(|&id| lexicon.entry(id).source_tokens.join(" "))
                .unwrap_or_default(),
        })
}

/// Rare-word set: pairs of `eval_corpus` holding a source term seen at most
/// `max_freq` times in training, together with one of its translations in
/// the reference. Constraints are lemma forms chosen by `policy`.
pub fn build_rare(
    corpus_freqs: &HashMap<usize, usize>,
    lexicon: &TermLexicon,
    eval_corpus: &Corpus,
    max_freq: usize,
    policy: Policy,
    seed: u64,
) -> Result<TestSet, TestSetError> {
    let rare = lexicon.restrict(|e| lexicon.is_indexed(e.entry_id) && corpus_freqs.get(&e.entry_id).copied().unwrap_or(0) <= max_freq);
    let mut cases = Vec::new();
    for pair in eval_corpus.iter() {
        let reference = pair.lemmas(Side::Target).ok_or(LexiconError::MissingLemmaLayer {
            pair_id: pair.id,
            side: Side::Target,
        })?;
        let mut draws = DrawStream::new(seed, Domain::RareChoice, pair.id as u64);
        let mut taken: Vec<Span> = Vec::new();
        let mut constraints = Vec::new();
        for m in rare.find_matches(pair, false)? {
            let variants = rare.variants(&rare.entry(m.entry_id).source_key).to_vec();
            let Ok((ref_id, ref_span)) = choose_reference_variant(&rare, &variants, reference, &taken, pair.id) else {
                continue;
            };
            taken.push(ref_span);
            let chosen = match policy {
                Policy::Reference => ref_id,
                Policy::Random => variants[draws.below(variants.len())],
                Policy::None => ref_id,
            };
            let entry = rare.entry(chosen);
            let (surface, target_span) = if chosen == ref_id {
                (pair.target.surfaces()[ref_span.start..ref_span.end].to_vec(), Some(ref_span))
            } else {
                (entry.target_tokens.clone(), None)
            };
            constraints.push(Constraint {
                surface_tokens: surface,
                lemma_tokens: Some(entry.target_key.clone()),
                emit_form: EmitForm::Lemma,
                canonical_tokens: Some(entry.target_tokens.clone()),
                target_span,
                source_span: Some(m.source_span),
                origin: origin_for(lexicon),
                entry_id: Some(chosen),
            });
        }
        if constraints.is_empty() {
            continue;
        }
        if policy == Policy::None {
            constraints.clear();
        }
        let mut case = TestCase::new(pair, constraints);
        case.chosen_policy = Some(policy);
        cases.push(case);
    }
    let mut manifest = TestSetManifest::new(TestSetKind::Rare, lexicon);
    manifest.seed = Some(seed);
    manifest.params.insert("max_freq".into(), Value::from(max_freq));
    manifest.params.insert(
        "policy".into(),
        serde_json::to_value(policy).expect("policy serializes"),
    );
    manifest.params.insert(
        "rare_entries".into(),
        Value::from(rare.source_index.values().map(Vec::len).sum::<usize>()),
    );
    Ok(TestSet::finish(cases, manifest))
}

/// Normalized reference lines of every case, for removal from training data.
pub fn emit_exclusion(testset: &TestSet) -> BTreeSet<String> {
    testset.cases.iter().map(|c| normalize_line(&c.reference_line)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morph::{Analyzer, LemmaTable};

    fn corpus(rows: &[(&str, &str, &str)]) -> Corpus {
        let src: Vec<&str> = rows.iter().map(|r| r.0).collect();
        let tgt: Vec<&str> = rows.iter().map(|r| r.1).collect();
        let mut c = Corpus::from_lines(&src, &tgt).unwrap();
        for (p, r) in c.pairs.iter_mut().zip(rows) {
            p.set_lemmas(Side::Target, r.2.split(' ').map(String::from).collect()).unwrap();
        }
        c.lemmatize_missing(Side::Source, &Analyzer::Identity);
        c
    }

    fn lex(tsv: &str, mode: LexiconMode) -> TermLexicon {
        TermLexicon::from_tsv(tsv, &Analyzer::Identity, &Analyzer::Identity, mode).unwrap()
    }

    #[test]
    fn oracle_cases() {
        let c = corpus(&[
            ("the house and the garden", "dům a zahrada", "dům a zahrada"),
            ("nothing here", "nic tady", "nic tady"),
        ]);
        let l = lex("house\tdům\ngarden\tzahrada\n", LexiconMode::Dictionary);
        let ts = build_oracle(&c, &l).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts.cases[0].constraints.len(), 2);
        let none = build_oracle(&c, &lex("cat\tkočka\n", LexiconMode::Dictionary)).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn terminology_same_and_diff() {
        let c = corpus(&[
            ("the proposal", "návrh", "návrh"),
            ("weaken the proposal", "oslabit návrhu", "oslabit návrh"),
        ]);
        let l = lex("proposal\tnávrh\n", LexiconMode::Terminology);
        let ts = build_terminology(&c, &l, 10).unwrap();
        assert_eq!(ts.cases[0].split_tag, Some(SplitTag::Same));
        assert_eq!(ts.cases[1].split_tag, Some(SplitTag::Diff));
        assert_eq!(ts.cases[1].constraints[0].surface_tokens, vec!["návrhu"]);
        assert_eq!(ts.manifest.split_counts["case_diff"], 1);
    }

    #[test]
    fn terminology_cap() {
        let rows: Vec<(String, String, String)> =
            (0..12).map(|i| (format!("proposal {i}"), format!("návrh {i}"), format!("návrh {i}"))).collect();
        let rows: Vec<(&str, &str, &str)> = rows.iter().map(|r| (r.0.as_str(), r.1.as_str(), r.2.as_str())).collect();
        let ts = build_terminology(&corpus(&rows), &lex("proposal\tnávrh\n", LexiconMode::Terminology), 10).unwrap();
        assert_eq!(ts.cases.iter().map(|c| c.pair_id).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn rare_policies() {
        let c = corpus(&[("a beautiful house", "krásné stavení", "krásný stavení")]);
        let l = lex("house\tdům\nhouse\tstavení\nhouse\tbudova\n", LexiconMode::Dictionary);
        let freqs: HashMap<usize, usize> = [(0, 3), (1, 3), (2, 3)].into_iter().collect();
        let ts = build_rare(&freqs, &l, &c, 50, Policy::Reference, 1).unwrap();
        assert_eq!(ts.cases[0].constraints[0].lemma_tokens.as_deref().unwrap(), ["stavení"]);
        assert_eq!(ts.cases[0].constraints[0].emit_form, EmitForm::Lemma);
        let a = build_rare(&freqs, &l, &c, 50, Policy::Random, 9).unwrap();
        let b = build_rare(&freqs, &l, &c, 50, Policy::Random, 9).unwrap();
        assert_eq!(a, b);
        assert!([0, 1, 2].contains(&a.cases[0].constraints[0].entry_id.unwrap()));
        let none = build_rare(&freqs, &l, &c, 50, Policy::None, 1).unwrap();
        assert_eq!(none.len(), 1);
        assert!(none.cases[0].constraints.is_empty());
        // max_freq = 0 keeps only unseen terms
        let seen: HashMap<usize, usize> = [(0, 1), (1, 1), (2, 1)].into_iter().collect();
        assert!(build_rare(&seen, &l, &c, 0, Policy::Reference, 1).unwrap().is_empty());
    }

    #[test]
    fn no_reference_variant_error() {
        let l = lex("house\tdům\n", LexiconMode::Dictionary);
        let err = choose_reference_variant(&l, &[0], &["budova".to_string()], &[], 5).unwrap_err();
        assert!(matches!(err, TestSetError::NoReferenceVariant { pair_id: 5, .. }));
    }

    #[test]
    fn exclusion_lines() {
        let c = corpus(&[
            ("house", "Dům  stojí", "dům stát"),
            ("house", "dům stojí", "dům stát"),
            ("house", "dům", "dům"),
        ]);
        let l = lex("house\tdům\n", LexiconMode::Dictionary);
        let ts = build_oracle(&c, &l).unwrap();
        assert_eq!(ts.len(), 3);
        let ex = emit_exclusion(&ts);
        assert_eq!(ex.len(), 2);
        assert!(ex.contains("dům stojí"));
        let empty = build_oracle(&c, &lex("cat\tkočka\n", LexiconMode::Dictionary)).unwrap();
        assert!(emit_exclusion(&empty).is_empty());
    }

    #[test]
    fn jsonl_roundtrip() {
        let table = Analyzer::LemmaTable(LemmaTable::from_observations([("návrhu", "návrh")]));
        let mut c = Corpus::from_lines(&["the proposal"], &["návrhu"]).unwrap();
        c.lemmatize_missing(Side::Source, &Analyzer::Identity);
        c.lemmatize_missing(Side::Target, &table);
        let ts = build_terminology(&c, &lex("proposal\tnávrh\n", LexiconMode::Terminology), 10).unwrap();
        let mut buf = Vec::new();
        ts.write_jsonl(&mut buf).unwrap();
        let back = TestSet::read_jsonl(&buf[..], ts.manifest.clone()).unwrap();
        assert_eq!(back, ts);
    }
}
