//! Serialization of (source sentence, constraint set) into model input lines.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, SentencePair};
use crate::synth::{ConstraintSet, SynthError};

pub const SEP: &str = "<sep>";
pub const CSEP: &str = "<c>";
/// First position of the constraint block in shifted suffix inputs.
pub const SHIFT_BASE: u32 = 1024;

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("constraint {0} has no source span")]
    MissingSourceSpan(usize),
    #[error("constraints {0} and {1} have overlapping source spans")]
    OverlappingSourceSpans(usize, usize),
    #[error("pair {pair_id}: reserved token `{token}`")]
    ReservedToken { pair_id: usize, token: String },
    #[error("pair {pair_id}: token `{token}` contains the factor delimiter `|`")]
    PipeInToken { pair_id: usize, token: String },
    #[error(transparent)]
    Synth(#[from] SynthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Suffix,
    SuffixShift,
    Prefix,
    Factored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorLabel {
    #[serde(rename = "O")]
    Outside,
    #[serde(rename = "SRC")]
    Source,
    #[serde(rename = "TGT")]
    Target,
}

impl fmt::Display for FactorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorLabel::Outside => "O",
            FactorLabel::Source => "SRC",
            FactorLabel::Target => "TGT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedExample {
    pub pair_id: usize,
    pub input_tokens: Vec<String>,
    pub target_line: String,
    pub positions: Vec<u32>,
    pub factor_labels: Option<Vec<FactorLabel>>,
    pub format: InputFormat,
}

#[derive(Serialize)]
struct PositionsRecord<'a> {
    id: usize,
    pos: &'a [u32],
}

impl AnnotatedExample {
    /// Space-joined input line; factored inputs render as `token|LABEL`.
    pub fn input_line(&self) -> String {
        match &self.factor_labels {
            Some(labels) => self
                .input_tokens
                .iter()
                .zip(labels)
                .map(|(t, l)| format!("{t}|{l}"))
                .collect::<Vec<_>>()
                .join(" "),
            None => self.input_tokens.join(" "),
        }
    }

    /// `{"id":…,"pos":[…]}` line for the positions sidecar.
    pub fn positions_line(&self) -> String {
        serde_json::to_string(&PositionsRecord {
            id: self.pair_id,
            pos: &self.positions,
        })
        .expect("positions serialize")
    }

    /// The source tokens with the constraint block removed.
    pub fn strip_constraints(&self) -> Vec<String> {
        match self.format {
            InputFormat::Suffix | InputFormat::SuffixShift => {
                let end = self.input_tokens.iter().position(|t| t == SEP).unwrap_or(self.input_tokens.len());
                self.input_tokens[..end].to_vec()
            }
            InputFormat::Prefix => match self.input_tokens.iter().position(|t| t == SEP) {
                Some(i) => self.input_tokens[i + 1..].to_vec(),
                None => self.input_tokens.clone(),
            },
            InputFormat::Factored => {
                let labels = self.factor_labels.as_deref().unwrap_or(&[]);
                self.input_tokens
                    .iter()
                    .zip(labels)
                    .filter(|(_, l)| **l != FactorLabel::Target)
                    .map(|(t, _)| t.clone())
                    .collect()
            }
        }
    }
}

fn constraint_block(cs: &ConstraintSet) -> Result<Vec<String>, AssembleError> {
    let mut block = Vec::new();
    for (i, c) in cs.constraints.iter().enumerate() {
        if i > 0 {
            block.push(CSEP.to_string());
        }
        block.extend(c.realized()?);
    }
    Ok(block)
}

pub fn assemble_suffix(pair: &SentencePair, cs: &ConstraintSet, shift: bool) -> Result<AnnotatedExample, AssembleError> {
    let mut input_tokens = pair.source.surfaces();
    let n = input_tokens.len() as u32;
    let mut positions: Vec<u32> = (0..n).collect();
    if !cs.constraints.is_empty() {
        let block = constraint_block(cs)?;
        let base = if shift { SHIFT_BASE } else { n };
        // `<sep>` takes the first constraint-block position
        positions.extend((0..=block.len() as u32).map(|k| base + k));
        input_tokens.push(SEP.to_string());
        input_tokens.extend(block);
    }
    Ok(AnnotatedExample {
        pair_id: pair.id,
        input_tokens,
        target_line: pair.target.raw.clone(),
        positions,
        factor_labels: None,
        format: if shift { InputFormat::SuffixShift } else { InputFormat::Suffix },
    })
}

/// Constraints, then `<sep>`, then the source.
pub fn assemble_prefix(pair: &SentencePair, cs: &ConstraintSet) -> Result<AnnotatedExample, AssembleError> {
    let mut input_tokens = Vec::new();
    if !cs.constraints.is_empty() {
        input_tokens = constraint_block(cs)?;
        input_tokens.push(SEP.to_string());
    }
    input_tokens.extend(pair.source.surfaces());
    Ok(AnnotatedExample {
        pair_id: pair.id,
        positions: (0..input_tokens.len() as u32).collect(),
        input_tokens,
        target_line: pair.target.raw.clone(),
        factor_labels: None,
        format: InputFormat::Prefix,
    })
}

/// Inserts each constraint's target tokens right after its source span.
pub fn assemble_factored(pair: &SentencePair, cs: &ConstraintSet) -> Result<AnnotatedExample, AssembleError> {
    let mut spans = Vec::with_capacity(cs.constraints.len());
    for (i, c) in cs.constraints.iter().enumerate() {
        let span = c.source_span.ok_or(AssembleError::MissingSourceSpan(i))?;
        spans.push((span, i));
    }
    spans.sort();
    for w in spans.windows(2) {
        if w[0].0.overlaps(&w[1].0) {
            return Err(AssembleError::OverlappingSourceSpans(w[0].1, w[1].1));
        }
    }
    let source = pair.source.surfaces();
    let mut input_tokens = Vec::new();
    let mut labels = Vec::new();
    let mut next = spans.iter().peekable();
    for (i, tok) in source.iter().enumerate() {
        let inside = spans.iter().any(|(s, _)| s.start <= i && i < s.end);
        input_tokens.push(tok.clone());
        labels.push(if inside { FactorLabel::Source } else { FactorLabel::Outside });
        while let Some((span, ci)) = next.peek() {
            if span.end != i + 1 {
                break;
            }
            for t in cs.constraints[*ci].realized()? {
                input_tokens.push(t);
                labels.push(FactorLabel::Target);
            }
            next.next();
        }
    }
    Ok(AnnotatedExample {
        pair_id: pair.id,
        positions: (0..input_tokens.len() as u32).collect(),
        input_tokens,
        target_line: pair.target.raw.clone(),
        factor_labels: Some(labels),
        format: InputFormat::Factored,
    })
}

pub fn assemble(pair: &SentencePair, cs: &ConstraintSet, format: InputFormat) -> Result<AnnotatedExample, AssembleError> {
    let example = match format {
        InputFormat::Suffix => assemble_suffix(pair, cs, false)?,
        InputFormat::SuffixShift => assemble_suffix(pair, cs, true)?,
        InputFormat::Prefix => assemble_prefix(pair, cs)?,
        InputFormat::Factored => assemble_factored(pair, cs)?,
    };
    if format == InputFormat::Factored {
        if let Some(token) = example.input_tokens.iter().find(|t| t.contains('|')) {
            return Err(AssembleError::PipeInToken {
                pair_id: pair.id,
                token: token.clone(),
            });
        }
    }
    Ok(example)
}

fn reserved(token: &str) -> bool {
    token == SEP || token == CSEP
}

/// Rejects corpora that already contain the separator tokens.
pub fn validate_corpus(corpus: &Corpus) -> Result<(), AssembleError> {
    for pair in corpus.iter() {
        for tok in pair.source.tokens.iter().chain(&pair.target.tokens) {
            if reserved(&tok.surface) {
                return Err(AssembleError::ReservedToken {
                    pair_id: pair.id,
                    token: tok.surface.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Rejects constraint sets whose realized tokens contain a separator.
pub fn validate_constraints(cs: &ConstraintSet) -> Result<(), AssembleError> {
    for c in &cs.constraints {
        if let Some(token) = c.realized()?.into_iter().find(|t| reserved(t)) {
            return Err(AssembleError::ReservedToken {
                pair_id: cs.pair_id,
                token,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Span;
    use crate::synth::{Constraint, EmitForm, Origin};

    const SRC: &str = "Price increase is planned mainly in larger municipalities .";

    fn pair() -> SentencePair {
        SentencePair::new(0, SRC, "Zvýšení cen je plánováno především ve větších obcích .")
    }

    fn dict(surface: &str, lemma: &str, src: (usize, usize), tgt: (usize, usize)) -> Constraint {
        Constraint {
            surface_tokens: vec![surface.into()],
            lemma_tokens: Some(vec![lemma.into()]),
            emit_form: EmitForm::Surface,
            canonical_tokens: None,
            target_span: Some(Span::new(tgt.0, tgt.1)),
            source_span: Some(Span::new(src.0, src.1)),
            origin: Origin::Dictionary,
            entry_id: None,
        }
    }

    fn running_set(form: EmitForm) -> ConstraintSet {
        let mut constraints = vec![dict("plánováno", "plánovat", (3, 4), (3, 4)), dict("obcích", "obec", (7, 8), (7, 8))];
        for c in &mut constraints {
            c.emit_form = form;
        }
        ConstraintSet {
            pair_id: 0,
            constraints,
            skipped: false,
        }
    }

    #[test]
    fn suffix_running_example() {
        let ex = assemble_suffix(&pair(), &running_set(EmitForm::Surface), false).unwrap();
        assert_eq!(ex.input_line(), format!("{SRC} <sep> plánováno <c> obcích"));
        assert_eq!(ex.positions, (0..13).collect::<Vec<u32>>());
        let mut lemma = running_set(EmitForm::Lemma);
        lemma.constraints.reverse();
        let ex = assemble_suffix(&pair(), &lemma, false).unwrap();
        assert_eq!(ex.input_line(), format!("{SRC} <sep> obec <c> plánovat"));
    }

    #[test]
    fn suffix_shift_positions() {
        let p = SentencePair::new(0, "a b c d e f g h", "x");
        let cs = ConstraintSet {
            pair_id: 0,
            constraints: vec![
                Constraint {
                    emit_form: EmitForm::Lemma,
                    lemma_tokens: Some(vec!["obec".into()]),
                    ..Constraint::surface(&["obcích"])
                },
                Constraint {
                    emit_form: EmitForm::Lemma,
                    lemma_tokens: Some(vec!["plánovat".into()]),
                    ..Constraint::surface(&["plánováno"])
                },
            ],
            skipped: false,
        };
        let ex = assemble_suffix(&p, &cs, true).unwrap();
        assert_eq!(ex.input_line(), "a b c d e f g h <sep> obec <c> plánovat");
        assert_eq!(ex.positions, vec![0, 1, 2, 3, 4, 5, 6, 7, 1024, 1025, 1026, 1027]);
        assert_eq!(ex.positions_line(), "{\"id\":0,\"pos\":[0,1,2,3,4,5,6,7,1024,1025,1026,1027]}");
    }

    #[test]
    fn prefix_layout() {
        let p = SentencePair::new(0, "a b", "x");
        let ex = assemble_prefix(&p, &ConstraintSet::empty(0)).unwrap();
        assert_eq!(ex.input_tokens, vec!["a", "b"]);
        let one = ConstraintSet {
            pair_id: 0,
            constraints: vec![Constraint::surface(&["obec"])],
            skipped: false,
        };
        assert_eq!(assemble_prefix(&p, &one).unwrap().input_line(), "obec <sep> a b");
        let two = ConstraintSet {
            pair_id: 0,
            constraints: vec![Constraint::surface(&["obec"]), Constraint::surface(&["x", "y"])],
            skipped: false,
        };
        let ex = assemble_prefix(&p, &two).unwrap();
        assert_eq!(ex.input_tokens.iter().filter(|t| *t == CSEP).count(), 1);
        assert_eq!(ex.positions, (0..ex.input_tokens.len() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn factored_running_example() {
        let ex = assemble_factored(&pair(), &running_set(EmitForm::Surface)).unwrap();
        assert_eq!(
            ex.input_tokens.join(" "),
            "Price increase is planned plánováno mainly in larger municipalities obcích ."
        );
        let row: Vec<String> = ex.factor_labels.as_ref().unwrap().iter().map(|l| l.to_string()).collect();
        assert_eq!(row.join(" "), "O O O SRC TGT O O O SRC TGT O");
        assert!(ex.input_line().starts_with("Price|O increase|O is|O planned|SRC plánováno|TGT"));
    }

    #[test]
    fn factored_empty_and_missing_span() {
        let ex = assemble_factored(&pair(), &ConstraintSet::empty(0)).unwrap();
        assert!(ex.factor_labels.unwrap().iter().all(|l| *l == FactorLabel::Outside));
        let cs = ConstraintSet {
            pair_id: 0,
            constraints: vec![dict("a", "a", (0, 1), (0, 1)), Constraint::surface(&["x"])],
            skipped: false,
        };
        assert!(matches!(assemble_factored(&pair(), &cs), Err(AssembleError::MissingSourceSpan(1))));
    }

    #[test]
    fn pipe_rejected_in_factored() {
        let p = SentencePair::new(0, "a|b c", "x");
        assert!(matches!(
            assemble(&p, &ConstraintSet::empty(0), InputFormat::Factored),
            Err(AssembleError::PipeInToken { .. })
        ));
    }

    #[test]
    fn reserved_tokens_rejected() {
        let c = Corpus::from_lines(&["a <sep> b"], &["x"]).unwrap();
        assert!(matches!(validate_corpus(&c), Err(AssembleError::ReservedToken { pair_id: 0, .. })));
    }

    #[test]
    fn empty_or_skipped_has_no_markers() {
        for cs in [ConstraintSet::empty(0), ConstraintSet::skipped(0)] {
            for f in [InputFormat::Suffix, InputFormat::SuffixShift, InputFormat::Prefix] {
                let ex = assemble(&pair(), &cs, f).unwrap();
                assert_eq!(ex.input_tokens, pair().source.surfaces());
            }
        }
    }
}
