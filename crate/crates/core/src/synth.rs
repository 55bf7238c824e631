//! Constraint synthesis for training and test data.
//!
//! Two samplers: random target spans, and dictionary/terminology hits found
//! on lemma layers. Both draw from a per-pair [`DrawStream`] in a fixed order:
//!
//! 1. skip draw (`uniform < skip_ratio` leaves the pair unconstrained);
//! 2. random sampler only: one start draw per token outside a span, one stop
//!    draw per token inside a span (including the span's first token);
//! 3. Fisher-Yates shuffle of the constraint order;
//! 4. mixed form mode only: one Bernoulli(0.5) draw picking lemma forms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, SentencePair, Side};
use crate::draws::{Domain, DrawStream};
use crate::lexicon::{LexiconError, LexiconMode, Span, TermLexicon};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("pair {pair_id}: missing {side:?} lemma layer")]
    MissingLemmaLayer { pair_id: usize, side: Side },
    #[error("constraint has no {0:?} form")]
    MissingForm(EmitForm),
    #[error("{name} = {value} is not a probability")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("pair {pair_id}: constraint span {span:?} is out of bounds")]
    SpanOutOfBounds { pair_id: usize, span: Span },
    #[error("constraint record for pair {got} does not match pair {expected}")]
    IdMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitForm {
    Surface,
    Lemma,
    Canonical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormMode {
    Surface,
    Lemma,
    Canonical,
    /// Per sentence, lemma forms with probability 0.5, surface forms otherwise.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Random,
    Dictionary,
    Terminology,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    /// Reference surface realization.
    pub surface_tokens: Vec<String>,
    pub lemma_tokens: Option<Vec<String>>,
    pub emit_form: EmitForm,
    /// Form listed in the termbase or dictionary.
    pub canonical_tokens: Option<Vec<String>>,
    pub target_span: Option<Span>,
    pub source_span: Option<Span>,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_id: Option<usize>,
}

impl Constraint {
    pub fn surface(tokens: &[&str]) -> Self {
        Constraint {
            surface_tokens: tokens.iter().map(|t| t.to_string()).collect(),
            lemma_tokens: None,
            emit_form: EmitForm::Surface,
            canonical_tokens: None,
            target_span: None,
            source_span: None,
            origin: Origin::External,
            entry_id: None,
        }
    }

    pub fn form(&self, form: EmitForm) -> Option<&[String]> {
        match form {
            EmitForm::Surface => Some(&self.surface_tokens).filter(|t| !t.is_empty()).map(Vec::as_slice),
            EmitForm::Lemma => self.lemma_tokens.as_deref(),
            EmitForm::Canonical => self.canonical_tokens.as_deref(),
        }
    }

    /// Tokens in the constraint's own emit form.
    pub fn realized(&self) -> Result<Vec<String>, SynthError> {
        self.form(self.emit_form)
            .map(<[String]>::to_vec)
            .ok_or(SynthError::MissingForm(self.emit_form))
    }
}

/// Tokens for `constraint` under `form_mode`; `mix_draw` picks lemma forms in mixed mode.
pub fn realize(constraint: &Constraint, form_mode: FormMode, mix_draw: bool) -> Result<Vec<String>, SynthError> {
    let form = match form_mode {
        FormMode::Surface => EmitForm::Surface,
        FormMode::Lemma => EmitForm::Lemma,
        FormMode::Canonical => EmitForm::Canonical,
        FormMode::Mixed if mix_draw => EmitForm::Lemma,
        FormMode::Mixed => EmitForm::Surface,
    };
    constraint
        .form(form)
        .map(<[String]>::to_vec)
        .ok_or(SynthError::MissingForm(form))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub pair_id: usize,
    pub constraints: Vec<Constraint>,
    pub skipped: bool,
}

impl ConstraintSet {
    pub fn empty(pair_id: usize) -> Self {
        ConstraintSet {
            pair_id,
            constraints: Vec::new(),
            skipped: false,
        }
    }

    pub fn skipped(pair_id: usize) -> Self {
        ConstraintSet {
            pair_id,
            constraints: Vec::new(),
            skipped: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn to_record(&self) -> Result<ConstraintSetRecord, SynthError> {
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                Ok(ConstraintRecord {
                    tokens: c.realized()?,
                    form: c.emit_form,
                    src_span: c.source_span,
                    tgt_span: c.target_span,
                    origin: c.origin,
                })
            })
            .collect::<Result<_, SynthError>>()?;
        Ok(ConstraintSetRecord {
            id: self.pair_id,
            skipped: self.skipped,
            constraints,
        })
    }

    /// Rebuilds a set from its dump. When `pair` is given, surface forms are
    /// recovered from target spans.
    pub fn from_record(record: &ConstraintSetRecord, pair: Option<&SentencePair>) -> Result<Self, SynthError> {
        if let Some(pair) = pair {
            if pair.id != record.id {
                return Err(SynthError::IdMismatch {
                    expected: pair.id,
                    got: record.id,
                });
            }
        }
        let constraints = record
            .constraints
            .iter()
            .map(|r| {
                let mut surface = if r.form == EmitForm::Surface { r.tokens.clone() } else { Vec::new() };
                let mut lemma = (r.form == EmitForm::Lemma).then(|| r.tokens.clone());
                if let (Some(pair), Some(span)) = (pair, r.tgt_span) {
                    if span.end > pair.target.len() || span.is_empty() {
                        return Err(SynthError::SpanOutOfBounds { pair_id: pair.id, span });
                    }
                    surface = pair.target.surfaces()[span.start..span.end].to_vec();
                    if lemma.is_none() {
                        lemma = pair.target_lemmas.as_ref().map(|l| l[span.start..span.end].to_vec());
                    }
                }
                if surface.is_empty() {
                    surface = r.tokens.clone();
                }
                Ok(Constraint {
                    surface_tokens: surface,
                    lemma_tokens: lemma,
                    emit_form: r.form,
                    canonical_tokens: (r.form == EmitForm::Canonical).then(|| r.tokens.clone()),
                    target_span: r.tgt_span,
                    source_span: r.src_span,
                    origin: r.origin,
                    entry_id: None,
                })
            })
            .collect::<Result<_, SynthError>>()?;
        Ok(ConstraintSet {
            pair_id: record.id,
            constraints,
            skipped: record.skipped,
        })
    }
}

/// One JSON Lines row of a constraint dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSetRecord {
    pub id: usize,
    pub skipped: bool,
    pub constraints: Vec<ConstraintRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub tokens: Vec<String>,
    pub form: EmitForm,
    pub src_span: Option<Span>,
    pub tgt_span: Option<Span>,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub p_start: f64,
    pub p_stop: f64,
    pub skip_ratio: f64,
    pub seed: u64,
    pub form_mode: FormMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            p_start: 0.3,
            p_stop: 0.85,
            skip_ratio: 0.0,
            seed: 0,
            form_mode: FormMode::Surface,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, value) in [("p_start", self.p_start), ("p_stop", self.p_stop), ("skip_ratio", self.skip_ratio)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::InvalidProbability { name, value });
            }
        }
        Ok(())
    }
}

/// Draw counters of the random sampler.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub sentences: u64,
    pub skipped: u64,
    /// Tokens that received a start draw.
    pub eligible: u64,
    pub starts: u64,
    /// Tokens that received a stop draw.
    pub included: u64,
    pub stops: u64,
}

impl SamplerStats {
    pub fn merge(mut self, other: SamplerStats) -> SamplerStats {
        self.sentences += other.sentences;
        self.skipped += other.skipped;
        self.eligible += other.eligible;
        self.starts += other.starts;
        self.included += other.included;
        self.stops += other.stops;
        self
    }

    pub fn start_rate(&self) -> f64 {
        self.starts as f64 / self.eligible.max(1) as f64
    }

    pub fn stop_rate(&self) -> f64 {
        self.stops as f64 / self.included.max(1) as f64
    }

    pub fn skip_rate(&self) -> f64 {
        self.skipped as f64 / self.sentences.max(1) as f64
    }
}

fn target_lemmas(pair: &SentencePair) -> Result<&[String], SynthError> {
    pair.lemmas(Side::Target).ok_or(SynthError::MissingLemmaLayer {
        pair_id: pair.id,
        side: Side::Target,
    })
}

fn finish(
    pair_id: usize,
    mut constraints: Vec<Constraint>,
    cfg: &SamplerConfig,
    draws: &mut DrawStream,
) -> ConstraintSet {
    draws.shuffle(&mut constraints);
    let form = match cfg.form_mode {
        FormMode::Surface => EmitForm::Surface,
        FormMode::Lemma => EmitForm::Lemma,
        FormMode::Canonical => EmitForm::Canonical,
        FormMode::Mixed => {
            if draws.bernoulli(0.5) {
                EmitForm::Lemma
            } else {
                EmitForm::Surface
            }
        }
    };
    for c in &mut constraints {
        c.emit_form = form;
    }
    ConstraintSet {
        pair_id,
        constraints,
        skipped: false,
    }
}

pub fn sample_random(pair: &SentencePair, cfg: &SamplerConfig) -> Result<ConstraintSet, SynthError> {
    sample_random_with_stats(pair, cfg, &mut SamplerStats::default())
}

pub fn sample_random_with_stats(
    pair: &SentencePair,
    cfg: &SamplerConfig,
    stats: &mut SamplerStats,
) -> Result<ConstraintSet, SynthError> {
    cfg.validate()?;
    if cfg.form_mode == FormMode::Canonical {
        return Err(SynthError::MissingForm(EmitForm::Canonical));
    }
    let lemmas = match cfg.form_mode {
        FormMode::Surface => pair.lemmas(Side::Target),
        _ => Some(target_lemmas(pair)?),
    };
    let mut draws = DrawStream::new(cfg.seed, Domain::Sampler, pair.id as u64);
    stats.sentences += 1;
    if draws.bernoulli(cfg.skip_ratio) {
        stats.skipped += 1;
        return Ok(ConstraintSet::skipped(pair.id));
    }

    let tokens = &pair.target.tokens;
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for i in 0..tokens.len() {
        if open.is_none() {
            stats.eligible += 1;
            if !draws.bernoulli(cfg.p_start) {
                continue;
            }
            stats.starts += 1;
            open = Some(i);
        }
        stats.included += 1;
        if draws.bernoulli(cfg.p_stop) {
            stats.stops += 1;
            spans.push(Span::new(open.take().unwrap(), i + 1));
        }
    }
    if let Some(start) = open {
        spans.push(Span::new(start, tokens.len()));
    }

    let constraints = spans
        .into_iter()
        .map(|span| Constraint {
            surface_tokens: tokens[span.start..span.end].iter().map(|t| t.surface.clone()).collect(),
            lemma_tokens: lemmas.map(|l| l[span.start..span.end].to_vec()),
            emit_form: EmitForm::Surface,
            canonical_tokens: None,
            target_span: Some(span),
            source_span: None,
            origin: Origin::Random,
            entry_id: None,
        })
        .collect();
    Ok(finish(pair.id, constraints, cfg, &mut draws))
}

pub fn sample_dictionary(pair: &SentencePair, lexicon: &TermLexicon, cfg: &SamplerConfig) -> Result<ConstraintSet, SynthError> {
    cfg.validate()?;
    if pair.lemmas(Side::Source).is_none() {
        return Err(SynthError::MissingLemmaLayer {
            pair_id: pair.id,
            side: Side::Source,
        });
    }
    let lemmas = target_lemmas(pair)?;
    let mut draws = DrawStream::new(cfg.seed, Domain::Sampler, pair.id as u64);
    if draws.bernoulli(cfg.skip_ratio) {
        return Ok(ConstraintSet::skipped(pair.id));
    }
    let origin = match lexicon.mode {
        LexiconMode::Dictionary => Origin::Dictionary,
        LexiconMode::Terminology => Origin::Terminology,
    };
    let surfaces = pair.target.surfaces();
    let constraints = lexicon
        .find_matches(pair, true)?
        .into_iter()
        .map(|m| {
            let span = m.target_span.expect("require_target sets target spans");
            Constraint {
                surface_tokens: surfaces[span.start..span.end].to_vec(),
                lemma_tokens: Some(lemmas[span.start..span.end].to_vec()),
                emit_form: EmitForm::Surface,
                canonical_tokens: Some(lexicon.entry(m.entry_id).target_tokens.clone()),
                target_span: Some(span),
                source_span: Some(m.source_span),
                origin,
                entry_id: Some(m.entry_id),
            }
        })
        .collect();
    Ok(finish(pair.id, constraints, cfg, &mut draws))
}

#[derive(Debug, Clone, Copy)]
pub enum Sampler<'a> {
    Random,
    Dictionary(&'a TermLexicon),
}

/// Samples every pair in parallel; output is in corpus order and does not
/// depend on the thread count.
pub fn synthesize(corpus: &Corpus, sampler: Sampler<'_>, cfg: &SamplerConfig) -> Result<(Vec<ConstraintSet>, SamplerStats), SynthError> {
    let results = corpus
        .pairs
        .par_iter()
        .map(|pair| {
            let mut stats = SamplerStats::default();
            let set = match sampler {
                Sampler::Random => sample_random_with_stats(pair, cfg, &mut stats)?,
                Sampler::Dictionary(lex) => {
                    let set = sample_dictionary(pair, lex, cfg)?;
                    stats.sentences = 1;
                    stats.skipped = set.skipped as u64;
                    set
                }
            };
            Ok((set, stats))
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let mut total = SamplerStats::default();
    let sets = results
        .into_iter()
        .map(|(set, stats)| {
            total = total.merge(stats);
            set
        })
        .collect();
    Ok((sets, total))
}
