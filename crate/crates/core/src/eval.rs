//! Hypothesis scoring: corpus BLEU (13a tokenization, exponential smoothing),
//! surface and lemma constraint coverage, placement correlation, the
//! constraint-shuffle check, and miss bucketing.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::draws::{Domain, DrawStream};
use crate::lexicon::Span;
use crate::morph::Analyzer;
use crate::synth::Constraint;
use crate::testset::{TestCase, TestSet};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{hyps} hypotheses for {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
}

fn check_lengths(hyps: usize, refs: usize) -> Result<(), EvalError> {
    if hyps != refs {
        return Err(EvalError::LengthMismatch { hyps, refs });
    }
    Ok(())
}

// Python's str.split() also breaks on the ASCII separator controls.
fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\x1c'..='\x1f').contains(&c)
}

static RE_13A: LazyLock<[(Regex, &'static str); 4]> = LazyLock::new(|| {
    [
        (Regex::new(r"([\{-~\[-`\x20-&\(-\+:-@/])").unwrap(), " ${1} "),
        (Regex::new(r"([^0-9])([\.,])").unwrap(), "${1} ${2} "),
        (Regex::new(r"([\.,])([^0-9])").unwrap(), " ${1} ${2}"),
        (Regex::new(r"([0-9])(-)").unwrap(), "${1} ${2} "),
    ]
});

/// The mteval-v13a tokenizer.
pub fn tokenize_13a(line: &str) -> String {
    let mut line = line
        .trim_end_matches(is_py_space)
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in RE_13A.iter() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    line.split(is_py_space).filter(|t| !t.is_empty()).collect::<Vec<_>>().join(" ")
}

/// Sufficient statistics of corpus BLEU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub sys_len: u64,
    pub ref_len: u64,
    pub correct: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
}

impl BleuStats {
    fn add(mut self, o: BleuStats) -> BleuStats {
        self.sys_len += o.sys_len;
        self.ref_len += o.ref_len;
        for n in 0..MAX_ORDER {
            self.correct[n] += o.correct[n];
            self.total[n] += o.total[n];
        }
        self
    }

    /// Statistics of one pre-tokenized segment.
    pub fn segment(hyp: &[&str], reference: &[&str]) -> BleuStats {
        let mut stats = BleuStats {
            sys_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            if hyp.len() < n {
                break;
            }
            let mut ref_counts: HashMap<&[&str], u64> = HashMap::new();
            for g in reference.windows(n) {
                *ref_counts.entry(g).or_default() += 1;
            }
            let mut hyp_counts: HashMap<&[&str], u64> = HashMap::new();
            for g in hyp.windows(n) {
                *hyp_counts.entry(g).or_default() += 1;
            }
            stats.total[n - 1] = (hyp.len() + 1 - n) as u64;
            stats.correct[n - 1] = hyp_counts
                .iter()
                .map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    /// Score in percent. Orders with no hypothesis n-grams contribute a
    /// floored log, so a corpus without 4-grams scores 0.
    pub fn score(&self) -> f64 {
        if self.correct.iter().all(|&c| c == 0) {
            return 0.0;
        }
        let bp = if self.sys_len < self.ref_len {
            if self.sys_len > 0 {
                (1.0 - self.ref_len as f64 / self.sys_len as f64).exp()
            } else {
                0.0
            }
        } else {
            1.0
        };
        // precisions as ratios, so that a perfect match scores exactly 100
        let mut precisions = [0.0f64; MAX_ORDER];
        let mut smooth = 1.0f64;
        for n in 0..MAX_ORDER {
            if self.total[n] == 0 {
                break;
            }
            precisions[n] = if self.correct[n] == 0 {
                smooth *= 2.0;
                1.0 / (smooth * self.total[n] as f64)
            } else {
                self.correct[n] as f64 / self.total[n] as f64
            };
        }
        let log_sum: f64 = precisions
            .iter()
            .map(|&p| if p == 0.0 { -9_999_999_999.0 } else { p.ln() })
            .sum();
        100.0 * bp * (log_sum / MAX_ORDER as f64).exp()
    }
}

pub fn bleu_stats<H: AsRef<str> + Sync, R: AsRef<str> + Sync>(hyps: &[H], refs: &[R]) -> Result<BleuStats, EvalError> {
    check_lengths(hyps.len(), refs.len())?;
    Ok(hyps
        .par_iter()
        .zip(refs)
        .map(|(h, r)| {
            let h = tokenize_13a(h.as_ref());
            let r = tokenize_13a(r.as_ref());
            let ht: Vec<&str> = h.split(' ').filter(|t| !t.is_empty()).collect();
            let rt: Vec<&str> = r.split(' ').filter(|t| !t.is_empty()).collect();
            BleuStats::segment(&ht, &rt)
        })
        .reduce(BleuStats::default, BleuStats::add))
}

/// Corpus BLEU: 13a tokenization, mixed case, exponential smoothing, one reference.
pub fn bleu<H: AsRef<str> + Sync, R: AsRef<str> + Sync>(hyps: &[H], refs: &[R]) -> Result<f64, EvalError> {
    Ok(bleu_stats(hyps, refs)?.score())
}

/// Replaces every whitespace token by its analyzer key.
pub fn lemmatize_line(analyzer: &Analyzer, line: &str) -> String {
    line.split_whitespace().map(|t| analyzer.normalize(t)).collect::<Vec<_>>().join(" ")
}

/// BLEU over analyzer-normalized hypotheses and references.
pub fn bleu_l<H: AsRef<str> + Sync, R: AsRef<str> + Sync>(hyps: &[H], refs: &[R], analyzer: &Analyzer) -> Result<f64, EvalError> {
    check_lengths(hyps.len(), refs.len())?;
    let h: Vec<String> = hyps.par_iter().map(|l| lemmatize_line(analyzer, l.as_ref())).collect();
    let r: Vec<String> = refs.par_iter().map(|l| lemmatize_line(analyzer, l.as_ref())).collect();
    bleu(&h, &r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub pair_id: usize,
    pub satisfied_surface: Vec<bool>,
    pub satisfied_lemma: Vec<bool>,
    /// Present when some emitted form differs from the reference surface.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satisfied_emitted: Option<Vec<bool>>,
    /// Start characters of constraints satisfied in both hypothesis and reference.
    pub hyp_start_chars: Vec<usize>,
    pub ref_start_chars: Vec<usize>,
    /// Token spans of the surface hits in the hypothesis, per constraint.
    #[serde(skip)]
    pub hyp_spans: Vec<Option<Span>>,
}

/// Assigns each needle a non-overlapping occurrence in `hay`. Identical
/// needles are grouped and take occurrences left to right.
fn assign_occurrences(hay: &[&str], needles: &[&[String]], preset: &[Option<Span>]) -> Vec<Option<Span>> {
    let mut out: Vec<Option<Span>> = preset.to_vec();
    let mut groups: Vec<(&[String], Vec<usize>)> = Vec::new();
    for (i, n) in needles.iter().enumerate() {
        match groups.iter_mut().find(|(k, _)| k == n) {
            Some((_, members)) => members.push(i),
            None => groups.push((n, vec![i])),
        }
    }
    for (needle, members) in groups {
        if needle.is_empty() {
            continue;
        }
        let mut taken: Vec<Span> = members.iter().filter_map(|&i| out[i]).collect();
        for &i in &members {
            if out[i].is_some() {
                continue;
            }
            let hit = hay
                .windows(needle.len())
                .enumerate()
                .map(|(s, w)| (Span::new(s, s + needle.len()), w))
                .find(|(span, w)| w.iter().zip(needle).all(|(a, b)| *a == b) && !taken.iter().any(|t| t.overlaps(span)));
            if let Some((span, _)) = hit {
                taken.push(span);
                out[i] = Some(span);
            }
        }
    }
    out
}

/// Character offset of each token in the single-space join.
fn char_offsets(tokens: &[&str]) -> Vec<usize> {
    let mut offs = Vec::with_capacity(tokens.len());
    let mut pos = 0;
    for t in tokens {
        offs.push(pos);
        pos += t.chars().count() + 1;
    }
    offs
}

fn score_case(hyp: &str, case: &TestCase, analyzer: &Analyzer) -> CaseResult {
    let hyp_tokens: Vec<&str> = hyp.split_whitespace().collect();
    let ref_tokens: Vec<&str> = case.reference_line.split_whitespace().collect();
    let k = case.constraints.len();
    let surfaces: Vec<&[String]> = case.constraints.iter().map(|c| c.surface_tokens.as_slice()).collect();
    let none = vec![None; k];
    let hyp_spans = assign_occurrences(&hyp_tokens, &surfaces, &none);
    let ref_spans = assign_occurrences(&ref_tokens, &surfaces, &none);

    let hyp_lemmas: Vec<String> = hyp_tokens.iter().map(|t| analyzer.normalize(t)).collect();
    let hyp_lemma_refs: Vec<&str> = hyp_lemmas.iter().map(String::as_str).collect();
    let keys: Vec<Vec<String>> = case.constraints.iter().map(|c| analyzer.normalize_sequence(&c.surface_tokens)).collect();
    let key_refs: Vec<&[String]> = keys.iter().map(Vec::as_slice).collect();
    let lemma_spans = assign_occurrences(&hyp_lemma_refs, &key_refs, &hyp_spans);

    let emitted: Vec<Option<Vec<String>>> = case.constraints.iter().map(|c| c.realized().ok()).collect();
    let differs = case
        .constraints
        .iter()
        .zip(&emitted)
        .any(|(c, e)| e.as_ref().is_some_and(|e| *e != c.surface_tokens));
    let satisfied_emitted = differs.then(|| {
        let forms: Vec<&[String]> = emitted
            .iter()
            .zip(&case.constraints)
            .map(|(e, c)| e.as_deref().unwrap_or(c.surface_tokens.as_slice()))
            .collect();
        assign_occurrences(&hyp_tokens, &forms, &none).iter().map(Option::is_some).collect()
    });

    let hyp_offs = char_offsets(&hyp_tokens);
    let ref_offs = char_offsets(&ref_tokens);
    let (mut hyp_start_chars, mut ref_start_chars) = (Vec::new(), Vec::new());
    for (h, r) in hyp_spans.iter().zip(&ref_spans) {
        if let (Some(h), Some(r)) = (h, r) {
            hyp_start_chars.push(hyp_offs[h.start]);
            ref_start_chars.push(ref_offs[r.start]);
        }
    }
    CaseResult {
        pair_id: case.pair_id,
        satisfied_surface: hyp_spans.iter().map(Option::is_some).collect(),
        satisfied_lemma: lemma_spans.iter().map(Option::is_some).collect(),
        satisfied_emitted,
        hyp_start_chars,
        ref_start_chars,
        hyp_spans,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub cvg: f64,
    pub cvg_l: f64,
    /// Coverage of the emitted forms, when they differ from the reference surface.
    pub cvg_emitted: Option<f64>,
    pub constraints: usize,
    /// True when there were no constraints and the rates are 1.0 by convention.
    pub vacuous: bool,
    pub per_case: Vec<CaseResult>,
}

/// Surface and lemma coverage. Hypotheses are split on whitespace.
pub fn coverage<S: AsRef<str> + Sync>(hyps: &[S], testset: &TestSet, analyzer: &Analyzer) -> Result<Coverage, EvalError> {
    check_lengths(hyps.len(), testset.cases.len())?;
    let per_case: Vec<CaseResult> = hyps
        .par_iter()
        .zip(&testset.cases)
        .map(|(h, case)| score_case(h.as_ref(), case, analyzer))
        .collect();
    let total: usize = per_case.iter().map(|c| c.satisfied_surface.len()).sum();
    let count = |f: &dyn Fn(&CaseResult) -> usize| per_case.iter().map(f).sum::<usize>();
    let surf = count(&|c| c.satisfied_surface.iter().filter(|b| **b).count());
    let lem = count(&|c| c.satisfied_lemma.iter().filter(|b| **b).count());
    let rate = |n: usize| if total == 0 { 1.0 } else { n as f64 / total as f64 };
    let cvg_emitted = per_case.iter().any(|c| c.satisfied_emitted.is_some()).then(|| {
        rate(count(&|c| match &c.satisfied_emitted {
            Some(e) => e.iter().filter(|b| **b).count(),
            None => c.satisfied_surface.iter().filter(|b| **b).count(),
        }))
    });
    Ok(Coverage {
        cvg: rate(surf),
        cvg_l: rate(lem),
        cvg_emitted,
        constraints: total,
        vacuous: total == 0,
        per_case,
    })
}

/// Pearson correlation of integer samples; `None` below two points or with zero variance.
pub fn pearson(xs: &[usize], ys: &[usize]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for (&x, &y) in xs.iter().zip(ys) {
        let (x, y) = (x as i128, y as i128);
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let n = n as i128;
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 || vy == 0 {
        return None;
    }
    // collinear samples: exact, without rounding through the square root
    if let (Some(c2), Some(v2)) = (cov.checked_mul(cov), vx.checked_mul(vy)) {
        if c2 == v2 {
            return Some(cov.signum() as f64);
        }
    }
    let r = cov as f64 / ((vx as f64) * (vy as f64)).sqrt();
    Some(r.clamp(-1.0, 1.0))
}

/// Pools start-character pairs over all cases.
pub fn placement_rho(per_case: &[CaseResult]) -> Option<f64> {
    let xs: Vec<usize> = per_case.iter().flat_map(|c| c.hyp_start_chars.iter().copied()).collect();
    let ys: Vec<usize> = per_case.iter().flat_map(|c| c.ref_start_chars.iter().copied()).collect();
    pearson(&xs, &ys)
}

/// Moves every surface-satisfied constraint occurrence of `hyp` to a random token boundary.
pub fn shuffle_hypothesis(hyp: &str, result: &CaseResult, seed: u64) -> String {
    let tokens: Vec<&str> = hyp.split_whitespace().collect();
    let mut spans: Vec<Span> = result.hyp_spans.iter().flatten().copied().collect();
    if spans.is_empty() {
        return tokens.join(" ");
    }
    spans.sort_by_key(|s| s.start);
    let mut in_span = vec![false; tokens.len()];
    for s in &spans {
        in_span[s.start..s.end].iter_mut().for_each(|b| *b = true);
    }
    let rest: Vec<&str> = tokens.iter().zip(&in_span).filter(|(_, b)| !**b).map(|(t, _)| *t).collect();
    let mut draws = DrawStream::new(seed, Domain::PlacementShuffle, result.pair_id as u64);
    let mut inserts: Vec<(usize, usize)> = (0..spans.len()).map(|i| (draws.below(rest.len() + 1), i)).collect();
    inserts.sort();
    let mut out = Vec::with_capacity(tokens.len());
    let mut next = inserts.iter().peekable();
    for pos in 0..=rest.len() {
        while let Some(&&(p, i)) = next.peek() {
            if p != pos {
                break;
            }
            out.extend_from_slice(&tokens[spans[i].start..spans[i].end]);
            next.next();
        }
        if pos < rest.len() {
            out.push(rest[pos]);
        }
    }
    out.join(" ")
}

/// Correlation before and after moving satisfied constraints to random positions.
pub fn shuffle_check<S: AsRef<str> + Sync>(
    hyps: &[S],
    testset: &TestSet,
    analyzer: &Analyzer,
    seed: u64,
) -> Result<(Option<f64>, Option<f64>), EvalError> {
    let original = coverage(hyps, testset, analyzer)?;
    let shuffled: Vec<String> = hyps
        .par_iter()
        .zip(&original.per_case)
        .map(|(h, r)| shuffle_hypothesis(h.as_ref(), r, seed))
        .collect();
    let after = coverage(&shuffled, testset, analyzer)?;
    Ok((placement_rho(&original.per_case), placement_rho(&after.per_case)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MissBucket {
    FormMismatch,
    Missing,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissBuckets {
    #[serde(rename = "FORM_MISMATCH")]
    pub form_mismatch: usize,
    #[serde(rename = "MISSING")]
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub pair_id: usize,
    pub source: String,
    pub hyp: String,
    #[serde(rename = "ref")]
    pub reference: String,
    pub constraint: Vec<String>,
    pub lemma: Vec<String>,
    pub emitted: Option<Vec<String>>,
    pub bucket: MissBucket,
}

/// Sorts surface misses into FORM_MISMATCH (lemma hit) and MISSING.
pub fn bucket_misses<S: AsRef<str>>(
    per_case: &[CaseResult],
    hyps: &[S],
    testset: &TestSet,
    analyzer: &Analyzer,
) -> (MissBuckets, Vec<ReviewItem>) {
    let mut buckets = MissBuckets::default();
    let mut queue = Vec::new();
    for ((result, hyp), case) in per_case.iter().zip(hyps).zip(&testset.cases) {
        for (i, c) in case.constraints.iter().enumerate() {
            if result.satisfied_surface[i] {
                continue;
            }
            let bucket = if result.satisfied_lemma[i] {
                buckets.form_mismatch += 1;
                MissBucket::FormMismatch
            } else {
                buckets.missing += 1;
                MissBucket::Missing
            };
            queue.push(review_item(case, c, hyp.as_ref(), analyzer, bucket));
        }
    }
    (buckets, queue)
}

fn review_item(case: &TestCase, c: &Constraint, hyp: &str, analyzer: &Analyzer, bucket: MissBucket) -> ReviewItem {
    ReviewItem {
        pair_id: case.pair_id,
        source: case.source_line.clone(),
        hyp: hyp.to_string(),
        reference: case.reference_line.clone(),
        constraint: c.surface_tokens.clone(),
        lemma: analyzer.normalize_sequence(&c.surface_tokens),
        emitted: c.realized().ok(),
        bucket,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu: f64,
    pub bleu_l: f64,
    pub cvg: f64,
    pub cvg_l: f64,
    pub cvg_emitted: Option<f64>,
    pub constraints: usize,
    pub cases: usize,
    pub vacuous_coverage: bool,
    pub placement_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffled_rho: Option<Option<f64>>,
    pub miss_buckets: MissBuckets,
    pub per_case: Vec<CaseResult>,
}

/// Full evaluation; `shuffle_seed` enables the shuffle check.
pub fn evaluate<S: AsRef<str> + Sync>(
    hyps: &[S],
    testset: &TestSet,
    analyzer: &Analyzer,
    shuffle_seed: Option<u64>,
) -> Result<(EvalReport, Vec<ReviewItem>), EvalError> {
    let refs: Vec<&str> = testset.cases.iter().map(|c| c.reference_line.as_str()).collect();
    let cov = coverage(hyps, testset, analyzer)?;
    let shuffled_rho = match shuffle_seed {
        Some(seed) => Some(shuffle_check(hyps, testset, analyzer, seed)?.1),
        None => None,
    };
    let (miss_buckets, queue) = bucket_misses(&cov.per_case, hyps, testset, analyzer);
    let report = EvalReport {
        bleu: bleu(hyps, &refs)?,
        bleu_l: bleu_l(hyps, &refs, analyzer)?,
        cvg: cov.cvg,
        cvg_l: cov.cvg_l,
        cvg_emitted: cov.cvg_emitted,
        constraints: cov.constraints,
        cases: testset.cases.len(),
        vacuous_coverage: cov.vacuous,
        placement_rho: placement_rho(&cov.per_case),
        shuffled_rho,
        miss_buckets,
        per_case: cov.per_case,
    };
    Ok((report, queue))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"))
}

/// One-row text table: BLEU, Cvg, BLEU_L, Cvg_L, Pos rho.
pub fn summary_table(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>8} {:>8} {:>8} {:>8} {:>8}", "BLEU", "Cvg", "BLEU_L", "Cvg_L", "Pos rho");
    let _ = writeln!(
        s,
        "{:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8}",
        report.bleu,
        report.cvg * 100.0,
        report.bleu_l,
        report.cvg_l * 100.0,
        fmt_opt(report.placement_rho)
    );
    if let Some(e) = report.cvg_emitted {
        let _ = writeln!(s, "emitted-form Cvg: {:.2}", e * 100.0);
    }
    if let Some(r) = report.shuffled_rho {
        let _ = writeln!(s, "shuffled Pos rho: {}", fmt_opt(r));
    }
    if report.vacuous_coverage {
        let _ = writeln!(s, "no constraints: coverage is vacuous");
    }
    let _ = writeln!(
        s,
        "misses: FORM_MISMATCH {} MISSING {}",
        report.miss_buckets.form_mismatch, report.miss_buckets.missing
    );
    s
}
