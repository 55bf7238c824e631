mod common;

use std::collections::{HashMap, HashSet};

use common::{contains_disjoint, exhaustive, TableScorer};
use lemmacon_core::assemble::{assemble, FactorLabel, InputFormat, CSEP, SEP, SHIFT_BASE};
use lemmacon_core::corpus::{attach_lemma_rows, exclude, load_parallel, Corpus, CorpusFormat, Side};
use lemmacon_core::decode::{beam_search, constrained_beam_search, train_ngram, Scorer, SearchConfig, TokenId, Vocab};
use lemmacon_core::eval::{bleu, bucket_misses, coverage, pearson};
use lemmacon_core::lexicon::{LexiconMode, TermLexicon};
use lemmacon_core::morph::{Analyzer, LemmaTable};
use lemmacon_core::synth::{synthesize, Constraint, FormMode, Origin, Sampler, SamplerConfig};
use lemmacon_core::testset::{build_rare, build_terminology, Policy, SplitTag, TestCase, TestSet, TestSetKind};
use proptest::prelude::*;

/// Surface forms `stem+suffix`; the lemma of every form is its stem.
const STEMS: [&str; 6] = ["dom", "strom", "les", "hrad", "most", "pole"];
const SUFFIXES: [&str; 3] = ["", "a", "em"];

fn word() -> impl Strategy<Value = String> {
    (0..STEMS.len(), 0..SUFFIXES.len()).prop_map(|(s, x)| format!("{}{}", STEMS[s], SUFFIXES[x]))
}

fn lemma_of(w: &str) -> String {
    STEMS.iter().filter(|s| w.starts_with(*s)).max_by_key(|s| s.len()).unwrap().to_string()
}

fn sentence(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 1..max)
}

fn table() -> Analyzer {
    let mut obs = Vec::new();
    for s in STEMS {
        for x in SUFFIXES {
            obs.push((format!("{s}{x}"), s.to_string()));
        }
    }
    Analyzer::LemmaTable(LemmaTable::from_observations(obs))
}

fn lemmatized(src: &[Vec<String>], tgt: &[Vec<String>]) -> Corpus {
    let s: Vec<String> = src.iter().map(|t| t.join(" ")).collect();
    let t: Vec<String> = tgt.iter().map(|t| t.join(" ")).collect();
    let mut c = Corpus::from_lines(&s, &t).unwrap();
    c.lemmatize_missing(Side::Source, &table());
    c.lemmatize_missing(Side::Target, &table());
    c
}

fn lexicon() -> TermLexicon {
    TermLexicon::from_tsv(
        "dom\tstrom\nles\thrad\nles\tpole\nmost pole\tdom les\nhrad\tmost\n",
        &table(),
        &table(),
        LexiconMode::Terminology,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moses_roundtrip_is_byte_identical(lines in prop::collection::vec(("[a-zé]{1,5}( [a-zé]{1,5}){0,4}", "[a-zé]{1,5}( [a-zé]{1,5}){0,4}"), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let (sp, tp) = (dir.path().join("s"), dir.path().join("t"));
        let src: String = lines.iter().map(|l| format!("{}\n", l.0)).collect();
        let tgt: String = lines.iter().map(|l| format!("{}\n", l.1)).collect();
        std::fs::write(&sp, &src).unwrap();
        std::fs::write(&tp, &tgt).unwrap();
        let c = load_parallel(&sp, Some(&tp), CorpusFormat::Moses2Files).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        c.write_moses(&mut a, &mut b).unwrap();
        prop_assert_eq!(String::from_utf8(a).unwrap(), src);
        prop_assert_eq!(String::from_utf8(b).unwrap(), tgt);
        prop_assert!(c.iter().enumerate().all(|(i, p)| p.id == i));
    }

    #[test]
    fn attaching_lemmas_keeps_tokens(sents in prop::collection::vec(sentence(8), 1..10)) {
        let c = lemmatized(&sents, &sents);
        let before: Vec<Vec<String>> = c.iter().map(|p| p.target.surfaces()).collect();
        let rows = sents.iter().map(|s| s.iter().map(|w| (w.clone(), lemma_of(w))).collect()).collect();
        let c = attach_lemma_rows(c, Side::Target, rows).unwrap();
        let after: Vec<Vec<String>> = c.iter().map(|p| p.target.surfaces()).collect();
        prop_assert_eq!(before, after);
        prop_assert!(c.iter().enumerate().all(|(i, p)| p.id == i));
    }

    #[test]
    fn exclude_identity_and_idempotence(sents in prop::collection::vec(sentence(5), 1..15), k in 0usize..5) {
        let c = lemmatized(&sents, &sents);
        let same = exclude(c.clone(), &HashSet::new());
        prop_assert_eq!(&same.pairs, &c.pairs);
        let black: HashSet<String> = sents.iter().take(k).map(|s| s.join(" ")).collect();
        let once = exclude(c, &black);
        let twice = exclude(once.clone(), &black);
        prop_assert_eq!(once.pairs, twice.pairs);
    }

    #[test]
    fn matching_ignores_target_inflection(src in sentence(8), tgt in sentence(8), pick in any::<prop::sample::Index>(), suf in 0..SUFFIXES.len()) {
        let lex = lexicon();
        let c = lemmatized(std::slice::from_ref(&src), std::slice::from_ref(&tgt));
        let m = lex.find_matches(&c.pairs[0], true).unwrap();
        let i = pick.index(tgt.len());
        let mut inflected = tgt.clone();
        inflected[i] = format!("{}{}", lemma_of(&tgt[i]), SUFFIXES[suf]);
        let c2 = lemmatized(&[src], &[inflected]);
        prop_assert_eq!(m, lex.find_matches(&c2.pairs[0], true).unwrap());
    }

    #[test]
    fn matches_sorted_disjoint_and_filtered(src in sentence(12), tgt in sentence(12)) {
        let lex = lexicon();
        let c = lemmatized(&[src], &[tgt]);
        let all = lex.find_matches(&c.pairs[0], false).unwrap();
        for w in all.windows(2) {
            prop_assert!(w[0].source_span.end <= w[1].source_span.start);
        }
        let spans: HashSet<_> = all.iter().map(|m| m.source_span).collect();
        for m in lex.find_matches(&c.pairs[0], true).unwrap() {
            prop_assert!(spans.contains(&m.source_span));
        }
    }

    #[test]
    fn sampled_spans_disjoint(sents in prop::collection::vec(sentence(20), 1..20), seed in any::<u64>(), skip in 0.0f64..1.0) {
        let c = lemmatized(&sents, &sents);
        let cfg = SamplerConfig { seed, skip_ratio: skip, ..SamplerConfig::default() };
        let (sets, _) = synthesize(&c, Sampler::Random, &cfg).unwrap();
        for s in &sets {
            prop_assert!(!s.skipped || s.constraints.is_empty());
            let mut spans: Vec<_> = s.constraints.iter().map(|c| c.target_span.unwrap()).collect();
            spans.sort_by_key(|s| s.start);
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
        }
    }

    #[test]
    fn strip_recovers_source(sents in prop::collection::vec(sentence(10), 1..10), seed in any::<u64>(), mixed in any::<bool>()) {
        let c = lemmatized(&sents, &sents);
        let form_mode = if mixed { FormMode::Mixed } else { FormMode::Surface };
        let cfg = SamplerConfig { seed, form_mode, ..SamplerConfig::default() };
        let lex = lexicon();
        let (random, _) = synthesize(&c, Sampler::Random, &cfg).unwrap();
        let (dict, _) = synthesize(&c, Sampler::Dictionary(&lex), &cfg).unwrap();
        for (pair, (rs, ds)) in c.iter().zip(random.iter().zip(&dict)) {
            let src = pair.source.surfaces();
            for (cs, formats) in [(rs, &[InputFormat::Suffix, InputFormat::SuffixShift, InputFormat::Prefix][..]), (ds, &[InputFormat::Suffix, InputFormat::SuffixShift, InputFormat::Prefix, InputFormat::Factored][..])] {
                for &f in formats {
                    let ex = assemble(pair, cs, f).unwrap();
                    prop_assert_eq!(&ex.strip_constraints(), &src);
                    prop_assert_eq!(ex.positions.len(), ex.input_tokens.len());
                    let seps = ex.input_tokens.iter().filter(|t| *t == SEP).count();
                    let cseps = ex.input_tokens.iter().filter(|t| *t == CSEP).count();
                    let k = cs.constraints.len();
                    if f == InputFormat::Factored {
                        prop_assert_eq!(ex.factor_labels.as_ref().map(Vec::len), Some(ex.input_tokens.len()));
                        // each constraint appears once, right after its source span
                        let labels = ex.factor_labels.as_ref().unwrap();
                        let runs = labels.iter().zip(labels.iter().skip(1)).filter(|(a, b)| **a != FactorLabel::Target && **b == FactorLabel::Target).count()
                            + usize::from(labels.first() == Some(&FactorLabel::Target));
                        prop_assert_eq!(runs, k);
                        prop_assert_eq!(seps + cseps, 0);
                    } else if k == 0 {
                        prop_assert_eq!(seps + cseps, 0);
                    } else {
                        prop_assert_eq!((seps, cseps), (1, k - 1));
                        let at = ex.input_tokens.iter().position(|t| t == SEP).unwrap();
                        let (head, tail) = if f == InputFormat::Prefix { (&ex.positions[at + 1..], &ex.positions[..=at]) } else { (&ex.positions[..at], &ex.positions[at..]) };
                        prop_assert!(head.windows(2).all(|w| w[0] < w[1]));
                        prop_assert!(tail.windows(2).all(|w| w[0] < w[1]));
                        if f == InputFormat::SuffixShift {
                            prop_assert_eq!(tail.iter().min().copied(), Some(SHIFT_BASE));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn terminology_partition_and_cap(sents in prop::collection::vec((sentence(8), sentence(8)), 1..40), cap in 1usize..4) {
        let src: Vec<Vec<String>> = sents.iter().map(|s| s.0.clone()).collect();
        let tgt: Vec<Vec<String>> = sents.iter().map(|s| s.1.clone()).collect();
        let c = lemmatized(&src, &tgt);
        let lex = lexicon();
        let ts = build_terminology(&c, &lex, cap).unwrap();
        let mut per_term: HashMap<Vec<String>, usize> = HashMap::new();
        for case in &ts.cases {
            prop_assert_eq!(case.constraint_splits.len(), case.constraints.len());
            let any_diff = case.constraint_splits.contains(&SplitTag::Diff);
            prop_assert_eq!(case.split_tag, Some(if any_diff { SplitTag::Diff } else { SplitTag::Same }));
            let terms: HashSet<Vec<String>> = case.constraints.iter().map(|k| lex.entry(k.entry_id.unwrap()).source_key.clone()).collect();
            for t in terms {
                *per_term.entry(t).or_default() += 1;
            }
        }
        prop_assert!(per_term.values().all(|&n| n <= cap));
        let again = build_terminology(&c, &lex, cap).unwrap();
        prop_assert_eq!(serde_json::to_string(&again).unwrap(), serde_json::to_string(&ts).unwrap());
    }

    #[test]
    fn rare_reference_variants_in_reference(sents in prop::collection::vec((sentence(8), sentence(8)), 1..30), seed in any::<u64>()) {
        let src: Vec<Vec<String>> = sents.iter().map(|s| s.0.clone()).collect();
        let tgt: Vec<Vec<String>> = sents.iter().map(|s| s.1.clone()).collect();
        let c = lemmatized(&src, &tgt);
        let lex = lexicon();
        let freqs = HashMap::new();
        let ts = build_rare(&freqs, &lex, &c, 50, Policy::Reference, seed).unwrap();
        for case in &ts.cases {
            let pair = &c.pairs[case.pair_id];
            let reference = pair.lemmas(Side::Target).unwrap();
            for k in &case.constraints {
                let l = k.lemma_tokens.as_ref().unwrap();
                prop_assert!(reference.windows(l.len()).any(|w| w == &l[..]));
            }
        }
    }

    #[test]
    fn surface_coverage_never_exceeds_lemma_coverage(cases in prop::collection::vec((sentence(10), sentence(10), prop::collection::vec((0usize..10, 1usize..3), 0..4)), 1..12)) {
        let (ts, hyps) = coverage_fixture(&cases);
        let cov = coverage(&hyps, &ts, &table()).unwrap();
        prop_assert!(cov.cvg <= cov.cvg_l);
        for r in &cov.per_case {
            for (s, l) in r.satisfied_surface.iter().zip(&r.satisfied_lemma) {
                prop_assert!(!s || *l);
            }
        }
        let (buckets, queue) = bucket_misses(&cov.per_case, &hyps, &ts, &table());
        let misses: usize = cov.per_case.iter().map(|r| r.satisfied_surface.iter().filter(|s| !**s).count()).sum();
        prop_assert_eq!(buckets.form_mismatch + buckets.missing, misses);
        prop_assert_eq!(queue.len(), misses);
    }

    #[test]
    fn coverage_invariant_under_case_permutation(cases in prop::collection::vec((sentence(10), sentence(10), prop::collection::vec((0usize..10, 1usize..3), 0..4)), 2..10), rot in 1usize..10) {
        let (ts, hyps) = coverage_fixture(&cases);
        let a = coverage(&hyps, &ts, &table()).unwrap();
        let r = rot % cases.len();
        let mut rotated = ts.clone();
        rotated.cases.rotate_left(r);
        let mut rh = hyps.clone();
        rh.rotate_left(r);
        let b = coverage(&rh, &rotated, &table()).unwrap();
        prop_assert_eq!((a.cvg, a.cvg_l), (b.cvg, b.cvg_l));
    }

    #[test]
    fn pearson_shift_invariance(xs in prop::collection::vec(0usize..500, 2..30), ys in prop::collection::vec(0usize..500, 2..30), shift in 0usize..10_000) {
        let n = xs.len().min(ys.len());
        let shifted: Vec<usize> = xs[..n].iter().map(|x| x + shift).collect();
        prop_assert_eq!(pearson(&xs[..n], &ys[..n]), pearson(&shifted, &ys[..n]));
    }

    #[test]
    fn bleu_identity(sents in prop::collection::vec(sentence(12), 1..10)) {
        let lines: Vec<String> = sents.iter().map(|s| s.join(" ")).collect();
        let has_4gram = sents.iter().any(|s| s.len() >= 4);
        let b = bleu(&lines, &lines).unwrap();
        // without any 4-gram the fourth precision is undefined and scores 0
        prop_assert_eq!(b, if has_4gram { 100.0 } else { 0.0 });
    }

    #[test]
    fn ngram_normalized(sents in prop::collection::vec(sentence(8), 1..10), order in 1usize..4, d in 0.05f64..0.95, ctx in prop::collection::vec(0u32..25, 0..5)) {
        let lines: Vec<String> = sents.iter().map(|s| s.join(" ")).collect();
        let lm = train_ngram(&lines, order, d).unwrap();
        let v = lm.vocab_size() as u32;
        let ctx: Vec<TokenId> = ctx.into_iter().map(|t| t % v).filter(|&t| t != Vocab::BOS_ID).collect();
        let lp = lm.score_next(&ctx);
        prop_assert!(lp.iter().all(|&x| x <= 0.0));
        let total: f64 = lp.iter().map(|x| x.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn finished_hypotheses_contain_constraints(seed in any::<u64>(), n_words in 2usize..5, cons in prop::collection::vec(prop::collection::vec(0usize..4, 1..3), 0..3), beam in 1usize..6) {
        let scorer = TableScorer::random(seed, n_words);
        let words = scorer.word_ids();
        let cons: Vec<Vec<TokenId>> = cons.iter().map(|c| c.iter().map(|&i| words[i % words.len()]).collect()).collect();
        let total: usize = cons.iter().map(Vec::len).sum();
        let r = constrained_beam_search(&scorer, &cons, SearchConfig { beam, max_len: total + 3 }).unwrap();
        // a narrow beam may fail to finish; it must never finish unsatisfied
        prop_assert_eq!(r.finished, r.satisfied);
        prop_assert!(!r.finished || contains_disjoint(&r.tokens, &cons));
    }

    #[test]
    fn zero_constraints_is_plain_beam_search(seed in any::<u64>(), n_words in 2usize..6, beam in 1usize..6, max_len in 1usize..8) {
        let scorer = TableScorer::random(seed, n_words);
        let cfg = SearchConfig { beam, max_len };
        let a = constrained_beam_search(&scorer, &[], cfg).unwrap();
        let b = beam_search(&scorer, cfg).unwrap();
        prop_assert_eq!(a.tokens, b.tokens);
        prop_assert_eq!(a.logprob, b.logprob);
    }

    #[test]
    fn wide_beam_is_exact_on_toy_instances(seed in any::<u64>(), n_words in 2usize..4, cons in prop::collection::vec(prop::collection::vec(0usize..3, 1..3), 0..3), extra in 0usize..3) {
        let scorer = TableScorer::random(seed, n_words);
        let words = scorer.word_ids();
        let cons: Vec<Vec<TokenId>> = cons.iter().map(|c| c.iter().map(|&i| words[i % words.len()]).collect()).collect();
        let total: usize = cons.iter().map(Vec::len).sum();
        let max_len = (total + extra).min(6);
        let r = constrained_beam_search(&scorer, &cons, SearchConfig { beam: 64, max_len }).unwrap();
        let oracle = exhaustive(&scorer, &cons, max_len);
        prop_assert_eq!(r.finished, oracle.is_some());
        if let Some((seq, lp)) = oracle {
            prop_assert_eq!(r.tokens, seq);
            prop_assert_eq!(r.logprob, lp);
        }
    }
}

/// Cases whose constraints are reference spans; hypotheses are unrelated
/// sentences with some reference spans copied in, possibly re-inflected.
fn coverage_fixture(cases: &[(Vec<String>, Vec<String>, Vec<(usize, usize)>)]) -> (TestSet, Vec<String>) {
    let mut out = Vec::new();
    let mut hyps = Vec::new();
    for (i, (reference, hyp, picks)) in cases.iter().enumerate() {
        let mut hyp = hyp.clone();
        let mut constraints = Vec::new();
        for (j, &(start, len)) in picks.iter().enumerate() {
            let s = start % reference.len();
            let e = (s + len).min(reference.len());
            let surface = reference[s..e].to_vec();
            match j % 3 {
                0 => hyp.extend(surface.iter().cloned()),
                1 => hyp.extend(surface.iter().map(|w| format!("{}em", lemma_of(w)))),
                _ => {}
            }
            constraints.push(Constraint {
                lemma_tokens: Some(surface.iter().map(|w| lemma_of(w)).collect()),
                origin: Origin::Random,
                ..Constraint::surface(&surface.iter().map(String::as_str).collect::<Vec<_>>())
            });
        }
        let mut case = TestCase::new(&lemmatized(std::slice::from_ref(reference), std::slice::from_ref(reference)).pairs[0], constraints);
        case.pair_id = i;
        out.push(case);
        hyps.push(hyp.join(" "));
    }
    (TestSet::from_cases(TestSetKind::Oracle, out), hyps)
}
