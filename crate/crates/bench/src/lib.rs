//! Synthetic fixtures shared by the benchmarks.

use lemmacon_core::testset::build_oracle;
use lemmacon_core::{Analyzer, Corpus, Domain, DrawStream, LexiconMode, TermLexicon, TestSet};

const SRC_WORDS: [&str; 12] = ["the", "a", "we", "saw", "near", "old", "new", "city", "road", "today", "and", "with"];
const TGT_WORDS: [&str; 12] = ["jsme", "viděli", "starý", "nový", "blízko", "město", "cesta", "dnes", "a", "s", "velmi", "tam"];
pub const TERMS: [(&str, &str); 6] = [
    ("castle", "hrad"),
    ("bridge", "most"),
    ("forest", "les"),
    ("field", "pole"),
    ("city wall", "městská hradba"),
    ("river bank", "říční břeh"),
];

/// `n` pairs of 10 to 30 tokens; about a third contain a term on both sides.
pub fn corpus(n: usize, seed: u64) -> Corpus {
    let mut src = Vec::with_capacity(n);
    let mut tgt = Vec::with_capacity(n);
    for i in 0..n {
        let mut d = DrawStream::new(seed, Domain::Sampler, i as u64);
        let len = 10 + d.below(21);
        let mut s: Vec<&str> = (0..len).map(|_| SRC_WORDS[d.below(SRC_WORDS.len())]).collect();
        let mut t: Vec<&str> = (0..len).map(|_| TGT_WORDS[d.below(TGT_WORDS.len())]).collect();
        if d.below(3) == 0 {
            let (a, b) = TERMS[d.below(TERMS.len())];
            s.insert(d.below(s.len()), a);
            t.insert(d.below(t.len()), b);
        }
        src.push(s.join(" "));
        tgt.push(t.join(" "));
    }
    let mut corpus = Corpus::from_lines(&src, &tgt).expect("aligned");
    corpus.lemmatize_missing(lemmacon_core::Side::Source, &Analyzer::Identity);
    corpus.lemmatize_missing(lemmacon_core::Side::Target, &Analyzer::Identity);
    corpus
}

pub fn lexicon(mode: LexiconMode) -> TermLexicon {
    let text: String = TERMS.iter().map(|(s, t)| format!("{s}\t{t}\n")).collect();
    TermLexicon::from_tsv(&text, &Analyzer::Identity, &Analyzer::Identity, mode).expect("valid lexicon")
}

pub fn oracle(corpus: &Corpus) -> TestSet {
    build_oracle(corpus, &lexicon(LexiconMode::Dictionary)).expect("lemmatized corpus")
}

pub fn target_lines(corpus: &Corpus) -> Vec<String> {
    corpus.iter().map(|p| p.target.raw.clone()).collect()
}
