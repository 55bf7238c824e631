use std::collections::BTreeMap;

use lemmacon_core::{LexiconMode, Side};
use serde::Serialize;

use super::{Ctx, Outcome};
use crate::error::CliError;
use crate::manifest::write_file;

#[derive(Serialize)]
struct SideStats {
    tokens: usize,
    types: usize,
    lemma_types: usize,
    /// Share of surfaces seen with more than one lemma; sidecar input only.
    ambiguity_rate: Option<f64>,
}

#[derive(Serialize)]
struct LexiconStats {
    entries: usize,
    dropped: usize,
    /// Source terms per occurrence-count range, ascending.
    frequency_buckets: Vec<(&'static str, usize)>,
    /// The most frequent source terms.
    top_terms: Vec<(String, usize)>,
}

#[derive(Serialize)]
struct Stats {
    pairs: usize,
    source: SideStats,
    target: SideStats,
    lexicon: Option<LexiconStats>,
}

const BUCKETS: [(usize, &str); 6] = [(0, "0"), (1, "1"), (10, "2-10"), (50, "11-50"), (1000, "51-1000"), (usize::MAX, ">1000")];
const TOP: usize = 20;

/// Prints corpus and lexicon statistics as JSON; also writes them to `<out>` if given.
pub fn run(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let out = ctx.settings.path("out");
    ctx.anchor = out.clone();
    let mut corpus = ctx.corpus()?;
    let sidecar_rates = [Side::Source, Side::Target].map(|side| {
        corpus
            .has_lemmas(side)
            .then(|| lemmacon_core::LemmaTable::from_corpus(&corpus, side).stats.ambiguity_rate())
    });
    let (src_an, tgt_an) = ctx.lemmatized(&mut corpus)?;
    let side_stats = |side: Side, rate: Option<f64>| {
        let mut types = std::collections::HashSet::new();
        let mut lemmas = std::collections::HashSet::new();
        let mut tokens = 0;
        for pair in corpus.iter() {
            let s = pair.sentence(side);
            tokens += s.len();
            types.extend(s.surfaces());
            lemmas.extend(pair.lemmas(side).unwrap_or(&[]).iter().cloned());
        }
        SideStats {
            tokens,
            types: types.len(),
            lemma_types: lemmas.len(),
            ambiguity_rate: rate,
        }
    };
    let source = side_stats(Side::Source, sidecar_rates[0]);
    let target = side_stats(Side::Target, sidecar_rates[1]);

    let lexicon = if ctx.settings.get("lexicon").is_some() {
        let lex = ctx.lexicon(&src_an, &tgt_an, LexiconMode::Dictionary, "")?;
        let freqs = lex.term_frequencies(&corpus)?;
        // one count per source key; translation variants share it
        let mut by_term: BTreeMap<String, usize> = BTreeMap::new();
        for e in &lex.entries {
            if let Some(&n) = freqs.get(&e.entry_id) {
                by_term.insert(e.source_tokens.join(" "), n);
            }
        }
        let mut frequency_buckets: Vec<(&'static str, usize)> = BUCKETS.iter().map(|&(_, b)| (b, 0)).collect();
        for &n in by_term.values() {
            let i = BUCKETS.iter().position(|(hi, _)| n <= *hi).expect("last bucket is unbounded");
            frequency_buckets[i].1 += 1;
        }
        let mut top_terms: Vec<(String, usize)> = by_term.into_iter().collect();
        top_terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        top_terms.truncate(TOP);
        Some(LexiconStats {
            entries: lex.len(),
            dropped: lex.dropped.len(),
            frequency_buckets,
            top_terms,
        })
    } else {
        None
    };

    let stats = Stats {
        pairs: corpus.len(),
        source,
        target,
        lexicon,
    };
    let json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    print!("{json}");
    if let Some(out) = out {
        write_file(&out, json.as_bytes())?;
        ctx.rec.output(&out)?;
    }
    Ok(if corpus.is_empty() {
        Outcome::Empty("corpus is empty".into())
    } else {
        Outcome::Done
    })
}
