use lemmacon_core::testset::{build_oracle, build_rare, build_terminology, emit_exclusion};
use lemmacon_core::{EmitForm, LexiconMode, Policy, TestSet};

use super::{join_lines, Ctx, Outcome};
use crate::error::CliError;
use crate::manifest::{sidecar, write_file};

/// Writes the cases to `<out>`, the test set header to `<out>.header.json`
/// and the normalized references to exclude from training to `<out>.exclude`.
pub fn run(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let out = ctx.out("for the test set")?;
    ctx.anchor = Some(out.clone());
    let kind = ctx
        .settings
        .require("kind", "(oracle, terminology or rare)")
        .and_then(|_| ctx.settings.choice("kind", &["oracle", "terminology", "rare"]))?
        .to_string();
    let form = match ctx.settings.choice("form", &["surface", "lemma", "canonical", "mixed"])? {
        "surface" => EmitForm::Surface,
        "lemma" => EmitForm::Lemma,
        "canonical" => EmitForm::Canonical,
        _ => return Err(CliError::config("test sets take a single constraint form, not `mixed`")),
    };

    let mut corpus = ctx.corpus()?;
    let (src_an, tgt_an) = ctx.lemmatized(&mut corpus)?;
    let mut ts: TestSet = match kind.as_str() {
        "oracle" => {
            let lex = ctx.lexicon(&src_an, &tgt_an, LexiconMode::Dictionary, "for an oracle test set")?;
            build_oracle(&corpus, &lex)?
        }
        "terminology" => {
            let cap = ctx.settings.parse_or("cap-per-term")?;
            let termbase = ctx.lexicon(&src_an, &tgt_an, LexiconMode::Terminology, "as the termbase")?;
            build_terminology(&corpus, &termbase, cap)?
        }
        _ => {
            let policy = match ctx.settings.choice("policy", &["reference", "random", "none"])? {
                "reference" => Policy::Reference,
                "random" => Policy::Random,
                _ => Policy::None,
            };
            let seed = match policy {
                Policy::Random => ctx.settings.seed("for policy random")?,
                _ => ctx.settings.parse("seed")?.unwrap_or(0),
            };
            let max_freq = ctx.settings.parse_or("max-freq")?;
            let mut train = ctx.training_source()?;
            train.lemmatize_missing(lemmacon_core::Side::Source, &src_an);
            let lex = ctx.lexicon(&src_an, &tgt_an, LexiconMode::Dictionary, "for a rare-word test set")?;
            let freqs = lex.term_frequencies(&train)?;
            build_rare(&freqs, &lex, &corpus, max_freq, policy, seed)?
        }
    };
    // rare-word constraints are always lemmas
    if kind != "rare" {
        for case in &mut ts.cases {
            for c in &mut case.constraints {
                c.emit_form = form;
            }
        }
        ts.manifest
            .params
            .insert("form".into(), serde_json::to_value(form).expect("form serializes"));
    }

    let mut cases = Vec::new();
    ts.write_jsonl(&mut cases).expect("writing to memory");
    write_file(&out, &cases)?;
    let header = sidecar(&out, "header.json");
    write_file(&header, serde_json::to_string_pretty(&ts.manifest).expect("header serializes").as_bytes())?;
    let exclude = sidecar(&out, "exclude");
    write_file(&exclude, join_lines(&emit_exclusion(&ts).into_iter().collect::<Vec<_>>()).as_bytes())?;
    for p in [&out, &header, &exclude] {
        ctx.rec.output(p)?;
    }
    Ok(if ts.is_empty() {
        Outcome::Empty(format!("no pair qualifies for the {kind} test set"))
    } else {
        Outcome::Done
    })
}
