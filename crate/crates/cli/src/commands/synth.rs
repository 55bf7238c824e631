use lemmacon_core::{synthesize, FormMode, LexiconMode, Sampler, SamplerConfig};

use super::{Ctx, Outcome};
use crate::error::CliError;
use crate::manifest::write_file;

pub fn run(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let out = ctx.out("for the constraint dump")?;
    ctx.anchor = Some(out.clone());
    let s = &ctx.settings;
    let cfg = SamplerConfig {
        p_start: s.parse_or("p-start")?,
        p_stop: s.parse_or("p-stop")?,
        skip_ratio: s.parse_or("skip-ratio")?,
        seed: s.seed("for synth")?,
        form_mode: match s.choice("form", &["surface", "lemma", "canonical", "mixed"])? {
            "surface" => FormMode::Surface,
            "lemma" => FormMode::Lemma,
            "canonical" => FormMode::Canonical,
            _ => FormMode::Mixed,
        },
    };
    cfg.validate().map_err(|e| CliError::config(e.to_string()))?;
    let dict = s.choice("sampler", &["random", "dict"])? == "dict";
    if dict && s.get("lexicon").is_none() {
        return Err(CliError::config("`sampler = dict` needs `lexicon`"));
    }
    if !dict && cfg.form_mode == FormMode::Canonical {
        return Err(CliError::config("random constraints have no canonical form"));
    }

    let mut corpus = ctx.corpus()?;
    let needs_lemmas = dict || matches!(cfg.form_mode, FormMode::Lemma | FormMode::Mixed);
    let lexicon = if needs_lemmas {
        let (src_an, tgt_an) = ctx.lemmatized(&mut corpus)?;
        if dict {
            Some(ctx.lexicon(&src_an, &tgt_an, LexiconMode::Dictionary, "for the dictionary sampler")?)
        } else {
            None
        }
    } else {
        None
    };
    let sampler = match &lexicon {
        Some(lex) => Sampler::Dictionary(lex),
        None => Sampler::Random,
    };
    let (sets, stats) = synthesize(&corpus, sampler, &cfg)?;
    log::info!(
        "{} sentences, {} skipped, start rate {:.4}, stop rate {:.4}",
        stats.sentences,
        stats.skipped,
        stats.start_rate(),
        stats.stop_rate()
    );

    let mut buf = Vec::new();
    for set in &sets {
        serde_json::to_writer(&mut buf, &set.to_record()?).expect("records serialize");
        buf.push(b'\n');
    }
    write_file(&out, &buf)?;
    ctx.rec.output(&out)?;
    Ok(if sets.is_empty() {
        Outcome::Empty("corpus is empty; no constraints written".into())
    } else {
        Outcome::Done
    })
}
