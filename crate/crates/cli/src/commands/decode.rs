use lemmacon_core::decode::{realized_constraints, ExternalScorer};
use lemmacon_core::{decode_corpus, EmitForm, NGramLM, Scorer, SearchConfig, Vocab};

use super::eval::load_testset;
use super::{join_lines, read_lines, Ctx, Outcome};
use crate::error::CliError;
use crate::manifest::{sidecar, write_file};

/// Writes one hypothesis per test case to `<out>`.
pub fn run(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let out = ctx.out("for the hypotheses")?;
    ctx.anchor = Some(out.clone());
    let form = match ctx.settings.choice("form", &["surface", "lemma", "canonical", "mixed"])? {
        "surface" => EmitForm::Surface,
        "lemma" => EmitForm::Lemma,
        "canonical" => EmitForm::Canonical,
        _ => return Err(CliError::config("decoding takes a single constraint form, not `mixed`")),
    };
    let cfg = SearchConfig {
        beam: ctx.settings.parse_or("beam")?,
        max_len: ctx.settings.parse_or("max-len")?,
    };
    if cfg.beam == 0 {
        return Err(CliError::config("`beam` must be positive"));
    }
    let ts_path = ctx.input("testset", "to decode")?;
    let ts = load_testset(&ts_path)?;
    ctx.rec.input(&sidecar(&ts_path, "header.json"))?;

    let scorer: Box<dyn Scorer> = match (ctx.settings.path("lm"), ctx.settings.get("scorer-cmd").map(str::to_string)) {
        (Some(_), Some(_)) => return Err(CliError::config("give either `lm` or `scorer-cmd`, not both")),
        (Some(path), None) => {
            if !path.is_file() {
                return Err(CliError::config(format!("`lm`: {} does not exist", path.display())));
            }
            ctx.rec.input(&path)?;
            let mut lm = NGramLM::load(&path)?;
            // constraint tokens unseen in training still have to be producible
            let tokens: Vec<String> = realized_constraints(&ts, form)?.into_iter().flatten().flatten().collect();
            let added = lm.extend_vocab(&tokens);
            if added > 0 {
                log::info!("added {added} constraint tokens to the model vocabulary");
            }
            Box::new(lm)
        }
        (None, Some(cmd)) => {
            let vocab_path = ctx.input("scorer-vocab", "with `scorer-cmd`")?;
            let vocab = Vocab::from(read_lines(&vocab_path)?);
            let mut words = cmd.split_whitespace().map(str::to_string);
            let program = words.next().ok_or_else(|| CliError::config("`scorer-cmd` is empty"))?;
            let args: Vec<String> = words.collect();
            Box::new(ExternalScorer::spawn(&program, &args, vocab)?)
        }
        (None, None) => return Err(CliError::config("`lm` or `scorer-cmd` is required to decode")),
    };

    // the external scorer aborts the search by panicking on protocol errors
    let hyps = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| decode_corpus(scorer.as_ref(), &ts, form, cfg)))
        .map_err(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "scorer failed".into());
            CliError::Data(msg)
        })??;
    write_file(&out, join_lines(&hyps).as_bytes())?;
    ctx.rec.output(&out)?;
    Ok(if hyps.is_empty() {
        Outcome::Empty("test set is empty".into())
    } else {
        Outcome::Done
    })
}
