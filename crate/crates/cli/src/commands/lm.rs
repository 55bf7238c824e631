use lemmacon_core::train_ngram;

use super::{read_lines, Ctx, Outcome};
use crate::error::CliError;

/// Trains on the target-language text in `tgt` and saves the model to `<out>`.
pub fn run(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let out = ctx.out("for the model")?;
    ctx.anchor = Some(out.clone());
    let order: usize = ctx.settings.parse_or("order")?;
    let discount: f64 = ctx.settings.parse_or("discount")?;
    if order == 0 {
        return Err(CliError::config("`order` must be at least 1"));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(CliError::config("`discount` must lie in (0, 1)"));
    }
    let path = ctx.input("tgt", "as training text")?;
    let lines: Vec<String> = read_lines(&path)?.into_iter().filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        return Err(CliError::Data(format!("{}: no training sentences", path.display())));
    }
    let lm = train_ngram(&lines, order, discount)?;
    lm.save(&out)?;
    ctx.rec.output(&out)?;
    Ok(Outcome::Done)
}
