use lemmacon_core::assemble::{validate_constraints, validate_corpus};
use lemmacon_core::synth::ConstraintSetRecord;
use lemmacon_core::{assemble, ConstraintSet, InputFormat};

use super::{read_lines, Ctx, Outcome};
use crate::error::CliError;
use crate::manifest::{sidecar, write_file};

/// Writes `<out>.input`, `<out>.target` and `<out>.positions`.
pub fn run(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let prefix = ctx.out("as the output prefix")?;
    ctx.anchor = Some(prefix.clone());
    let format = match ctx.settings.choice("format", &["suffix", "suffix-shift", "prefix", "factored"])? {
        "suffix" => InputFormat::Suffix,
        "suffix-shift" => InputFormat::SuffixShift,
        "prefix" => InputFormat::Prefix,
        _ => InputFormat::Factored,
    };
    let corpus = ctx.corpus()?;
    let dump = ctx.input("constraints", "(a dump written by synth)")?;
    validate_corpus(&corpus).map_err(CliError::Format)?;

    let mut records = Vec::new();
    for (no, line) in read_lines(&dump)?.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ConstraintSetRecord = serde_json::from_str(&line).map_err(|source| CliError::Json {
            path: dump.clone(),
            line: no + 1,
            source,
        })?;
        records.push(rec);
    }
    if records.len() != corpus.len() {
        return Err(CliError::Data(format!(
            "{}: {} constraint records for {} pairs",
            dump.display(),
            records.len(),
            corpus.len()
        )));
    }

    let (mut input, mut target, mut positions) = (String::new(), String::new(), String::new());
    for (pair, rec) in corpus.iter().zip(&records) {
        let cs = ConstraintSet::from_record(rec, Some(pair))?;
        validate_constraints(&cs).map_err(|e| CliError::assemble(pair.id, e))?;
        let ex = assemble(pair, &cs, format).map_err(|e| CliError::assemble(pair.id, e))?;
        for (buf, line) in [(&mut input, ex.input_line()), (&mut target, ex.target_line.clone()), (&mut positions, ex.positions_line())] {
            buf.push_str(&line);
            buf.push('\n');
        }
    }
    for (ext, text) in [("input", &input), ("target", &target), ("positions", &positions)] {
        let path = sidecar(&prefix, ext);
        write_file(&path, text.as_bytes())?;
        ctx.rec.output(&path)?;
    }
    Ok(if corpus.is_empty() {
        Outcome::Empty("corpus is empty; wrote empty files".into())
    } else {
        Outcome::Done
    })
}
