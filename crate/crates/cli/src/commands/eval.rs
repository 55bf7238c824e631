use std::fs;
use std::io::BufReader;
use std::path::Path;

use lemmacon_core::eval::summary_table;
use lemmacon_core::testset::TestSetManifest;
use lemmacon_core::{evaluate, Side, TestSet};

use super::{read_lines, Ctx, Outcome};
use crate::error::CliError;
use crate::manifest::{io_err, sidecar, write_file};

pub fn load_testset(path: &Path) -> Result<TestSet, CliError> {
    let header_path = sidecar(path, "header.json");
    let header = fs::read_to_string(&header_path).map_err(io_err(&header_path))?;
    let manifest: TestSetManifest = serde_json::from_str(&header).map_err(|source| CliError::Json {
        path: header_path.clone(),
        line: source.line(),
        source,
    })?;
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(TestSet::read_jsonl(BufReader::new(file), manifest)?)
}

/// Writes the report to `<out>` (default `<hyps>.eval.json`) and the miss
/// review queue to `<out>.review.jsonl`; prints the summary table.
pub fn run(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let hyps_path = ctx.input("hyps", "to evaluate")?;
    let ts_path = ctx.input("testset", "to evaluate against")?;
    let out = ctx.settings.path("out").unwrap_or_else(|| sidecar(&hyps_path, "eval.json"));
    ctx.anchor = Some(out.clone());
    let shuffle_seed = if ctx.settings.flag("shuffle-check")? {
        Some(ctx.settings.seed("for the shuffle check")?)
    } else {
        None
    };
    let ts = load_testset(&ts_path)?;
    ctx.rec.input(&sidecar(&ts_path, "header.json"))?;
    let analyzer = ctx.analyzer(Side::Target, None)?;
    let hyps = read_lines(&hyps_path)?;

    let (report, review) = evaluate(&hyps, &ts, &analyzer, shuffle_seed)?;
    print!("{}", summary_table(&report));
    write_file(&out, serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
    let mut queue = Vec::new();
    for item in &review {
        serde_json::to_writer(&mut queue, item).expect("review serializes");
        queue.push(b'\n');
    }
    let review_path = sidecar(&out, "review.jsonl");
    write_file(&review_path, &queue)?;
    ctx.rec.output(&out)?;
    ctx.rec.output(&review_path)?;
    Ok(if ts.is_empty() {
        Outcome::Empty("test set is empty".into())
    } else {
        Outcome::Done
    })
}
