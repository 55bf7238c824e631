mod assemble;
mod decode;
mod eval;
mod lm;
mod stats;
mod synth;
mod testset;

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use lemmacon_core::corpus::attach_lemmas;
use lemmacon_core::{
    build_lexicon, load_parallel, Analyzer, Corpus, CorpusFormat, LemmaTable, LexiconMode, Side, SidecarFormat,
    Stemmer, TermLexicon,
};

use crate::config::Settings;
use crate::error::CliError;
use crate::manifest::{io_err, Recorder};

pub enum Outcome {
    Done,
    /// The run succeeded but produced nothing.
    Empty(String),
}

pub struct Ctx {
    pub settings: Settings,
    pub rec: Recorder,
    /// The manifest is written next to this path.
    pub anchor: Option<PathBuf>,
}

pub fn run(subcommand: &str, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    if let Some(n) = ctx.settings.parse::<usize>("workers")? {
        if n == 0 {
            return Err(CliError::config("`workers` must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    }
    match subcommand {
        "synth" => synth::run(ctx),
        "assemble" => assemble::run(ctx),
        "testset" => testset::run(ctx),
        "eval" => eval::run(ctx),
        "decode" => decode::run(ctx),
        "stats" => stats::run(ctx),
        "lm" => lm::run(ctx),
        other => unreachable!("unknown subcommand {other}"),
    }
}

impl Ctx {
    fn out(&self, what: &str) -> Result<PathBuf, CliError> {
        self.settings.require_path("out", what)
    }

    fn input(&mut self, key: &str, why: &str) -> Result<PathBuf, CliError> {
        let path = self.settings.require_path(key, why)?;
        self.rec.input(&path)?;
        Ok(path)
    }

    fn optional_input(&mut self, key: &str) -> Result<Option<PathBuf>, CliError> {
        match self.settings.path(key) {
            Some(p) => {
                self.rec.input(&p)?;
                Ok(Some(p))
            }
            None => Ok(None),
        }
    }

    fn sidecar_format(&self) -> Result<SidecarFormat, CliError> {
        Ok(match self.settings.choice("lemma-format", &["conllu", "tsv"])? {
            "conllu" => SidecarFormat::Conllu,
            _ => SidecarFormat::TsvTokenLemma,
        })
    }

    /// The parallel corpus named by `src`/`tgt`, with any lemma sidecars attached.
    fn corpus(&mut self) -> Result<Corpus, CliError> {
        let format = match self.settings.choice("corpus-format", &["moses", "tsv"])? {
            "moses" => CorpusFormat::Moses2Files,
            _ => CorpusFormat::Tsv,
        };
        let src = self.input("src", "to read a corpus")?;
        let tgt = match format {
            CorpusFormat::Moses2Files => Some(self.input("tgt", "with corpus-format moses")?),
            CorpusFormat::Tsv => None,
        };
        let mut corpus = load_parallel(&src, tgt.as_deref(), format)?;
        let sidecar = self.sidecar_format()?;
        for (key, side) in [("src-lemmas", Side::Source), ("tgt-lemmas", Side::Target)] {
            if let Some(path) = self.optional_input(key)? {
                corpus = attach_lemmas(corpus, side, &path, sidecar)?;
            }
        }
        Ok(corpus)
    }

    /// Source-only corpus used for term counts.
    fn training_source(&mut self) -> Result<Corpus, CliError> {
        let path = self.input("train-src", "for rare-word test sets")?;
        let lines = read_lines(&path)?;
        let empty = vec![String::new(); lines.len()];
        let mut corpus = Corpus::from_lines(&lines, &empty)?;
        if let Some(sidecar) = self.optional_input("train-src-lemmas")? {
            corpus = attach_lemmas(corpus, Side::Source, &sidecar, self.sidecar_format()?)?;
        }
        Ok(corpus)
    }

    /// The analyzer configured for `side`. A table analyzer without a table
    /// file is built from the corpus's own lemma layer.
    fn analyzer(&mut self, side: Side, corpus: Option<&Corpus>) -> Result<Analyzer, CliError> {
        let (kind_key, table_key) = match side {
            Side::Source => ("src-analyzer", "src-lemma-table"),
            Side::Target => ("analyzer", "lemma-table"),
        };
        Ok(match self.settings.choice(kind_key, &["identity", "stemmer", "table"])? {
            "identity" => Analyzer::Identity,
            "stemmer" => match self.optional_input("stem-rules")? {
                Some(rules) => Analyzer::Stemmer(Stemmer::from_rules_file(&rules)?),
                None => Analyzer::Stemmer(Stemmer::czech_light()),
            },
            _ => {
                let table = match self.optional_input(table_key)? {
                    Some(path) => LemmaTable::from_tsv_file(&path)?,
                    None => match corpus.filter(|c| c.has_lemmas(side)) {
                        Some(c) => {
                            let table = LemmaTable::from_corpus(c, side);
                            log::info!(
                                "{side:?} lemma table: {} surfaces, ambiguity rate {:.4}",
                                table.len(),
                                table.stats.ambiguity_rate()
                            );
                            table
                        }
                        None => {
                            return Err(CliError::config(format!(
                                "`{kind_key} = table` needs `{table_key}` or a lemma sidecar"
                            )))
                        }
                    },
                };
                Analyzer::LemmaTable(table)
            }
        })
    }

    /// Analyzers for both sides; sides without a sidecar are lemmatized with them.
    fn lemmatized(&mut self, corpus: &mut Corpus) -> Result<(Analyzer, Analyzer), CliError> {
        let src_an = self.analyzer(Side::Source, Some(corpus))?;
        let tgt_an = self.analyzer(Side::Target, Some(corpus))?;
        corpus.lemmatize_missing(Side::Source, &src_an);
        corpus.lemmatize_missing(Side::Target, &tgt_an);
        Ok((src_an, tgt_an))
    }

    fn lexicon(&mut self, src_an: &Analyzer, tgt_an: &Analyzer, mode: LexiconMode, why: &str) -> Result<TermLexicon, CliError> {
        let path = self.input("lexicon", why)?;
        let lex = build_lexicon(&path, src_an, tgt_an, mode)?;
        if !lex.dropped.is_empty() {
            log::info!("{}: dropped {} trivial entries", path.display(), lex.dropped.len());
        }
        Ok(lex)
    }
}

pub fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map(|l| l.trim_end_matches('\r').to_string()))
        .collect::<Result<_, _>>()
        .map_err(io_err(path))
}

/// Lines joined with a trailing newline each.
pub fn join_lines<S: AsRef<str>>(lines: &[S]) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(l.as_ref());
        s.push('\n');
    }
    s
}
