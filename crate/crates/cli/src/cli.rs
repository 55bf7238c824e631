use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lemmacon", version, about = "Constraint synthesis, test sets and evaluation for lexically constrained MT")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample constraints for every sentence pair.
    Synth(Opts),
    /// Serialize pairs and constraints into model input files.
    Assemble(Opts),
    /// Build an oracle, terminology or rare-word test set.
    Testset(Opts),
    /// Score hypotheses against a test set.
    Eval(Opts),
    /// Decode a test set with lexically constrained beam search.
    Decode(Opts),
    /// Corpus and lexicon statistics.
    Stats(Opts),
    /// Train the built-in n-gram scorer.
    Lm(Opts),
}

impl Command {
    pub fn split(self) -> (&'static str, Opts) {
        match self {
            Command::Synth(o) => ("synth", o),
            Command::Assemble(o) => ("assemble", o),
            Command::Testset(o) => ("testset", o),
            Command::Eval(o) => ("eval", o),
            Command::Decode(o) => ("decode", o),
            Command::Stats(o) => ("stats", o),
            Command::Lm(o) => ("lm", o),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Suffix,
    SuffixShift,
    Prefix,
    Factored,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    Surface,
    Lemma,
    Canonical,
    Mixed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Reference,
    Random,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerArg {
    Random,
    Dict,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Oracle,
    Terminology,
    Rare,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AnalyzerArg {
    Identity,
    Stemmer,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CorpusFormatArg {
    Moses,
    Tsv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LemmaFormatArg {
    Conllu,
    Tsv,
}

/// Every flag can also be set as `key = value` in the config file, under
/// `[common]` or the subcommand's own section. Flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Config file with `[common]` and per-subcommand sections.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Source side, one sentence per line (or `source<TAB>target` lines with `--corpus-format tsv`).
    #[arg(long, value_name = "PATH")]
    pub src: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub tgt: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub src_lemmas: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub tgt_lemmas: Option<PathBuf>,
    /// Bilingual lexicon or termbase, `source<TAB>target` per line.
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, value_enum)]
    pub form: Option<FormArg>,
    #[arg(long, value_name = "F")]
    pub skip_ratio: Option<f64>,
    #[arg(long, value_name = "F")]
    pub p_start: Option<f64>,
    #[arg(long, value_name = "F")]
    pub p_stop: Option<f64>,
    #[arg(long, value_name = "N")]
    pub cap_per_term: Option<usize>,
    #[arg(long, value_name = "N")]
    pub max_freq: Option<usize>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long, value_name = "N")]
    pub beam: Option<usize>,
    #[arg(long, value_name = "N")]
    pub max_len: Option<usize>,
    /// Also report placement correlation after shuffling satisfied constraints.
    #[arg(long)]
    pub shuffle_check: bool,

    /// Output file, or prefix for subcommands that write several files.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Constraint dump written by `synth`.
    #[arg(long, value_name = "PATH")]
    pub constraints: Option<PathBuf>,
    /// Test set written by `testset`.
    #[arg(long, value_name = "PATH")]
    pub testset: Option<PathBuf>,
    /// Hypotheses, one per test case.
    #[arg(long, value_name = "PATH")]
    pub hyps: Option<PathBuf>,
    /// Training source side used to count term frequencies.
    #[arg(long, value_name = "PATH")]
    pub train_src: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub train_src_lemmas: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub corpus_format: Option<CorpusFormatArg>,
    #[arg(long, value_enum)]
    pub lemma_format: Option<LemmaFormatArg>,
    /// Target-side analyzer.
    #[arg(long, value_enum)]
    pub analyzer: Option<AnalyzerArg>,
    #[arg(long, value_enum)]
    pub src_analyzer: Option<AnalyzerArg>,
    /// `surface<TAB>lemma` table for the target-side table analyzer.
    #[arg(long, value_name = "PATH")]
    pub lemma_table: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub src_lemma_table: Option<PathBuf>,
    /// Suffix rules replacing the built-in Czech stemmer.
    #[arg(long, value_name = "PATH")]
    pub stem_rules: Option<PathBuf>,
    /// n-gram model written by `lm`.
    #[arg(long, value_name = "PATH")]
    pub lm: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub order: Option<usize>,
    #[arg(long, value_name = "F")]
    pub discount: Option<f64>,
    /// External scorer command line, spoken to over stdin/stdout.
    #[arg(long, value_name = "CMD")]
    pub scorer_cmd: Option<String>,
    /// Vocabulary of the external scorer, one token per line in id order.
    #[arg(long, value_name = "PATH")]
    pub scorer_vocab: Option<PathBuf>,
}

fn name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

impl Opts {
    /// Flags that were given, as config keys and values.
    pub fn overrides(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        put("seed", self.seed.map(|v| v.to_string()));
        put("workers", self.workers.map(|v| v.to_string()));
        put("src", path(&self.src));
        put("tgt", path(&self.tgt));
        put("src-lemmas", path(&self.src_lemmas));
        put("tgt-lemmas", path(&self.tgt_lemmas));
        put("lexicon", path(&self.lexicon));
        put("format", self.format.as_ref().map(name));
        put("form", self.form.as_ref().map(name));
        put("skip-ratio", self.skip_ratio.map(|v| v.to_string()));
        put("p-start", self.p_start.map(|v| v.to_string()));
        put("p-stop", self.p_stop.map(|v| v.to_string()));
        put("cap-per-term", self.cap_per_term.map(|v| v.to_string()));
        put("max-freq", self.max_freq.map(|v| v.to_string()));
        put("policy", self.policy.as_ref().map(name));
        put("beam", self.beam.map(|v| v.to_string()));
        put("max-len", self.max_len.map(|v| v.to_string()));
        put("shuffle-check", self.shuffle_check.then(|| "true".to_string()));
        put("out", path(&self.out));
        put("sampler", self.sampler.as_ref().map(name));
        put("kind", self.kind.as_ref().map(name));
        put("constraints", path(&self.constraints));
        put("testset", path(&self.testset));
        put("hyps", path(&self.hyps));
        put("train-src", path(&self.train_src));
        put("train-src-lemmas", path(&self.train_src_lemmas));
        put("corpus-format", self.corpus_format.as_ref().map(name));
        put("lemma-format", self.lemma_format.as_ref().map(name));
        put("analyzer", self.analyzer.as_ref().map(name));
        put("src-analyzer", self.src_analyzer.as_ref().map(name));
        put("lemma-table", path(&self.lemma_table));
        put("src-lemma-table", path(&self.src_lemma_table));
        put("stem-rules", path(&self.stem_rules));
        put("lm", path(&self.lm));
        put("order", self.order.map(|v| v.to_string()));
        put("discount", self.discount.map(|v| v.to_string()));
        put("scorer-cmd", self.scorer_cmd.clone());
        put("scorer-vocab", path(&self.scorer_vocab));
        m
    }
}
