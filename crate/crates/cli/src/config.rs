use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::error::CliError;

const SUBCOMMANDS: [&str; 7] = ["synth", "assemble", "testset", "eval", "decode", "stats", "lm"];

/// Every recognized key with its default, if it has one.
const KEYS: &[(&str, Option<&str>)] = &[
    ("seed", None),
    ("workers", None),
    ("src", None),
    ("tgt", None),
    ("src-lemmas", None),
    ("tgt-lemmas", None),
    ("lexicon", None),
    ("format", Some("suffix")),
    ("form", Some("surface")),
    ("skip-ratio", Some("0")),
    ("p-start", Some("0.3")),
    ("p-stop", Some("0.85")),
    ("cap-per-term", Some("10")),
    ("max-freq", Some("50")),
    ("policy", Some("reference")),
    ("beam", Some("8")),
    ("max-len", Some("100")),
    ("shuffle-check", Some("false")),
    ("out", None),
    ("sampler", Some("random")),
    ("kind", None),
    ("constraints", None),
    ("testset", None),
    ("hyps", None),
    ("train-src", None),
    ("train-src-lemmas", None),
    ("corpus-format", Some("moses")),
    ("lemma-format", Some("conllu")),
    ("analyzer", Some("identity")),
    ("src-analyzer", Some("identity")),
    ("lemma-table", None),
    ("src-lemma-table", None),
    ("stem-rules", None),
    ("lm", None),
    ("order", Some("3")),
    ("discount", Some("0.75")),
    ("scorer-cmd", None),
    ("scorer-vocab", None),
];

/// Resolved settings: defaults, then the config file's general and
/// `[common]` sections, then the subcommand section, then flags.
#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn check_key(key: &str, origin: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::config(format!("{origin}: unknown key `{key}`")))
    }
}

impl Settings {
    pub fn resolve(subcommand: &str, file: Option<&Path>, flags: BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = KEYS
            .iter()
            .filter_map(|(k, d)| d.map(|d| (k.to_string(), d.to_string())))
            .collect();
        let mut file_values = BTreeMap::new();
        if let Some(path) = file {
            let ini = Ini::load_from_file(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let origin = path.display().to_string();
            let mut common = BTreeMap::new();
            let mut own = BTreeMap::new();
            for (section, props) in ini.iter() {
                let target = match section {
                    None | Some("common") => &mut common,
                    Some(s) if s == subcommand => &mut own,
                    Some(s) if SUBCOMMANDS.contains(&s) => continue,
                    Some(s) => return Err(CliError::config(format!("{origin}: unknown section [{s}]"))),
                };
                for (k, v) in props.iter() {
                    check_key(k, &origin)?;
                    target.insert(k.to_string(), v.to_string());
                }
            }
            file_values.extend(common);
            file_values.extend(own);
            // Relative paths in the file are relative to the file.
            if let Some(dir) = path.parent() {
                for (k, v) in file_values.iter_mut() {
                    if PATH_KEYS.contains(&k.as_str()) && Path::new(v.as_str()).is_relative() {
                        *v = dir.join(v.as_str()).display().to_string();
                    }
                }
            }
        }
        values.extend(file_values);
        let mut settings = Settings { values };
        for (k, v) in flags {
            check_key(&k, "command line")?;
            settings.values.insert(k, v);
        }
        Ok(settings)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(KEYS.iter().any(|(k, _)| *k == key), "unregistered key {key}");
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn require(&self, key: &str, why: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::config(format!("`{key}` is required {why}")))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str, why: &str) -> Result<PathBuf, CliError> {
        self.require(key, why).map(PathBuf::from)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.parse(key)?
            .ok_or_else(|| CliError::config(format!("`{key}` has no value")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            None | Some("false") | Some("0") | Some("no") => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some(v) => Err(CliError::config(format!("`{key}`: expected a boolean, got `{v}`"))),
        }
    }

    /// One of `choices`, as given.
    pub fn choice<'a>(&'a self, key: &str, choices: &[&str]) -> Result<&'a str, CliError> {
        let v = self.require(key, "")?;
        if choices.contains(&v) {
            Ok(v)
        } else {
            Err(CliError::config(format!("`{key}`: expected one of {}, got `{v}`", choices.join("|"))))
        }
    }

    pub fn seed(&self, why: &str) -> Result<u64, CliError> {
        self.parse("seed")?
            .ok_or_else(|| CliError::config(format!("`seed` is required {why}")))
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

const PATH_KEYS: &[&str] = &[
    "src",
    "tgt",
    "src-lemmas",
    "tgt-lemmas",
    "lexicon",
    "out",
    "constraints",
    "testset",
    "hyps",
    "train-src",
    "train-src-lemmas",
    "lemma-table",
    "src-lemma-table",
    "stem-rules",
    "lm",
    "scorer-vocab",
];
