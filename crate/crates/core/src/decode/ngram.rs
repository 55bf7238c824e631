//! Interpolated absolute-discounting n-gram model.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scorer::{Scorer, TokenId, Vocab};
use super::DecodeError;

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: HashMap<TokenId, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramLM {
    order: usize,
    discount: f64,
    vocab: Vocab,
    /// `counts[k]` maps a context of length `k` to its continuation counts.
    counts: Vec<HashMap<Vec<TokenId>, ContextCounts>>,
}

/// A context with its `(token, count)` continuations.
type ContextRow = (Vec<TokenId>, Vec<(TokenId, u64)>);

#[derive(Serialize, Deserialize)]
struct NGramFile {
    order: usize,
    discount: f64,
    vocab: Vocab,
    /// Per context length: `[context, [[token, count], ...]]`.
    contexts: Vec<Vec<ContextRow>>,
}

/// Trains on whitespace-tokenized sentences. Every sentence is padded with
/// `order - 1` start symbols and closed with `</s>`.
pub fn train_ngram<S: AsRef<str>>(sentences: &[S], order: usize, discount: f64) -> Result<NGramLM, DecodeError> {
    if order == 0 {
        return Err(DecodeError::InvalidOrder(order));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(DecodeError::InvalidDiscount(discount));
    }
    let tokenized: Vec<Vec<&str>> = sentences.iter().map(|s| s.as_ref().split_whitespace().collect()).collect();
    if tokenized.is_empty() {
        return Err(DecodeError::EmptyCorpus);
    }
    let mut words: Vec<&str> = tokenized.iter().flatten().copied().collect();
    words.sort_unstable();
    words.dedup();
    let mut vocab = Vocab::new();
    for w in words {
        vocab.add(w);
    }
    let mut counts: Vec<HashMap<Vec<TokenId>, ContextCounts>> = vec![HashMap::new(); order];
    for sent in &tokenized {
        let mut seq = vec![Vocab::BOS_ID; order - 1];
        seq.extend(sent.iter().map(|t| vocab.id_or_unk(t)));
        seq.push(Vocab::EOS_ID);
        for i in order - 1..seq.len() {
            for (k, table) in counts.iter_mut().enumerate() {
                let cc = table.entry(seq[i - k..i].to_vec()).or_default();
                cc.total += 1;
                *cc.next.entry(seq[i]).or_default() += 1;
            }
        }
    }
    Ok(NGramLM {
        order,
        discount,
        vocab,
        counts,
    })
}

impl NGramLM {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Adds tokens without counts; they receive backoff mass only.
    pub fn extend_vocab<S: AsRef<str>>(&mut self, tokens: &[S]) -> usize {
        let before = self.vocab.len();
        for t in tokens {
            self.vocab.add(t.as_ref());
        }
        self.vocab.len() - before
    }

    /// Probabilities (not logs) of every id after `prefix`.
    pub fn probs(&self, prefix: &[TokenId]) -> Vec<f64> {
        let v = self.vocab.len();
        let mut p = vec![1.0 / (v - 1) as f64; v];
        p[Vocab::BOS_ID as usize] = 0.0;
        let mut history = vec![Vocab::BOS_ID; self.order - 1];
        history.extend_from_slice(prefix);
        for (k, table) in self.counts.iter().enumerate() {
            let Some(cc) = table.get(&history[history.len() - k..]) else {
                continue;
            };
            let total = cc.total as f64;
            let backoff = self.discount * cc.next.len() as f64 / total;
            for x in p.iter_mut() {
                *x *= backoff;
            }
            for (&w, &c) in &cc.next {
                p[w as usize] += (c as f64 - self.discount) / total;
            }
        }
        p
    }

    pub fn save(&self, path: &Path) -> Result<(), DecodeError> {
        let contexts = self
            .counts
            .iter()
            .map(|table| {
                let mut rows: Vec<ContextRow> = table
                    .iter()
                    .map(|(ctx, cc)| {
                        let mut next: Vec<(TokenId, u64)> = cc.next.iter().map(|(&w, &c)| (w, c)).collect();
                        next.sort_unstable();
                        (ctx.clone(), next)
                    })
                    .collect();
                rows.sort();
                rows
            })
            .collect();
        let file = NGramFile {
            order: self.order,
            discount: self.discount,
            vocab: self.vocab.clone(),
            contexts,
        };
        let out = BufWriter::new(File::create(path).map_err(|e| DecodeError::io(path, e))?);
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DecodeError> {
        let reader = BufReader::new(File::open(path).map_err(|e| DecodeError::io(path, e))?);
        let file: NGramFile = serde_json::from_reader(reader)?;
        if file.order == 0 || file.contexts.len() != file.order {
            return Err(DecodeError::InvalidOrder(file.order));
        }
        let counts = file
            .contexts
            .into_iter()
            .map(|rows| {
                rows.into_iter()
                    .map(|(ctx, next)| {
                        let total = next.iter().map(|(_, c)| c).sum();
                        (ctx, ContextCounts { total, next: next.into_iter().collect() })
                    })
                    .collect()
            })
            .collect();
        Ok(NGramLM {
            order: file.order,
            discount: file.discount,
            vocab: file.vocab,
            counts,
        })
    }
}

impl Scorer for NGramLM {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn score_next(&self, prefix: &[TokenId]) -> Vec<f64> {
        self.probs(prefix).into_iter().map(f64::ln).collect()
    }

    fn state_key(&self, prefix: &[TokenId]) -> Option<Vec<TokenId>> {
        let keep = self.order - 1;
        let mut history = vec![Vocab::BOS_ID; keep];
        history.extend_from_slice(prefix);
        Some(history[history.len() - keep..].to_vec())
    }
}
