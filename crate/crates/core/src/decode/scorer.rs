use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub type TokenId = u32;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Token inventory. Ids 0, 1 and 2 are `<s>`, `</s>` and `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let mut v = Vocab::new();
        for t in tokens {
            v.add(&t);
        }
        v
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocab {
    pub const BOS_ID: TokenId = 0;
    pub const EOS_ID: TokenId = 1;
    pub const UNK_ID: TokenId = 2;

    pub fn new() -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in [BOS, EOS, UNK] {
            v.add(t);
        }
        v
    }

    /// Id of `token`, adding it if new.
    pub fn add(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(Self::UNK_ID)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_special(id: TokenId) -> bool {
        id <= Self::UNK_ID
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().map(|&i| self.token(i)).collect::<Vec<_>>().join(" ")
    }
}

/// Next-token model. `score_next` returns one log-probability per vocabulary
/// id, summing to one in probability space; `<s>` is never predicted.
pub trait Scorer: Sync {
    fn vocab(&self) -> &Vocab;

    /// `prefix` holds the generated tokens, without `<s>`.
    fn score_next(&self, prefix: &[TokenId]) -> Vec<f64>;

    /// Prefixes with equal keys have equal futures and may be recombined.
    fn state_key(&self, _prefix: &[TokenId]) -> Option<Vec<TokenId>> {
        None
    }

    fn vocab_size(&self) -> usize {
        self.vocab().len()
    }

    fn bos(&self) -> TokenId {
        Vocab::BOS_ID
    }

    fn eos(&self) -> TokenId {
        Vocab::EOS_ID
    }
}
