#![allow(dead_code)]

/// ChaCha with 8 rounds, 64-bit block counter and 64-bit stream id.
/// Key: seed (LE) in bytes 0..8, domain (LE) in bytes 8..16, zeros after.
pub fn chacha8_u64s(seed: u64, domain: u64, stream: u64, n: usize) -> Vec<u64> {
    let mut key = [0u32; 8];
    key[0] = seed as u32;
    key[1] = (seed >> 32) as u32;
    key[2] = domain as u32;
    key[3] = (domain >> 32) as u32;
    let mut words = Vec::new();
    let mut counter = 0u64;
    while words.len() < 2 * n {
        let mut init = [0u32; 16];
        init[..4].copy_from_slice(&[0x6170_7865, 0x3320_646e, 0x7962_2d32, 0x6b20_6574]);
        init[4..12].copy_from_slice(&key);
        init[12] = counter as u32;
        init[13] = (counter >> 32) as u32;
        init[14] = stream as u32;
        init[15] = (stream >> 32) as u32;
        let mut x = init;
        for _ in 0..4 {
            qr(&mut x, 0, 4, 8, 12);
            qr(&mut x, 1, 5, 9, 13);
            qr(&mut x, 2, 6, 10, 14);
            qr(&mut x, 3, 7, 11, 15);
            qr(&mut x, 0, 5, 10, 15);
            qr(&mut x, 1, 6, 11, 12);
            qr(&mut x, 2, 7, 8, 13);
            qr(&mut x, 3, 4, 9, 14);
        }
        for i in 0..16 {
            words.push(x[i].wrapping_add(init[i]));
        }
        counter += 1;
    }
    words.chunks(2).take(n).map(|w| w[0] as u64 | (w[1] as u64) << 32).collect()
}

fn qr(x: &mut [u32; 16], a: usize, b: usize, c: usize, d: usize) {
    x[a] = x[a].wrapping_add(x[b]);
    x[d] = (x[d] ^ x[a]).rotate_left(16);
    x[c] = x[c].wrapping_add(x[d]);
    x[b] = (x[b] ^ x[c]).rotate_left(12);
    x[a] = x[a].wrapping_add(x[b]);
    x[d] = (x[d] ^ x[a]).rotate_left(8);
    x[c] = x[c].wrapping_add(x[d]);
    x[b] = (x[b] ^ x[c]).rotate_left(7);
}

use lemmacon_core::decode::{Scorer, TokenId, Vocab};
use lemmacon_core::draws::{Domain, DrawStream};
use lemmacon_core::lexicon::Span;

/// Random first-order model over `words` plus `</s>`; `<unk>` is never predicted.
pub struct TableScorer {
    vocab: Vocab,
    /// Log-probabilities indexed by previous token id.
    table: Vec<Vec<f64>>,
}

impl TableScorer {
    pub fn random(seed: u64, n_words: usize) -> Self {
        let mut vocab = Vocab::new();
        for w in ["a", "b", "c", "d", "e", "f"].iter().take(n_words) {
            vocab.add(w);
        }
        let v = vocab.len();
        let mut draws = DrawStream::new(seed, Domain::Sampler, 77);
        let table = (0..v)
            .map(|_| {
                let mut w: Vec<f64> = (0..v).map(|_| draws.uniform() + 0.05).collect();
                w[Vocab::BOS_ID as usize] = 0.0;
                w[Vocab::UNK_ID as usize] = 0.0;
                let z: f64 = w.iter().sum();
                w.iter().map(|x| (x / z).ln()).collect()
            })
            .collect();
        TableScorer { vocab, table }
    }

    pub fn word_ids(&self) -> Vec<TokenId> {
        (Vocab::UNK_ID + 1..self.vocab.len() as TokenId).collect()
    }
}

impl Scorer for TableScorer {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn score_next(&self, prefix: &[TokenId]) -> Vec<f64> {
        self.table[*prefix.last().unwrap_or(&Vocab::BOS_ID) as usize].clone()
    }

    fn state_key(&self, prefix: &[TokenId]) -> Option<Vec<TokenId>> {
        Some(vec![*prefix.last().unwrap_or(&Vocab::BOS_ID)])
    }
}

/// Disjoint-occurrence containment by backtracking.
pub fn contains_disjoint(seq: &[TokenId], constraints: &[Vec<TokenId>]) -> bool {
    fn go(seq: &[TokenId], cons: &[Vec<TokenId>], used: &mut Vec<Span>) -> bool {
        let Some((first, rest)) = cons.split_first() else {
            return true;
        };
        if first.len() > seq.len() {
            return false;
        }
        for s in 0..=seq.len() - first.len() {
            let span = Span::new(s, s + first.len());
            if seq[s..span.end] == first[..] && !used.iter().any(|u| u.overlaps(&span)) {
                used.push(span);
                if go(seq, rest, used) {
                    return true;
                }
                used.pop();
            }
        }
        false
    }
    go(seq, constraints, &mut Vec::new())
}

/// Best sequence of at most `max_len` tokens containing the constraints,
/// ties to the lexicographically smaller sequence.
pub fn exhaustive(scorer: &dyn Scorer, constraints: &[Vec<TokenId>], max_len: usize) -> Option<(Vec<TokenId>, f64)> {
    let words: Vec<TokenId> = (0..scorer.vocab_size() as TokenId)
        .filter(|&t| t != Vocab::BOS_ID && t != Vocab::EOS_ID)
        .collect();
    let mut best: Option<(Vec<TokenId>, f64)> = None;
    let mut stack: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    while let Some((seq, lp)) = stack.pop() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let scores = scorer.score_next(&seq);
        if contains_disjoint(&seq, constraints) {
            let total = lp + scores[Vocab::EOS_ID as usize];
            let better = match &best {
                None => true,
                Some((b, blp)) => total > *blp || (total == *blp && seq < *b),
            };
            if better && total > f64::NEG_INFINITY {
                best = Some((seq.clone(), total));
            }
        }
        if seq.len() < max_len {
            for &w in &words {
                let mut next = seq.clone();
                next.push(w);
                stack.push((next, lp + scores[w as usize]));
            }
        }
    }
    best
}

/// Random decoder instance: 2 or 3 words plus `</s>`, up to two constraints
/// of one or two tokens, and a length limit of at most 6 that leaves room
/// for the constraints plus two tokens.
pub fn toy_instance(seed: u64) -> (TableScorer, Vec<Vec<TokenId>>, usize) {
    let mut d = DrawStream::new(seed, Domain::Sampler, 5);
    let scorer = TableScorer::random(seed, 2 + d.below(2));
    let words = scorer.word_ids();
    let constraints: Vec<Vec<TokenId>> = (0..d.below(3))
        .map(|_| (0..1 + d.below(2)).map(|_| words[d.below(words.len())]).collect())
        .collect();
    let total: usize = constraints.iter().map(Vec::len).sum();
    let max_len = (total + 2).max(2 + d.below(5)).min(6);
    (scorer, constraints, max_len)
}
