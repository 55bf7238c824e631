//! Beam search, plain and lexically constrained.
//!
//! Constraint progress is tracked by a trie over the distinct constraint
//! sequences. A hypothesis carries the set of reachable `(remaining, node)`
//! pairs, so every hypothesis is one token sequence and may finish exactly
//! when that sequence holds all constraints at pairwise disjoint positions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use super::scorer::{Scorer, TokenId, Vocab};
use super::DecodeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub beam: usize,
    pub max_len: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { beam: 8, max_len: 100 }
    }
}

#[derive(Debug, Default)]
struct Trie {
    children: Vec<HashMap<TokenId, usize>>,
    /// Distinct constraint ending at the node.
    terminal: Vec<Option<usize>>,
    /// Constraints ending strictly below the node.
    below: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl Trie {
    fn new() -> Self {
        let mut t = Trie::default();
        t.push_node();
        t
    }

    fn push_node(&mut self) -> usize {
        self.children.push(HashMap::new());
        self.terminal.push(None);
        self.below.push(Vec::new());
        self.depth.push(0);
        self.children.len() - 1
    }

    fn insert(&mut self, seq: &[TokenId], id: usize) {
        let mut node = 0;
        for &t in seq {
            self.below[node].push(id);
            node = match self.children[node].get(&t) {
                Some(&n) => n,
                None => {
                    let n = self.push_node();
                    self.depth[n] = self.depth[node] + 1;
                    self.children[node].insert(t, n);
                    n
                }
            };
        }
        self.terminal[node] = Some(id);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct NfaState {
    remaining: Vec<u32>,
    /// Trie node of a partial match; 0 when none is in progress.
    node: usize,
}

/// Set of reachable constraint states of one hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConstraintState {
    states: Vec<NfaState>,
}

/// Tracks a multiset of constraint token sequences.
#[derive(Debug)]
pub struct ConstraintTracker {
    trie: Trie,
    lens: Vec<usize>,
    counts: Vec<u32>,
    total_tokens: usize,
}

impl ConstraintTracker {
    pub fn new(constraints: &[Vec<TokenId>]) -> Self {
        let mut trie = Trie::new();
        let mut distinct: Vec<&Vec<TokenId>> = Vec::new();
        let mut counts: Vec<u32> = Vec::new();
        for c in constraints.iter().filter(|c| !c.is_empty()) {
            match distinct.iter().position(|d| *d == c) {
                Some(i) => counts[i] += 1,
                None => {
                    trie.insert(c, distinct.len());
                    distinct.push(c);
                    counts.push(1);
                }
            }
        }
        let lens: Vec<usize> = distinct.iter().map(|c| c.len()).collect();
        let total_tokens = lens.iter().zip(&counts).map(|(l, c)| l * *c as usize).sum();
        ConstraintTracker {
            trie,
            lens,
            counts,
            total_tokens,
        }
    }

    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    pub fn start(&self) -> ConstraintState {
        ConstraintState {
            states: vec![NfaState {
                remaining: self.counts.clone(),
                node: 0,
            }],
        }
    }

    fn met_in(&self, s: &NfaState) -> usize {
        self.lens
            .iter()
            .zip(&self.counts)
            .zip(&s.remaining)
            .map(|((l, c), r)| l * (c - r) as usize)
            .sum()
    }

    /// Tokens of completed constraints, maximized over the reachable states.
    pub fn tokens_met(&self, cs: &ConstraintState) -> usize {
        cs.states.iter().map(|s| self.met_in(s)).max().unwrap_or(0)
    }

    pub fn satisfied(&self, cs: &ConstraintState) -> bool {
        cs.states.iter().any(|s| s.remaining.iter().all(|&r| r == 0))
    }

    fn viable(&self, remaining: &[u32], node: usize) -> bool {
        self.trie.below[node].iter().any(|&j| remaining[j] > 0)
    }

    fn enter(&self, remaining: &[u32], node: usize, out: &mut Vec<NfaState>) {
        if let Some(j) = self.trie.terminal[node] {
            if remaining[j] > 0 {
                let mut r = remaining.to_vec();
                r[j] -= 1;
                out.push(NfaState { remaining: r, node: 0 });
            }
        }
        if self.viable(remaining, node) {
            out.push(NfaState {
                remaining: remaining.to_vec(),
                node,
            });
        }
    }

    pub fn step(&self, cs: &ConstraintState, token: TokenId) -> ConstraintState {
        let mut out = Vec::new();
        for s in &cs.states {
            // the token is not part of any match
            out.push(NfaState {
                remaining: s.remaining.clone(),
                node: 0,
            });
            if let Some(&n) = self.trie.children[0].get(&token) {
                self.enter(&s.remaining, n, &mut out);
            }
            if s.node != 0 {
                if let Some(&n) = self.trie.children[s.node].get(&token) {
                    self.enter(&s.remaining, n, &mut out);
                }
            }
        }
        out.sort();
        out.dedup();
        ConstraintState { states: out }
    }

    /// Lower bound on the tokens still needed before every constraint is met.
    pub fn tokens_needed(&self, cs: &ConstraintState) -> usize {
        cs.states
            .iter()
            .map(|s| {
                let left: usize = self.lens.iter().zip(&s.remaining).map(|(l, r)| l * *r as usize).sum();
                left - self.trie.depth[s.node].min(left)
            })
            .min()
            .unwrap_or(0)
    }

    /// True when every continuation that satisfies `b` also satisfies `a`:
    /// each state of `b` has a state of `a` at the same trie node with no
    /// more remaining constraints.
    pub fn dominates(&self, a: &ConstraintState, b: &ConstraintState) -> bool {
        b.states.iter().all(|sb| {
            a.states
                .iter()
                .any(|sa| sa.node == sb.node && sa.remaining.iter().zip(&sb.remaining).all(|(x, y)| x <= y))
        })
    }

    /// Tokens that extend some partial or fresh match.
    pub fn advancing_tokens(&self, cs: &ConstraintState) -> Vec<TokenId> {
        let mut toks: Vec<TokenId> = Vec::new();
        for s in &cs.states {
            for node in [0, s.node] {
                for (&t, &n) in &self.trie.children[node] {
                    let completes = self.trie.terminal[n].is_some_and(|j| s.remaining[j] > 0);
                    if completes || self.viable(&s.remaining, n) {
                        toks.push(t);
                    }
                }
            }
        }
        toks.sort_unstable();
        toks.dedup();
        toks
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Generated tokens, without `<s>` and `</s>`.
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
    pub cstate: ConstraintState,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
    pub finished: bool,
    /// False when no hypothesis met every constraint within the length limit.
    pub satisfied: bool,
}

/// Higher log-probability first, then lexicographically smaller tokens.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.logprob.total_cmp(&a.logprob).then_with(|| a.tokens.cmp(&b.tokens))
}

fn top_tokens(scores: &[f64], k: usize) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = (0..scores.len() as TokenId)
        .filter(|&t| !Vocab::is_special(t) || t == Vocab::UNK_ID)
        .filter(|&t| scores[t as usize] > f64::NEG_INFINITY)
        .collect();
    ids.sort_by(|&a, &b| scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

fn keep_better(slot: &mut Hypothesis, cand: Hypothesis) {
    if rank(&cand, slot) == Ordering::Less {
        *slot = cand;
    }
}

/// Slots per bank: an even split, remainders and unused slots to higher banks first.
fn allocate(sizes: &[(usize, usize)], k: usize) -> Vec<usize> {
    let nb = sizes.len();
    if nb == 0 {
        return Vec::new();
    }
    // `sizes` is ordered from the highest bank down
    let mut alloc: Vec<usize> = (0..nb).map(|i| k / nb + usize::from(i < k % nb)).collect();
    let mut spare = 0;
    for (a, &(_, size)) in alloc.iter_mut().zip(sizes) {
        if *a > size {
            spare += *a - size;
            *a = size;
        }
    }
    for (a, &(_, size)) in alloc.iter_mut().zip(sizes) {
        let extra = spare.min(size - *a);
        *a += extra;
        spare -= extra;
    }
    alloc
}

fn check_constraints(scorer: &dyn Scorer, constraints: &[Vec<TokenId>]) -> Result<(), DecodeError> {
    let v = scorer.vocab_size();
    for &t in constraints.iter().flatten() {
        if t as usize >= v || (Vocab::is_special(t) && t != Vocab::UNK_ID) {
            return Err(DecodeError::ConstraintTokenOutOfVocab(format!("#{t}")));
        }
    }
    Ok(())
}

/// Drops hypotheses that another candidate with the same scorer state beats
/// on every continuation.
fn prune_dominated(tracker: &ConstraintTracker, scorer: &dyn Scorer, mut cands: Vec<Hypothesis>) -> Vec<Hypothesis> {
    cands.sort_by(rank);
    let keys: Vec<Vec<TokenId>> = cands
        .iter()
        .map(|h| scorer.state_key(&h.tokens).unwrap_or_else(|| h.tokens.clone()))
        .collect();
    let mut kept: Vec<usize> = Vec::with_capacity(cands.len());
    for i in 0..cands.len() {
        let h = &cands[i];
        let dominated = kept.iter().any(|&j| {
            let g = &cands[j];
            keys[j] == keys[i]
                && (g.logprob > h.logprob || (g.logprob == h.logprob && g.tokens.len() == h.tokens.len()))
                && tracker.dominates(&g.cstate, &h.cstate)
        });
        if !dominated {
            kept.push(i);
        }
    }
    let mut keep = vec![false; cands.len()];
    for i in kept {
        keep[i] = true;
    }
    cands.into_iter().zip(keep).filter(|(_, k)| *k).map(|(h, _)| h).collect()
}

/// Beam search with dynamic bank allocation over completed constraint tokens.
pub fn constrained_beam_search(
    scorer: &dyn Scorer,
    constraints: &[Vec<TokenId>],
    cfg: SearchConfig,
) -> Result<DecodeResult, DecodeError> {
    if cfg.beam == 0 {
        return Err(DecodeError::InvalidBeam);
    }
    check_constraints(scorer, constraints)?;
    let tracker = ConstraintTracker::new(constraints);
    let eos = scorer.eos();
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        logprob: 0.0,
        cstate: tracker.start(),
        finished: false,
    }];
    let mut best: Option<Hypothesis> = None;
    let mut best_partial: Option<(usize, Hypothesis)> = None;
    while !live.is_empty() {
        let mut cands: HashMap<(Vec<TokenId>, ConstraintState), Hypothesis> = HashMap::new();
        for h in &live {
            let scores = scorer.score_next(&h.tokens);
            if tracker.satisfied(&h.cstate) && scores[eos as usize] > f64::NEG_INFINITY {
                let fin = Hypothesis {
                    tokens: h.tokens.clone(),
                    logprob: h.logprob + scores[eos as usize],
                    cstate: h.cstate.clone(),
                    finished: true,
                };
                match &mut best {
                    Some(b) => keep_better(b, fin),
                    None => best = Some(fin),
                }
            }
            if h.tokens.len() >= cfg.max_len {
                continue;
            }
            let mut next = top_tokens(&scores, cfg.beam);
            next.extend(tracker.advancing_tokens(&h.cstate));
            next.sort_unstable();
            next.dedup();
            for t in next {
                let s = scores[t as usize];
                if s == f64::NEG_INFINITY {
                    continue;
                }
                let mut tokens = h.tokens.clone();
                tokens.push(t);
                let key = scorer.state_key(&tokens).unwrap_or_else(|| tokens.clone());
                let cand = Hypothesis {
                    cstate: tracker.step(&h.cstate, t),
                    tokens,
                    logprob: h.logprob + s,
                    finished: false,
                };
                match cands.entry((key, cand.cstate.clone())) {
                    std::collections::hash_map::Entry::Occupied(mut e) => keep_better(e.get_mut(), cand),
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(cand);
                    }
                }
            }
        }
        for h in &live {
            let met = tracker.tokens_met(&h.cstate);
            let better = match &best_partial {
                None => true,
                Some((m, b)) => met > *m || (met == *m && rank(h, b) == Ordering::Less),
            };
            if better {
                best_partial = Some((met, h.clone()));
            }
        }
        let floor = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.logprob);
        // a hypothesis that cannot fit its remaining constraints is dead
        let fits = |c: &Hypothesis| c.tokens.len() + tracker.tokens_needed(&c.cstate) <= cfg.max_len;
        let cands = prune_dominated(
            &tracker,
            scorer,
            cands.into_values().filter(|c| c.logprob >= floor && fits(c)).collect(),
        );
        let mut banks: BTreeMap<usize, Vec<Hypothesis>> = BTreeMap::new();
        for c in cands {
            banks.entry(tracker.tokens_met(&c.cstate)).or_default().push(c);
        }
        let mut banks: Vec<(usize, Vec<Hypothesis>)> = banks.into_iter().rev().collect();
        let sizes: Vec<(usize, usize)> = banks.iter().map(|(m, v)| (*m, v.len())).collect();
        let alloc = allocate(&sizes, cfg.beam);
        live = Vec::with_capacity(cfg.beam);
        for ((_, mut bank), n) in banks.drain(..).zip(alloc) {
            bank.sort_by(rank);
            bank.truncate(n);
            live.extend(bank);
        }
        live.sort_by(rank);
        log::trace!(
            "live {:?}",
            live.iter().map(|h| (&h.tokens, h.logprob, tracker.tokens_met(&h.cstate))).collect::<Vec<_>>()
        );
    }
    Ok(match best {
        Some(b) => DecodeResult {
            tokens: b.tokens,
            logprob: b.logprob,
            finished: true,
            satisfied: true,
        },
        None => {
            let (_, h) = best_partial.expect("the empty hypothesis is always live");
            DecodeResult {
                tokens: h.tokens,
                logprob: h.logprob,
                finished: false,
                satisfied: false,
            }
        }
    })
}

/// Standard beam search: the `beam` best continuations overall survive each step.
pub fn beam_search(scorer: &dyn Scorer, cfg: SearchConfig) -> Result<DecodeResult, DecodeError> {
    if cfg.beam == 0 {
        return Err(DecodeError::InvalidBeam);
    }
    let eos = scorer.eos() as usize;
    let mut live: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    let mut best: Option<(Vec<TokenId>, f64)> = None;
    let better = |a: &(Vec<TokenId>, f64), b: &(Vec<TokenId>, f64)| {
        a.1.total_cmp(&b.1).reverse().then_with(|| a.0.cmp(&b.0)) == Ordering::Less
    };
    while !live.is_empty() {
        let mut cands: HashMap<Vec<TokenId>, (Vec<TokenId>, f64)> = HashMap::new();
        for (tokens, lp) in &live {
            let scores = scorer.score_next(tokens);
            if scores[eos] > f64::NEG_INFINITY {
                let fin = (tokens.clone(), lp + scores[eos]);
                if best.as_ref().is_none_or(|b| better(&fin, b)) {
                    best = Some(fin);
                }
            }
            if tokens.len() >= cfg.max_len {
                continue;
            }
            for t in top_tokens(&scores, cfg.beam) {
                let mut next = tokens.clone();
                next.push(t);
                let key = scorer.state_key(&next).unwrap_or_else(|| next.clone());
                let cand = (next, lp + scores[t as usize]);
                match cands.get(&key) {
                    Some(old) if !better(&cand, old) => {}
                    _ => {
                        cands.insert(key, cand);
                    }
                }
            }
        }
        let floor = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1);
        live = cands.into_values().filter(|c| c.1 >= floor).collect();
        live.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        live.truncate(cfg.beam);
    }
    let (tokens, logprob) = best.unwrap_or_default();
    Ok(DecodeResult {
        tokens,
        logprob,
        finished: true,
        satisfied: true,
    })
}

/// True when `seq` holds every constraint at pairwise disjoint positions.
pub fn contains_all(seq: &[TokenId], constraints: &[Vec<TokenId>]) -> bool {
    let tracker = ConstraintTracker::new(constraints);
    let cs = seq.iter().fold(tracker.start(), |cs, &t| tracker.step(&cs, t));
    tracker.satisfied(&cs)
}
