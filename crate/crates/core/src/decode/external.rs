//! Scorer backed by a child process speaking line-delimited JSON:
//! request `{"prefix":[ids]}`, response `{"logprobs":{"id":lp,...}}`.
//! Ids missing from a response get probability zero.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::scorer::{Scorer, TokenId, Vocab};
use super::DecodeError;

#[derive(Serialize)]
struct Request<'a> {
    prefix: &'a [TokenId],
}

#[derive(Deserialize)]
struct Response {
    logprobs: HashMap<String, f64>,
}

struct Channel {
    child: Child,
    input: BufWriter<ChildStdin>,
    output: BufReader<ChildStdout>,
}

pub struct ExternalScorer {
    vocab: Vocab,
    channel: Mutex<Channel>,
}

impl ExternalScorer {
    /// Starts `program args...`; `vocab` must list the ids the process uses.
    pub fn spawn(program: &str, args: &[String], vocab: Vocab) -> Result<Self, DecodeError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| DecodeError::io(program, e))?;
        let input = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let output = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalScorer {
            vocab,
            channel: Mutex::new(Channel { child, input, output }),
        })
    }

    fn query(&self, prefix: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        let mut ch = self.channel.lock().unwrap_or_else(|e| e.into_inner());
        serde_json::to_writer(&mut ch.input, &Request { prefix })?;
        ch.input.write_all(b"\n").map_err(|e| DecodeError::io("scorer stdin", e))?;
        ch.input.flush().map_err(|e| DecodeError::io("scorer stdin", e))?;
        let mut line = String::new();
        if ch.output.read_line(&mut line).map_err(|e| DecodeError::io("scorer stdout", e))? == 0 {
            return Err(DecodeError::Protocol("scorer closed its output".into()));
        }
        let resp: Response = serde_json::from_str(&line)?;
        let mut scores = vec![f64::NEG_INFINITY; self.vocab.len()];
        for (id, lp) in resp.logprobs {
            let i: usize = id.parse().map_err(|_| DecodeError::Protocol(format!("bad token id `{id}`")))?;
            if i >= scores.len() || lp > 0.0 || lp.is_nan() {
                return Err(DecodeError::Protocol(format!("bad entry {id}: {lp}")));
            }
            scores[i] = lp;
        }
        Ok(scores)
    }
}

impl Scorer for ExternalScorer {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Protocol failures are fatal: the search has no way to recover.
    fn score_next(&self, prefix: &[TokenId]) -> Vec<f64> {
        self.query(prefix).unwrap_or_else(|e| panic!("external scorer: {e}"))
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        let ch = self.channel.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = ch.child.kill();
        let _ = ch.child.wait();
    }
}
