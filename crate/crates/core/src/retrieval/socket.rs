//! External scorer over a local TCP socket.
//!
//! Newline-delimited JSON. Each request is
//! `{"query": str, "cues": {"category_hint": str|null, "modifiers": [str], "negations": [str]}, "prefix_tokens": [str]}`
//! and each response is a JSON object mapping tokens to log-probabilities.
//! Tokens missing from the response have probability zero.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{QueryCues, RetrievalError, SequenceScorer, TokenDistribution};

#[derive(Serialize, Deserialize)]
struct Request {
    query: String,
    cues: QueryCues,
    prefix_tokens: Vec<String>,
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

/// Client side; keeps one connection open and reconnects once on failure.
pub struct SocketScorer {
    addr: SocketAddr,
    timeout: Duration,
    conn: Mutex<Option<Connection>>,
}

impl SocketScorer {
    pub fn new(addr: SocketAddr, timeout: Duration) -> Self {
        SocketScorer {
            addr,
            timeout,
            conn: Mutex::new(None),
        }
    }

    fn connect(&self) -> Result<Connection, RetrievalError> {
        let io = |e: std::io::Error| RetrievalError::Scorer(format!("{}: {e}", self.addr));
        let stream = TcpStream::connect_timeout(&self.addr, self.timeout).map_err(io)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(io)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(io)?;
        Ok(Connection {
            reader: BufReader::new(stream.try_clone().map_err(io)?),
            writer: stream,
        })
    }

    fn exchange(conn: &mut Connection, line: &str) -> std::io::Result<String> {
        conn.writer.write_all(line.as_bytes())?;
        conn.writer.flush()?;
        let mut response = String::new();
        if conn.reader.read_line(&mut response)? == 0 {
            return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "connection closed"));
        }
        Ok(response)
    }
}

impl SequenceScorer for SocketScorer {
    fn score(&self, query: &str, cues: &QueryCues, prefix: &[String]) -> Result<TokenDistribution, RetrievalError> {
        let mut line = serde_json::to_string(&Request {
            query: query.to_string(),
            cues: cues.clone(),
            prefix_tokens: prefix.to_vec(),
        })
        .map_err(|e| RetrievalError::Scorer(e.to_string()))?;
        line.push('\n');
        let mut guard = self.conn.lock().map_err(|_| RetrievalError::Scorer("poisoned connection".into()))?;
        let mut response = None;
        for _ in 0..2 {
            if guard.is_none() {
                *guard = Some(self.connect()?);
            }
            let conn = guard.as_mut().expect("connection just set");
            match Self::exchange(conn, &line) {
                Ok(r) => {
                    response = Some(r);
                    break;
                }
                Err(_) => *guard = None,
            }
        }
        let response = response.ok_or_else(|| RetrievalError::Scorer(format!("{}: no response", self.addr)))?;
        let logprobs: BTreeMap<String, f64> = serde_json::from_str(&response)
            .map_err(|e| RetrievalError::Scorer(format!("bad response: {e}")))?;
        TokenDistribution::from_logprobs(logprobs)
    }
}

/// Serves requests on one accepted connection until the peer closes it.
pub fn serve_scorer_connection(stream: TcpStream, scorer: &dyn SequenceScorer) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Ok(req) => match scorer.score(&req.query, &req.cues, &req.prefix_tokens) {
                Ok(dist) => {
                    let logprobs: BTreeMap<&str, f64> = dist.iter().filter(|(_, p)| *p > 0.0).map(|(t, p)| (t, p.ln())).collect();
                    serde_json::to_string(&logprobs).expect("map serializes")
                }
                Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
            },
            Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
        };
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
