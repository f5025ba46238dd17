//! Line-delimited JSON protocol to an external model server.
//!
//! One JSON object per line. The client opens with
//! `{"type":"hello","vocab_size":V,"tokenizer_id":"..."}` and the server
//! answers with its own hello. Then, per step:
//!
//! ```text
//! -> {"type":"next","id":7,"prefix":[1,2,3],"top":50}
//! <- {"type":"logprobs","id":7,"dense":[-1.2,null,...]}
//! <- {"type":"logprobs","id":7,"sparse":[[12,-0.3],[40,-1.9]]}
//! <- {"type":"error","id":7,"message":"..."}
//! ```
//!
//! `null` in a dense vector and ids missing from a sparse one mean negative
//! infinity. `top` is optional; without it the server picks the form.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::LanguageModel;
use crate::error::{Error, Result};
use crate::tokenizer::{TokenId, TokenizerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        vocab_size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tokenizer_id: Option<String>,
    },
    Next {
        id: u64,
        prefix: Vec<TokenId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        top: Option<usize>,
    },
    Logprobs {
        id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dense: Option<Vec<Option<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sparse: Option<Vec<(TokenId, f64)>>,
    },
    Error {
        #[serde(default)]
        id: Option<u64>,
        message: String,
    },
}

fn transport(e: std::io::Error) -> Error {
    Error::Protocol(format!("transport: {e}"))
}

fn send(w: &mut impl Write, msg: &Message) -> Result<()> {
    let mut line = serde_json::to_vec(msg).expect("messages always serialize");
    line.push(b'\n');
    w.write_all(&line).map_err(transport)?;
    w.flush().map_err(transport)
}

/// `Ok(None)` on a clean end of stream.
fn receive(r: &mut impl BufRead) -> Result<Option<Message>> {
    let mut line = String::new();
    if r.read_line(&mut line).map_err(transport)? == 0 {
        return Ok(None);
    }
    serde_json::from_str(line.trim_end())
        .map(Some)
        .map_err(|e| Error::Protocol(format!("malformed message: {e}")))
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

/// A [`LanguageModel`] answered by a remote server. Calls are serialized
/// over one connection.
pub struct ExternalModel {
    conn: Mutex<Conn>,
    next_id: AtomicU64,
    vocab_size: usize,
    server_tokenizer: Option<String>,
    top: Option<usize>,
    endpoint: String,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("endpoint", &self.endpoint)
            .field("vocab_size", &self.vocab_size)
            .field("top", &self.top)
            .finish()
    }
}

impl ExternalModel {
    /// Ask for the `j` best scores per step instead of dense vectors.
    pub fn with_top(mut self, j: usize) -> Self {
        self.top = Some(j);
        self
    }

    pub fn server_tokenizer(&self) -> Option<&str> {
        self.server_tokenizer.as_deref()
    }
}

/// Connects and performs the handshake. A vocabulary size or tokenizer id
/// that differs from `spec` is an error.
pub fn external_model_connect(endpoint: &str, spec: &TokenizerSpec) -> Result<ExternalModel> {
    let addr = endpoint
        .to_socket_addrs()
        .map_err(|e| Error::Protocol(format!("cannot resolve {endpoint}: {e}")))?
        .next()
        .ok_or_else(|| Error::Protocol(format!("no address for {endpoint}")))?;
    let stream = TcpStream::connect_timeout(&addr, Duration::from_secs(10))
        .map_err(|e| Error::Protocol(format!("cannot connect to {endpoint}: {e}")))?;
    stream.set_nodelay(true).map_err(transport)?;
    let mut writer = stream.try_clone().map_err(transport)?;
    let mut reader = BufReader::new(stream);

    send(
        &mut writer,
        &Message::Hello {
            vocab_size: spec.vocab_size(),
            tokenizer_id: Some(spec.id().to_string()),
        },
    )?;
    let (vocab_size, server_tokenizer) = match receive(&mut reader)? {
        Some(Message::Hello {
            vocab_size,
            tokenizer_id,
        }) => (vocab_size, tokenizer_id),
        Some(Message::Error { message, .. }) => {
            return Err(Error::Protocol(format!("server refused handshake: {message}")))
        }
        Some(other) => return Err(Error::Protocol(format!("expected hello, got {other:?}"))),
        None => return Err(Error::Protocol("server closed during handshake".into())),
    };
    if vocab_size != spec.vocab_size() {
        return Err(Error::Protocol(format!(
            "server vocabulary has {vocab_size} entries, tokenizer has {}",
            spec.vocab_size()
        )));
    }
    if let Some(t) = &server_tokenizer {
        if t != spec.id() {
            return Err(Error::TokenizerMismatch {
                expected: spec.id().to_string(),
                found: t.clone(),
            });
        }
    }
    Ok(ExternalModel {
        conn: Mutex::new(Conn { reader, writer }),
        next_id: AtomicU64::new(1),
        vocab_size,
        server_tokenizer,
        top: None,
        endpoint: endpoint.to_string(),
    })
}

impl LanguageModel for ExternalModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_log_probs(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| Error::Protocol("connection poisoned by an earlier failure".into()))?;
        let Conn { reader, writer } = &mut *conn;
        send(
            writer,
            &Message::Next {
                id,
                prefix: prefix.to_vec(),
                top: self.top,
            },
        )?;
        match receive(reader)? {
            Some(Message::Logprobs { id: got, dense, sparse }) => {
                if got != id {
                    return Err(Error::Protocol(format!("response id {got} for request {id}")));
                }
                to_dense(self.vocab_size, dense, sparse)
            }
            Some(Message::Error { message, .. }) => Err(Error::Model(message)),
            Some(other) => Err(Error::Protocol(format!("unexpected message {other:?}"))),
            None => Err(Error::Protocol("server closed the connection".into())),
        }
    }

    fn model_id(&self) -> String {
        format!("external({})", self.endpoint)
    }
}

fn to_dense(v: usize, dense: Option<Vec<Option<f64>>>, sparse: Option<Vec<(TokenId, f64)>>) -> Result<Vec<f64>> {
    match (dense, sparse) {
        (Some(d), None) => {
            if d.len() != v {
                return Err(Error::Protocol(format!(
                    "dense vector of {} for vocabulary {v}",
                    d.len()
                )));
            }
            Ok(d.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect())
        }
        (None, Some(s)) => {
            let mut out = vec![f64::NEG_INFINITY; v];
            for (t, score) in s {
                let slot = out
                    .get_mut(t as usize)
                    .ok_or(Error::TokenOutOfRange { id: t, vocab_size: v })?;
                *slot = score;
            }
            Ok(out)
        }
        _ => Err(Error::Protocol("logprobs needs exactly one of dense or sparse".into())),
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn answer<M: LanguageModel + ?Sized>(model: &M, id: u64, prefix: &[TokenId], top: Option<usize>) -> Message {
    let scores = match model.next_log_probs(prefix) {
        Ok(s) => s,
        Err(e) => {
            return Message::Error {
                id: Some(id),
                message: e.to_string(),
            }
        }
    };
    match top {
        None => Message::Logprobs {
            id,
            dense: Some(scores.into_iter().map(finite).collect()),
            sparse: None,
        },
        Some(j) => {
            let mut order: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_finite()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            order.truncate(j);
            Message::Logprobs {
                id,
                dense: None,
                sparse: Some(order.into_iter().map(|i| (i as TokenId, scores[i])).collect()),
            }
        }
    }
}

/// Serves one client until it disconnects.
pub fn serve_connection<M: LanguageModel + ?Sized>(
    stream: TcpStream,
    model: &M,
    tokenizer_id: Option<&str>,
) -> Result<()> {
    let mut writer = stream.try_clone().map_err(transport)?;
    let mut reader = BufReader::new(stream);
    let mut greeted = false;
    while let Some(msg) = receive(&mut reader)? {
        let reply = match msg {
            Message::Hello { .. } => {
                greeted = true;
                Message::Hello {
                    vocab_size: model.vocab_size(),
                    tokenizer_id: tokenizer_id.map(str::to_string),
                }
            }
            Message::Next { id, .. } if !greeted => Message::Error {
                id: Some(id),
                message: "hello required first".into(),
            },
            Message::Next { id, prefix, top } => answer(model, id, &prefix, top),
            other => Message::Error {
                id: None,
                message: format!("unexpected message type from client: {other:?}"),
            },
        };
        send(&mut writer, &reply)?;
    }
    Ok(())
}

/// Accepts clients on `listener`, one thread per connection. Returns after
/// `max_connections` clients have disconnected, or never when `None`.
pub fn serve_model<M: LanguageModel + Sync + ?Sized>(
    listener: TcpListener,
    model: &M,
    tokenizer_id: Option<&str>,
    max_connections: Option<usize>,
) -> Result<()> {
    std::thread::scope(|scope| {
        for (n, stream) in listener.incoming().enumerate() {
            if max_connections.is_some_and(|m| n >= m) {
                break;
            }
            let stream = stream.map_err(transport)?;
            scope.spawn(move || {
                if let Err(e) = serve_connection(stream, model, tokenizer_id) {
                    log::warn!("client session ended: {e}");
                }
            });
            if max_connections.is_some_and(|m| n + 1 >= m) {
                break;
            }
        }
        Ok(())
    })
}
