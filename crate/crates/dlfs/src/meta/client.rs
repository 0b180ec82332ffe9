//! Wire clients for the metadata service and the task queue.
//!
//! Each request opens a fresh connection; request/response pairs are
//! independent, so this keeps the clients stateless at the cost of a
//! loopback connect per call, which is irrelevant at desk scale.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use super::wire::{self, Request};
use super::{FileKind, FileMeta, MetaError, Metastore, Result};
use crate::queue::{self, Outcome, QueueStats, Task, TaskBroker, TaskState};

/// The environment variable naming the metadata endpoint (`host:port`).
pub const METASTORE_ENV: &str = "DLFS_METASTORE";

#[derive(Debug, Clone)]
pub struct RemoteMetastore {
    endpoint: String,
}

impl RemoteMetastore {
    pub fn connect(endpoint: impl Into<String>) -> Self {
        RemoteMetastore {
            endpoint: endpoint.into(),
        }
    }

    /// Endpoint from `DLFS_METASTORE`.
    pub fn from_env() -> Result<Self> {
        match std::env::var(METASTORE_ENV) {
            Ok(endpoint) => Ok(Self::connect(endpoint)),
            Err(_) => Err(MetaError::Protocol(format!("{METASTORE_ENV} is not set"))),
        }
    }

    fn round_trip(&self, request: &Request) -> Result<ResponseLines> {
        round_trip(&self.endpoint, request)
    }
}

struct ResponseLines {
    head: Vec<String>,
    reader: BufReader<TcpStream>,
}

impl ResponseLines {
    fn next_line(&mut self) -> Result<String> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(MetaError::Protocol("connection closed mid-response".into()));
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    }
}

fn round_trip(endpoint: &str, request: &Request) -> Result<ResponseLines> {
    let mut stream = TcpStream::connect(endpoint)
        .map_err(|e| MetaError::Protocol(format!("connect {endpoint}: {e}")))?;
    stream.write_all(request.encode().as_bytes())?;
    stream.flush()?;
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Err(MetaError::Protocol("connection closed before response".into()));
    }
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
    match fields[0].as_str() {
        "OK" => Ok(ResponseLines {
            head: fields[1..].to_vec(),
            reader,
        }),
        "ERR" => {
            let code = fields.get(1).cloned().unwrap_or_default();
            let detail = fields
                .get(2)
                .map(|d| wire::unescape_field(d))
                .transpose()?
                .unwrap_or_default();
            Err(wire::error_from_code(&code, &detail))
        }
        _ => Err(MetaError::Protocol(format!("bad response line {line:?}"))),
    }
}

impl Metastore for RemoteMetastore {
    fn set_meta(&self, rec: &FileMeta) -> Result<()> {
        self.round_trip(&Request::Set(rec.clone()))?;
        Ok(())
    }

    fn get_meta(&self, path: &str) -> Result<FileMeta> {
        let response = self.round_trip(&Request::Get {
            path: path.to_string(),
        })?;
        let raw = response.head.join("\t");
        wire::decode_record(path, &raw)
    }

    fn list_dir(&self, path: &str) -> Result<Vec<(String, FileKind)>> {
        let mut response = self.round_trip(&Request::Ls {
            path: path.to_string(),
        })?;
        let count: usize = response
            .head
            .first()
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| MetaError::Protocol("LS response missing count".into()))?;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let line = response.next_line()?;
            let (name, kind) = line
                .split_once('\t')
                .ok_or_else(|| MetaError::Protocol(format!("bad LS entry {line:?}")))?;
            let kind = FileKind::parse(kind)
                .ok_or_else(|| MetaError::Protocol(format!("bad kind {kind:?}")))?;
            entries.push((wire::unescape_field(name)?, kind));
        }
        Ok(entries)
    }
}

/// Queue client speaking the same protocol.
#[derive(Debug, Clone)]
pub struct RemoteQueue {
    endpoint: String,
}

impl RemoteQueue {
    pub fn connect(endpoint: impl Into<String>) -> Self {
        RemoteQueue {
            endpoint: endpoint.into(),
        }
    }

    fn round_trip(&self, request: &Request) -> queue::Result<ResponseLines> {
        round_trip(&self.endpoint, request).map_err(into_queue_error)
    }
}

fn into_queue_error(err: MetaError) -> queue::QueueError {
    match err {
        // Wire errors decode as MetaError; re-map the queue codes.
        MetaError::NotFound(d) => queue::QueueError::NotFound(d),
        MetaError::Protocol(d) => {
            if let Some(rest) = d.strip_prefix("DUPLICATE ") {
                queue::QueueError::Duplicate(rest.to_string())
            } else if let Some(rest) = d.strip_prefix("NOTRUNNING ") {
                queue::QueueError::NotRunning(rest.to_string(), "remote")
            } else if let Some(rest) = d.strip_prefix("BADPAYLOAD ") {
                queue::QueueError::BadPayload(rest.to_string())
            } else {
                queue::QueueError::Backend(d)
            }
        }
        other => queue::QueueError::Backend(other.to_string()),
    }
}

impl TaskBroker for RemoteQueue {
    fn enqueue(&self, id: &str, kind: &str, payload: &str, max_attempts: u32) -> queue::Result<()> {
        self.round_trip(&Request::QueuePut {
            id: id.to_string(),
            kind: kind.to_string(),
            max_attempts,
            payload: payload.to_string(),
        })?;
        Ok(())
    }

    fn claim(&self, worker: &str) -> queue::Result<Option<Task>> {
        let response = self.round_trip(&Request::QueueClaim {
            worker: worker.to_string(),
        })?;
        if response.head.first().map(String::as_str) == Some(wire::NIL) {
            return Ok(None);
        }
        if response.head.len() != 4 {
            return Err(queue::QueueError::Backend(format!(
                "bad claim response: {:?}",
                response.head
            )));
        }
        let id = wire::unescape_field(&response.head[0]).map_err(into_queue_error)?;
        let kind = wire::unescape_field(&response.head[1]).map_err(into_queue_error)?;
        let attempts: u32 = response.head[2]
            .parse()
            .map_err(|_| queue::QueueError::Backend("bad attempts".into()))?;
        let payload_raw = wire::unescape_field(&response.head[3]).map_err(into_queue_error)?;
        let payload = serde_json::from_str(&payload_raw)
            .map_err(|e| queue::QueueError::Backend(format!("bad payload: {e}")))?;
        Ok(Some(Task {
            id,
            kind,
            payload,
            state: TaskState::Running,
            attempts,
            max_attempts: 0, // tracked server-side
            worker: Some(worker.to_string()),
            lease_expiry: 0.0,
        }))
    }

    fn settle(&self, id: &str, outcome: Outcome) -> queue::Result<TaskState> {
        let response = self.round_trip(&Request::QueueSettle {
            id: id.to_string(),
            outcome: outcome.as_str().to_string(),
        })?;
        match response.head.first().map(String::as_str) {
            Some("pending") => Ok(TaskState::Pending),
            Some("running") => Ok(TaskState::Running),
            Some("done") => Ok(TaskState::Done),
            Some("failed") => Ok(TaskState::Failed),
            other => Err(queue::QueueError::Backend(format!(
                "bad settle response: {other:?}"
            ))),
        }
    }

    fn stats(&self) -> queue::Result<QueueStats> {
        let response = self.round_trip(&Request::QueueStats)?;
        if response.head.len() != 4 {
            return Err(queue::QueueError::Backend("bad stats response".into()));
        }
        let parse = |s: &String| {
            s.parse::<u64>()
                .map_err(|_| queue::QueueError::Backend("bad stats count".into()))
        };
        Ok(QueueStats {
            pending: parse(&response.head[0])?,
            running: parse(&response.head[1])?,
            done: parse(&response.head[2])?,
            failed: parse(&response.head[3])?,
        })
    }
}
