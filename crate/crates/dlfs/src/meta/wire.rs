//! Line protocol: newline-terminated UTF-8 requests, tab-separated fields.
//!
//! ```text
//! SET <path> <kind> <size> <mtime> <bucket> <key>   ->  OK
//! GET <path>                                        ->  OK <kind> <size> <mtime> <bucket> <key> | ERR NOTFOUND
//! LS <path>                                         ->  OK <n>  then n lines  <name> <kind>     | ERR ...
//! ```
//!
//! Queue verbs ride the same connection (the queue shares the server's
//! key/value substrate):
//!
//! ```text
//! QPUT <id> <kind> <max_attempts> <payload>  ->  OK | ERR DUPLICATE
//! QCLAIM <worker>                            ->  OK <id> <kind> <attempts> <payload> | OK -
//! QSETTLE <id> <outcome>                     ->  OK <state> | ERR ...
//! QSTATS                                     ->  OK <pending> <running> <done> <failed>
//! ```
//!
//! Fields containing whitespace, control bytes or `%` are percent-encoded.
//! A bare `-` is the nil marker (no backing object, empty claim); a field
//! whose literal value is `-` is sent as `%2D`.

use super::{FileKind, FileMeta, MetaError, Result};
use crate::store::ObjectKey;

pub const NIL: &str = "-";

/// Percent-encode a field for the wire: `%`, whitespace and control bytes.
pub fn escape_field(field: &str) -> String {
    if field == NIL {
        return "%2D".to_string();
    }
    let mut out = String::with_capacity(field.len());
    for &byte in field.as_bytes() {
        if byte <= 0x20 || byte == b'%' || byte == 0x7F {
            out.push_str(&format!("%{byte:02X}"));
        } else {
            out.push(byte as char);
        }
    }
    out
}

pub fn unescape_field(field: &str) -> Result<String> {
    let bytes = field.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = field
                .get(i + 1..i + 3)
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| MetaError::Protocol(format!("bad escape in {field:?}")))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| MetaError::Protocol(format!("non-UTF8 field {field:?}")))
}

/// Serialize the non-path part of a record; doubles as the stored KV value.
pub fn encode_record(rec: &FileMeta) -> String {
    let (bucket, key) = match &rec.object {
        Some(k) => (escape_field(&k.bucket), escape_field(&k.key)),
        None => (NIL.to_string(), NIL.to_string()),
    };
    format!(
        "{}\t{}\t{}\t{}\t{}",
        rec.kind.as_str(),
        rec.size,
        rec.mtime,
        bucket,
        key
    )
}

/// Parse the value produced by [`encode_record`] back into a record.
pub fn decode_record(path: &str, raw: &str) -> Result<FileMeta> {
    let fields: Vec<&str> = raw.split('\t').collect();
    if fields.len() != 5 {
        return Err(MetaError::MalformedRecord(format!(
            "{path}: expected 5 fields, got {}",
            fields.len()
        )));
    }
    let kind = FileKind::parse(fields[0])
        .ok_or_else(|| MetaError::MalformedRecord(format!("{path}: bad kind {:?}", fields[0])))?;
    let size: u64 = fields[1]
        .parse()
        .map_err(|_| MetaError::MalformedRecord(format!("{path}: bad size")))?;
    let mtime: i64 = fields[2]
        .parse()
        .map_err(|_| MetaError::MalformedRecord(format!("{path}: bad mtime")))?;
    let object = if fields[3] == NIL && fields[4] == NIL {
        None
    } else {
        Some(ObjectKey {
            bucket: unescape_field(fields[3])?,
            key: unescape_field(fields[4])?,
        })
    };
    Ok(FileMeta {
        path: path.to_string(),
        kind,
        object,
        size,
        mtime,
    })
}

/// One parsed client request.
#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Set(FileMeta),
    Get { path: String },
    Ls { path: String },
    QueuePut {
        id: String,
        kind: String,
        max_attempts: u32,
        payload: String,
    },
    QueueClaim { worker: String },
    QueueSettle { id: String, outcome: String },
    QueueStats,
}

impl Request {
    pub fn parse(line: &str) -> Result<Request> {
        let line = line.trim_end_matches(['\r', '\n']);
        let fields: Vec<&str> = line.split('\t').collect();
        let badreq = |msg: &str| MetaError::Protocol(format!("{msg}: {line:?}"));
        match fields[0] {
            "SET" if fields.len() == 7 => {
                let path = unescape_field(fields[1])?;
                let rest = fields[2..].join("\t");
                Ok(Request::Set(decode_record(&path, &rest)?))
            }
            "GET" if fields.len() == 2 => Ok(Request::Get {
                path: unescape_field(fields[1])?,
            }),
            "LS" if fields.len() == 2 => Ok(Request::Ls {
                path: unescape_field(fields[1])?,
            }),
            "QPUT" if fields.len() == 5 => Ok(Request::QueuePut {
                id: unescape_field(fields[1])?,
                kind: unescape_field(fields[2])?,
                max_attempts: fields[3]
                    .parse()
                    .map_err(|_| badreq("bad max_attempts"))?,
                payload: unescape_field(fields[4])?,
            }),
            "QCLAIM" if fields.len() == 2 => Ok(Request::QueueClaim {
                worker: unescape_field(fields[1])?,
            }),
            "QSETTLE" if fields.len() == 3 => Ok(Request::QueueSettle {
                id: unescape_field(fields[1])?,
                outcome: unescape_field(fields[2])?,
            }),
            "QSTATS" if fields.len() == 1 => Ok(Request::QueueStats),
            _ => Err(badreq("unrecognized request")),
        }
    }

    pub fn encode(&self) -> String {
        match self {
            Request::Set(rec) => format!(
                "SET\t{}\t{}\n",
                escape_field(&rec.path),
                encode_record(rec)
            ),
            Request::Get { path } => format!("GET\t{}\n", escape_field(path)),
            Request::Ls { path } => format!("LS\t{}\n", escape_field(path)),
            Request::QueuePut {
                id,
                kind,
                max_attempts,
                payload,
            } => format!(
                "QPUT\t{}\t{}\t{}\t{}\n",
                escape_field(id),
                escape_field(kind),
                max_attempts,
                escape_field(payload)
            ),
            Request::QueueClaim { worker } => format!("QCLAIM\t{}\n", escape_field(worker)),
            Request::QueueSettle { id, outcome } => format!(
                "QSETTLE\t{}\t{}\n",
                escape_field(id),
                escape_field(outcome)
            ),
            Request::QueueStats => "QSTATS\n".to_string(),
        }
    }
}

/// Map an error to its wire code (and the reverse on the client side).
pub fn error_code(err: &MetaError) -> &'static str {
    match err {
        MetaError::NotFound(_) => "NOTFOUND",
        MetaError::NotADirectory(_) => "NOTDIR",
        MetaError::MalformedPath(_) => "BADPATH",
        MetaError::MalformedRecord(_) => "BADREC",
        MetaError::Protocol(_) => "BADREQ",
        MetaError::Io(_) | MetaError::Store(_) => "INTERNAL",
    }
}

pub fn error_from_code(code: &str, detail: &str) -> MetaError {
    match code {
        "NOTFOUND" => MetaError::NotFound(detail.to_string()),
        "NOTDIR" => MetaError::NotADirectory(detail.to_string()),
        "BADPATH" => MetaError::MalformedPath(detail.to_string()),
        "BADREC" => MetaError::MalformedRecord(detail.to_string()),
        _ => MetaError::Protocol(format!("{code} {detail}")),
    }
}
