//! TCP server for the metadata and queue line protocol.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use super::wire::{self, Request};
use super::{MemoryMetastore, MetaError, Metastore, Result};
use crate::queue::{self, Outcome, TaskBroker, TaskQueue};

/// Serves a [`MemoryMetastore`] and a [`TaskQueue`] over one listener,
/// one thread per connection. Requests on a connection are handled in
/// order; mutations are serialized by the underlying substrate.
pub struct MetaServer {
    listener: TcpListener,
    meta: Arc<MemoryMetastore>,
    broker: Arc<TaskQueue>,
}

impl MetaServer {
    pub fn bind(addr: &str) -> Result<MetaServer> {
        Ok(MetaServer {
            listener: TcpListener::bind(addr)?,
            meta: Arc::new(MemoryMetastore::new()),
            broker: Arc::new(TaskQueue::with_defaults()),
        })
    }

    pub fn local_addr(&self) -> std::net::SocketAddr {
        self.listener.local_addr().expect("bound listener")
    }

    /// Accept connections until the process exits.
    pub fn serve_forever(self) -> Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let meta = Arc::clone(&self.meta);
            let broker = Arc::clone(&self.broker);
            std::thread::spawn(move || {
                let _ = handle_connection(stream, &*meta, &*broker);
            });
        }
        Ok(())
    }

    /// Accept connections on a background thread; returns a handle that
    /// stops the server when dropped or shut down.
    pub fn serve_background(self) -> ServerHandle {
        let addr = self.local_addr();
        let stop = Arc::new(AtomicBool::new(false));
        let stop_accept = Arc::clone(&stop);
        let thread = std::thread::spawn(move || {
            for stream in self.listener.incoming() {
                if stop_accept.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let meta = Arc::clone(&self.meta);
                let broker = Arc::clone(&self.broker);
                std::thread::spawn(move || {
                    let _ = handle_connection(stream, &*meta, &*broker);
                });
            }
        });
        ServerHandle {
            addr,
            stop,
            thread: Some(thread),
        }
    }
}

pub struct ServerHandle {
    addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn endpoint(&self) -> String {
        self.addr.to_string()
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn handle_connection(
    stream: TcpStream,
    meta: &dyn Metastore,
    broker: &dyn TaskBroker,
) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let response = respond(&line, meta, broker);
        writer.write_all(response.as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}

fn err_line(code: &str, detail: &str) -> String {
    format!("ERR\t{}\t{}\n", code, wire::escape_field(detail))
}

fn respond(line: &str, meta: &dyn Metastore, broker: &dyn TaskBroker) -> String {
    let request = match Request::parse(line) {
        Ok(r) => r,
        Err(e) => return err_line(wire::error_code(&e), &e.to_string()),
    };
    match request {
        Request::Set(rec) => match meta.set_meta(&rec) {
            Ok(()) => "OK\n".to_string(),
            Err(e) => meta_err(e),
        },
        Request::Get { path } => match meta.get_meta(&path) {
            Ok(rec) => format!("OK\t{}\n", wire::encode_record(&rec)),
            Err(e) => meta_err(e),
        },
        Request::Ls { path } => match meta.list_dir(&path) {
            Ok(entries) => {
                let mut out = format!("OK\t{}\n", entries.len());
                for (name, kind) in entries {
                    out.push_str(&format!(
                        "{}\t{}\n",
                        wire::escape_field(&name),
                        kind.as_str()
                    ));
                }
                out
            }
            Err(e) => meta_err(e),
        },
        Request::QueuePut {
            id,
            kind,
            max_attempts,
            payload,
        } => match broker.enqueue(&id, &kind, &payload, max_attempts) {
            Ok(()) => "OK\n".to_string(),
            Err(e) => queue_err(e),
        },
        Request::QueueClaim { worker } => match broker.claim(&worker) {
            Ok(Some(task)) => format!(
                "OK\t{}\t{}\t{}\t{}\n",
                wire::escape_field(&task.id),
                wire::escape_field(&task.kind),
                task.attempts,
                wire::escape_field(&task.payload.to_string()),
            ),
            Ok(None) => format!("OK\t{}\n", wire::NIL),
            Err(e) => queue_err(e),
        },
        Request::QueueSettle { id, outcome } => match Outcome::parse(&outcome) {
            None => err_line("BADREQ", &format!("unknown outcome {outcome:?}")),
            Some(outcome) => match broker.settle(&id, outcome) {
                Ok(state) => format!("OK\t{}\n", state.as_str()),
                Err(e) => queue_err(e),
            },
        },
        Request::QueueStats => match broker.stats() {
            Ok(s) => format!("OK\t{}\t{}\t{}\t{}\n", s.pending, s.running, s.done, s.failed),
            Err(e) => queue_err(e),
        },
    }
}

fn meta_err(e: MetaError) -> String {
    err_line(wire::error_code(&e), &e.to_string())
}

fn queue_err(e: queue::QueueError) -> String {
    err_line(queue::error_code(&e), &e.to_string())
}
