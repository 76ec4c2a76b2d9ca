//! Authority wire interface: a minimal HTTP/1.1 request-response server
//! and client over plain TCP, with JSON bodies.
//!
//! Two endpoints:
//! - `POST /submit-report` - hospital credential in the Authorization
//!   header, `PositiveReport` body; responds with the new version.
//! - `GET /get-published?since=<version>` - responds with the entries added
//!   after `since` plus the current version.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AuthorityStore, PositiveReport, PublishedList};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed http message: {0}")]
    BadMessage(String),
    #[error("server responded {status}: {body}")]
    Status { status: u16, body: String },
    #[error("bad json payload: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub version: u64,
    pub new_entries: usize,
    pub duplicate: bool,
}

/// Serves one authority store. Each connection carries a single request.
pub struct AuthorityServer {
    listener: TcpListener,
    credential: String,
    store: Arc<RwLock<AuthorityStore>>,
    shutdown: Arc<AtomicBool>,
}

/// Clonable handle for inspecting and stopping a running server.
#[derive(Clone)]
pub struct ServerHandle {
    pub addr: SocketAddr,
    store: Arc<RwLock<AuthorityStore>>,
    shutdown: Arc<AtomicBool>,
}

impl ServerHandle {
    pub fn current_version(&self) -> u64 {
        self.store.read().expect("store lock").version()
    }

    pub fn stop(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
    }
}

impl AuthorityServer {
    pub fn bind(
        addr: impl ToSocketAddrs,
        credential: impl Into<String>,
        store: AuthorityStore,
    ) -> std::io::Result<Self> {
        Ok(AuthorityServer {
            listener: TcpListener::bind(addr)?,
            credential: credential.into(),
            store: Arc::new(RwLock::new(store)),
            shutdown: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn handle(&self) -> std::io::Result<ServerHandle> {
        Ok(ServerHandle {
            addr: self.local_addr()?,
            store: Arc::clone(&self.store),
            shutdown: Arc::clone(&self.shutdown),
        })
    }

    /// Accept and answer requests until the handle asks for shutdown.
    pub fn run(self) -> std::io::Result<()> {
        for stream in self.listener.incoming() {
            if self.shutdown.load(Ordering::SeqCst) {
                break;
            }
            let mut stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let _ = stream.set_read_timeout(Some(Duration::from_secs(10)));
            if let Err(err) = self.serve_one(&mut stream) {
                let _ = write_response(&mut stream, 400, &error_body(&err.to_string()));
            }
        }
        Ok(())
    }

    fn serve_one(&self, stream: &mut TcpStream) -> Result<(), WireError> {
        let request = read_request(stream)?;
        match (request.method.as_str(), request.path.as_str()) {
            ("POST", "/submit-report") => {
                let expected = format!("Bearer {}", self.credential);
                if request.authorization.as_deref() != Some(expected.as_str()) {
                    write_response(stream, 401, &error_body("invalid hospital credential"))?;
                    return Ok(());
                }
                let report: PositiveReport = serde_json::from_slice(&request.body)?;
                let outcome = self.store.write().expect("store lock").ingest(&report);
                let body = serde_json::to_vec(&SubmitResponse {
                    version: outcome.version,
                    new_entries: outcome.new_entries,
                    duplicate: outcome.duplicate,
                })?;
                write_response(stream, 200, &body)?;
            }
            ("GET", path) if path == "/get-published" || path.starts_with("/get-published?") => {
                let since = parse_since(path)?;
                let list = self.store.read().expect("store lock").published_since(since);
                write_response(stream, 200, &serde_json::to_vec(&list)?)?;
            }
            _ => {
                write_response(stream, 404, &error_body("unknown endpoint"))?;
            }
        }
        Ok(())
    }
}

fn parse_since(path: &str) -> Result<u64, WireError> {
    let Some(query) = path.split_once('?').map(|(_, q)| q) else {
        return Ok(0);
    };
    for pair in query.split('&') {
        if let Some(value) = pair.strip_prefix("since=") {
            return value
                .parse()
                .map_err(|_| WireError::BadMessage(format!("bad since value: {value}")));
        }
    }
    Ok(0)
}

fn error_body(msg: &str) -> Vec<u8> {
    serde_json::json!({ "error": msg }).to_string().into_bytes()
}

struct Request {
    method: String,
    path: String,
    authorization: Option<String>,
    body: Vec<u8>,
}

fn read_request(stream: &mut TcpStream) -> Result<Request, WireError> {
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts
        .next()
        .ok_or_else(|| WireError::BadMessage("empty request line".into()))?
        .to_string();
    let path = parts
        .next()
        .ok_or_else(|| WireError::BadMessage("request line without path".into()))?
        .to_string();

    let mut content_length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let Some((name, value)) = line.split_once(':') else {
            return Err(WireError::BadMessage(format!("bad header line: {line}")));
        };
        let value = value.trim();
        match name.to_ascii_lowercase().as_str() {
            "content-length" => {
                content_length = value
                    .parse()
                    .map_err(|_| WireError::BadMessage("bad content-length".into()))?;
            }
            "authorization" => authorization = Some(value.to_string()),
            _ => {}
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    Ok(Request {
        method,
        path,
        authorization,
        body,
    })
}

fn write_response(stream: &mut TcpStream, status: u16, body: &[u8]) -> Result<(), WireError> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        404 => "Not Found",
        _ => "Error",
    };
    let head = format!(
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(body)?;
    stream.flush()?;
    Ok(())
}

fn request(
    addr: impl ToSocketAddrs,
    method: &str,
    path: &str,
    authorization: Option<&str>,
    body: &[u8],
) -> Result<(u16, Vec<u8>), WireError> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut head = format!("{method} {path} HTTP/1.1\r\nhost: authority\r\nconnection: close\r\n");
    if let Some(auth) = authorization {
        head.push_str(&format!("authorization: {auth}\r\n"));
    }
    head.push_str(&format!("content-length: {}\r\n\r\n", body.len()));
    stream.write_all(head.as_bytes())?;
    stream.write_all(body)?;
    stream.flush()?;

    let mut reader = BufReader::new(stream);
    let mut status_line = String::new();
    reader.read_line(&mut status_line)?;
    let status: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| WireError::BadMessage(format!("bad status line: {status_line}")))?;
    let mut content_length = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse::<usize>().ok();
            }
        }
    }
    let mut body = Vec::new();
    match content_length {
        Some(n) => {
            body.resize(n, 0);
            reader.read_exact(&mut body)?;
        }
        None => {
            reader.read_to_end(&mut body)?;
        }
    }
    Ok((status, body))
}

/// Submit a positive report with the hospital credential.
pub fn submit_report(
    addr: impl ToSocketAddrs,
    credential: &str,
    report: &PositiveReport,
) -> Result<SubmitResponse, WireError> {
    let body = serde_json::to_vec(report)?;
    let auth = format!("Bearer {credential}");
    let (status, body) = request(addr, "POST", "/submit-report", Some(&auth), &body)?;
    if status != 200 {
        return Err(WireError::Status {
            status,
            body: String::from_utf8_lossy(&body).into_owned(),
        });
    }
    Ok(serde_json::from_slice(&body)?)
}

/// Download the published entries newer than `since`.
pub fn get_published(addr: impl ToSocketAddrs, since: u64) -> Result<PublishedList, WireError> {
    let path = format!("/get-published?since={since}");
    let (status, body) = request(addr, "GET", &path, None, &[])?;
    if status != 200 {
        return Err(WireError::Status {
            status,
            body: String::from_utf8_lossy(&body).into_owned(),
        });
    }
    Ok(serde_json::from_slice(&body)?)
}
