//! Minimal HTTP/1.1 front end for [`MockService`].
//!
//! One request per connection; every response carries `Connection: close`.
//! Request bodies may be sized by `Content-Length` or sent chunked.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::service::{self, classify, Endpoint, MockService, Reply, ServiceConfig, State};

const MAX_HEAD: usize = 64 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error("invalid service configuration: {0}")]
    Config(String),
    #[error("cannot load snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },
}

/// Where the service listens.
#[derive(Debug, Clone)]
pub enum Listen {
    /// Loopback on an ephemeral port, for tests and demos.
    InProcess,
    Addr(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Close the connection without answering.
    Drop,
    Http500,
    /// Wait this long, then answer normally.
    SlowStart(Duration),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointMatcher {
    Any,
    Only(Endpoint),
}

impl EndpointMatcher {
    fn matches(&self, ep: Option<Endpoint>) -> bool {
        match self {
            EndpointMatcher::Any => true,
            EndpointMatcher::Only(want) => ep == Some(*want),
        }
    }
}

struct Shared {
    service: MockService,
    faults: Mutex<Vec<(EndpointMatcher, Fault)>>,
    requests: AtomicU64,
    stopping: AtomicBool,
}

/// A running server. Dropping it stops the server.
pub struct RunningService {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
    snapshot: Option<PathBuf>,
}

pub fn start(config: ServiceConfig, listen: Listen) -> Result<RunningService, StartError> {
    start_with_state(config, listen, State::default(), None)
}

/// Starts from the snapshot at `path` when it exists and writes the state
/// back there on shutdown.
pub fn start_with_snapshot(
    config: ServiceConfig,
    listen: Listen,
    path: &Path,
) -> Result<RunningService, StartError> {
    let state = match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| StartError::Snapshot {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?,
        Err(e) if e.kind() == io::ErrorKind::NotFound => State::default(),
        Err(e) => {
            return Err(StartError::Snapshot {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        }
    };
    start_with_state(config, listen, state, Some(path.to_path_buf()))
}

fn start_with_state(
    config: ServiceConfig,
    listen: Listen,
    state: State,
    snapshot: Option<PathBuf>,
) -> Result<RunningService, StartError> {
    config.validate().map_err(StartError::Config)?;
    let addr = match &listen {
        Listen::InProcess => "127.0.0.1:0".to_string(),
        Listen::Addr(a) => a.clone(),
    };
    let bind_err = |source| StartError::Bind {
        addr: addr.clone(),
        source,
    };
    let sock = addr
        .to_socket_addrs()
        .map_err(bind_err)?
        .next()
        .ok_or_else(|| bind_err(io::Error::other("address resolves to nothing")))?;
    let listener = TcpListener::bind(sock).map_err(bind_err)?;
    let local = listener.local_addr().map_err(bind_err)?;

    let shared = Arc::new(Shared {
        service: MockService::with_state(config, state),
        faults: Mutex::new(Vec::new()),
        requests: AtomicU64::new(0),
        stopping: AtomicBool::new(false),
    });
    let acceptor = {
        let shared = Arc::clone(&shared);
        std::thread::Builder::new()
            .name("geopub-mock-accept".into())
            .spawn(move || accept_loop(listener, shared))
            .map_err(bind_err)?
    };
    log::info!("mock deposition service listening on http://{local}");
    Ok(RunningService {
        addr: local,
        shared,
        acceptor: Some(acceptor),
        snapshot,
    })
}

impl RunningService {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn service(&self) -> &MockService {
        &self.shared.service
    }

    pub fn config(&self) -> &ServiceConfig {
        self.shared.service.config()
    }

    /// Number of HTTP requests received so far, faulted ones included.
    pub fn request_count(&self) -> u64 {
        self.shared.requests.load(Ordering::SeqCst)
    }

    pub fn deposition_count(&self) -> usize {
        self.shared.service.deposition_count()
    }

    pub fn inject_fault(&self, fault: Fault, on: EndpointMatcher) {
        lock(&self.shared.faults).push((on, fault));
    }

    pub fn clear_faults(&self) {
        lock(&self.shared.faults).clear();
    }

    pub fn write_snapshot(&self, path: &Path) -> io::Result<()> {
        let json = serde_json::to_string_pretty(&self.shared.service.state())?;
        std::fs::write(path, json)
    }

    /// Stops accepting connections and writes the snapshot, if configured.
    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> io::Result<()> {
        let Some(acceptor) = self.acceptor.take() else {
            return Ok(());
        };
        self.shared.stopping.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
        let _ = acceptor.join();
        match &self.snapshot {
            Some(path) => self.write_snapshot(path),
            None => Ok(()),
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        if let Err(e) = self.stop() {
            log::error!("writing snapshot failed: {e}");
        }
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    for conn in listener.incoming() {
        if shared.stopping.load(Ordering::SeqCst) {
            break;
        }
        match conn {
            Ok(stream) => {
                let shared = Arc::clone(&shared);
                std::thread::spawn(move || {
                    if let Err(e) = serve_connection(stream, &shared) {
                        log::debug!("connection error: {e}");
                    }
                });
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

/// Request line and headers of one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Head {
    pub method: String,
    pub target: String,
    pub headers: Vec<(String, String)>,
}

impl Head {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

fn read_head(reader: &mut BufReader<TcpStream>) -> io::Result<Option<Head>> {
    let mut raw = Vec::new();
    loop {
        let n = reader.read_until(b'\n', &mut raw)?;
        if n == 0 {
            return if raw.is_empty() {
                Ok(None)
            } else {
                Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated request head"))
            };
        }
        if raw.ends_with(b"\r\n\r\n") || raw.ends_with(b"\n\n") {
            break;
        }
        if raw.len() > MAX_HEAD {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "request head too large"));
        }
    }
    parse_head(&raw).map(Some)
}

pub fn parse_head(raw: &[u8]) -> io::Result<Head> {
    let mut storage = [httparse::EMPTY_HEADER; 64];
    let mut req = httparse::Request::new(&mut storage);
    match req.parse(raw) {
        Ok(httparse::Status::Complete(_)) => {}
        Ok(httparse::Status::Partial) => {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "incomplete request head"))
        }
        Err(e) => return Err(io::Error::new(io::ErrorKind::InvalidData, e)),
    }
    Ok(Head {
        method: req.method.unwrap_or_default().to_string(),
        target: req.path.unwrap_or_default().to_string(),
        headers: req
            .headers
            .iter()
            .map(|h| {
                (
                    h.name.to_string(),
                    String::from_utf8_lossy(h.value).into_owned(),
                )
            })
            .collect(),
    })
}

/// Decodes `Transfer-Encoding: chunked` bodies.
pub struct ChunkedReader<R> {
    inner: R,
    remaining: u64,
    done: bool,
}

impl<R: BufRead> ChunkedReader<R> {
    pub fn new(inner: R) -> Self {
        ChunkedReader {
            inner,
            remaining: 0,
            done: false,
        }
    }

    fn read_line(&mut self) -> io::Result<String> {
        let mut line = String::new();
        (&mut self.inner).take(4096).read_line(&mut line)?;
        Ok(line)
    }
}

impl<R: BufRead> Read for ChunkedReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.done || buf.is_empty() {
            return Ok(0);
        }
        if self.remaining == 0 {
            let line = self.read_line()?;
            let size = line.trim().split(';').next().unwrap_or("").trim();
            self.remaining = u64::from_str_radix(size, 16)
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "bad chunk size"))?;
            if self.remaining == 0 {
                // Trailers end with an empty line.
                while !self.read_line()?.trim().is_empty() {}
                self.done = true;
                return Ok(0);
            }
        }
        let want = buf.len().min(self.remaining as usize);
        let n = self.inner.read(&mut buf[..want])?;
        if n == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated chunk"));
        }
        self.remaining -= n as u64;
        if self.remaining == 0 {
            self.read_line()?;
        }
        Ok(n)
    }
}

fn serve_connection(stream: TcpStream, shared: &Shared) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(60)))?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let Some(head) = read_head(&mut reader)? else {
        return Ok(());
    };
    shared.requests.fetch_add(1, Ordering::SeqCst);

    if head
        .header("Expect")
        .is_some_and(|v| v.eq_ignore_ascii_case("100-continue"))
    {
        writer.write_all(b"HTTP/1.1 100 Continue\r\n\r\n")?;
    }
    let chunked = head
        .header("Transfer-Encoding")
        .is_some_and(|v| v.to_ascii_lowercase().contains("chunked"));
    let mut body: Box<dyn Read + '_> = if chunked {
        Box::new(ChunkedReader::new(&mut reader))
    } else {
        let len = head
            .header("Content-Length")
            .and_then(|v| v.trim().parse::<u64>().ok())
            .unwrap_or(0);
        Box::new((&mut reader).take(len))
    };

    let (path, query) = head.target.split_once('?').unwrap_or((&head.target, ""));
    let endpoint = classify(&head.method, path);
    let fault = lock(&shared.faults)
        .iter()
        .find(|(m, _)| m.matches(endpoint))
        .map(|(_, f)| *f);

    let reply = match fault {
        Some(Fault::Drop) => {
            service::drain(&mut body);
            drop(body);
            return writer.shutdown(Shutdown::Both);
        }
        Some(Fault::Http500) => {
            service::drain(&mut body);
            Reply {
                status: 500,
                body: r#"{"error":"internal","message":"injected fault"}"#.to_string(),
            }
        }
        other => {
            if let Some(Fault::SlowStart(d)) = other {
                std::thread::sleep(d);
            }
            let reply = shared.service.handle(service::Request {
                method: &head.method,
                path,
                query,
                headers: &head.headers,
                body: &mut body,
            });
            service::drain(&mut body);
            reply
        }
    };
    drop(body);
    write_reply(&mut writer, &reply)?;
    writer.flush()?;
    let _ = writer.shutdown(Shutdown::Write);
    Ok(())
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        201 => "Created",
        400 => "Bad Request",
        401 => "Unauthorized",
        404 => "Not Found",
        413 => "Payload Too Large",
        422 => "Unprocessable Entity",
        500 => "Internal Server Error",
        501 => "Not Implemented",
        _ => "Unknown",
    }
}

fn write_reply(w: &mut impl Write, reply: &Reply) -> io::Result<()> {
    write!(
        w,
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reason(reply.status),
        reply.body.len(),
        reply.body
    )
}
