//! Minimal local chat-completion server for tests and offline demos.
//!
//! Every POST is answered with a fixed completion. An optional status
//! sequence makes the first requests fail, which exercises client retries.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

#[derive(Debug, Default)]
struct Shared {
    requests: AtomicUsize,
    bodies: Mutex<Vec<String>>,
    authorization: Mutex<Vec<Option<String>>>,
    stop: AtomicBool,
}

pub struct StubServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Serves `content` as the completion text for every request.
    pub fn start(content: impl Into<String>) -> std::io::Result<Self> {
        Self::with_statuses(content, Vec::new())
    }

    /// Answers the i-th request with `statuses[i]` while the list lasts,
    /// then with 200 and the fixed completion.
    pub fn with_statuses(content: impl Into<String>, statuses: Vec<u16>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared::default());
        let content = content.into();
        let worker = Arc::clone(&shared);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if worker.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let n = worker.requests.fetch_add(1, Ordering::SeqCst);
                let status = statuses.get(n).copied().unwrap_or(200);
                if let Err(e) = serve(stream, &worker, status, &content) {
                    log::debug!("stub server connection error: {e}");
                }
            }
        });
        Ok(StubServer {
            addr,
            shared,
            handle: Some(handle),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    pub fn requests(&self) -> usize {
        self.shared.requests.load(Ordering::SeqCst)
    }

    /// Raw request bodies received so far.
    pub fn bodies(&self) -> Vec<String> {
        self.shared.bodies.lock().expect("stub bodies").clone()
    }

    /// `Authorization` header of each request, if present.
    pub fn authorization_headers(&self) -> Vec<Option<String>> {
        self.shared.authorization.lock().expect("stub headers").clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop so it observes the stop flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, shared: &Shared, status: u16, content: &str) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0usize;
    let mut auth = None;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            let value = value.trim();
            if name.eq_ignore_ascii_case("content-length") {
                length = value.parse().unwrap_or(0);
            } else if name.eq_ignore_ascii_case("authorization") {
                auth = Some(value.to_string());
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    shared
        .bodies
        .lock()
        .expect("stub bodies")
        .push(String::from_utf8_lossy(&body).into_owned());
    shared.authorization.lock().expect("stub headers").push(auth);

    let payload = if status == 200 {
        serde_json::json!({
            "id": "stub",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        })
        .to_string()
    } else {
        serde_json::json!({"error": {"message": "stub failure"}}).to_string()
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    out.flush()
}
