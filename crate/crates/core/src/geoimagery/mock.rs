//! Minimal local HTTP server for exercising the fetcher offline.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

pub struct MockResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

type Handler = dyn Fn(&str, usize) -> MockResponse + Send + Sync;

/// Serves every request through `handler(path_and_query, hit)`, where `hit`
/// counts requests for that exact target starting at 1.
pub struct MockServer {
    addr: SocketAddr,
    hits: Arc<Mutex<HashMap<String, usize>>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start<F>(handler: F) -> std::io::Result<Self>
    where
        F: Fn(&str, usize) -> MockResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let hits = Arc::new(Mutex::new(HashMap::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = {
            let hits = Arc::clone(&hits);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    if let Ok(s) = stream {
                        let _ = serve(s, &*handler, &hits);
                    }
                }
            })
        };
        Ok(Self {
            addr,
            hits,
            stop,
            thread: Some(thread),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn total_requests(&self) -> usize {
        self.hits.lock().unwrap().values().sum()
    }

    /// Requests whose target contains `needle`.
    pub fn requests_matching(&self, needle: &str) -> usize {
        self.hits
            .lock()
            .unwrap()
            .iter()
            .filter(|(k, _)| k.contains(needle))
            .map(|(_, v)| v)
            .sum()
    }

    pub fn max_requests_per_target(&self) -> usize {
        self.hits.lock().unwrap().values().copied().max().unwrap_or(0)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve(mut s: TcpStream, handler: &Handler, hits: &Mutex<HashMap<String, usize>>) -> std::io::Result<()> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    while !buf.windows(4).any(|w| w == b"\r\n\r\n") {
        let n = s.read(&mut chunk)?;
        if n == 0 {
            return Ok(());
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    let head = String::from_utf8_lossy(&buf);
    let target = head
        .lines()
        .next()
        .and_then(|l| l.split_whitespace().nth(1))
        .unwrap_or("/")
        .to_string();
    let nth = {
        let mut h = hits.lock().unwrap();
        let c = h.entry(target.clone()).or_insert(0);
        *c += 1;
        *c
    };
    let resp = handler(&target, nth);
    let reason = if resp.status == 200 { "OK" } else { "Error" };
    write!(
        s,
        "HTTP/1.1 {} {reason}\r\nContent-Type: image/png\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        resp.status,
        resp.body.len()
    )?;
    s.write_all(&resp.body)?;
    s.flush()
}
