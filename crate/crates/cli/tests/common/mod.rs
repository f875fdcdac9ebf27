use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

/// Minimal chat-completions endpoint answering every request with `reply`.
pub struct Stub {
    pub url: String,
    #[allow(dead_code)]
    pub requests: Arc<AtomicUsize>,
    server: Arc<Server>,
}

impl Stub {
    pub fn replying(reply: &'static str) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}/v1/chat/completions", server.server_addr().to_ip().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let (srv, count) = (server.clone(), requests.clone());
        thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                count.fetch_add(1, Ordering::SeqCst);
                let mut body = String::new();
                let _ = req.as_reader().read_to_string(&mut body);
                let payload: Value = json!({
                    "choices": [{ "index": 0, "message": { "role": "assistant", "content": reply } }]
                });
                let resp = Response::from_string(payload.to_string())
                    .with_header(Header::from_bytes("Content-Type", "application/json").unwrap());
                let _ = req.respond(resp);
            }
        });
        Self { url, requests, server }
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        self.server.unblock();
    }
}
