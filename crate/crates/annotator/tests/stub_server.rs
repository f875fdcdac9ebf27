use std::fs;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use annotinfer::Label;
use annotinfer_annotator::{
    annotate_documents, write_annotations_csv, AnnotationJob, AnnotatorError, Codebook, Document,
    Outcome,
};
use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

type Handler = dyn Fn(usize, &Value) -> (u16, String) + Send + Sync;

/// Chat-completions stand-in. Each request is served on its own thread so
/// that concurrent clients really overlap; `handler` gets the 0-based request
/// number and the parsed body and returns a status and reply text.
struct Stub {
    url: String,
    bodies: Arc<Mutex<Vec<Value>>>,
    requests: Arc<AtomicUsize>,
    max_in_flight: Arc<AtomicUsize>,
    server: Arc<Server>,
}

impl Stub {
    fn start(delay: Duration, handler: impl Fn(usize, &Value) -> (u16, String) + Send + Sync + 'static) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}/v1/chat/completions", server.server_addr().to_ip().unwrap());
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let requests = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let max_in_flight = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        {
            let (server, bodies, requests) = (server.clone(), bodies.clone(), requests.clone());
            let (in_flight, max_in_flight) = (in_flight.clone(), max_in_flight.clone());
            thread::spawn(move || {
                for mut req in server.incoming_requests() {
                    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    max_in_flight.fetch_max(now, Ordering::SeqCst);
                    let k = requests.fetch_add(1, Ordering::SeqCst);
                    let (bodies, handler, in_flight) = (bodies.clone(), handler.clone(), in_flight.clone());
                    thread::spawn(move || {
                        let mut raw = String::new();
                        req.as_reader().read_to_string(&mut raw).unwrap();
                        let body: Value = serde_json::from_str(&raw).unwrap_or(Value::Null);
                        bodies.lock().unwrap().push(body.clone());
                        thread::sleep(delay);
                        let (status, text) = handler(k, &body);
                        let payload = json!({
                            "choices": [{ "index": 0, "message": { "role": "assistant", "content": text } }]
                        });
                        let resp = Response::from_string(payload.to_string())
                            .with_status_code(status)
                            .with_header(Header::from_bytes("Content-Type", "application/json").unwrap());
                        in_flight.fetch_sub(1, Ordering::SeqCst);
                        let _ = req.respond(resp);
                    });
                }
            });
        }
        Self {
            url,
            bodies,
            requests,
            max_in_flight,
            server,
        }
    }

    fn replying(text: &'static str) -> Self {
        Self::start(Duration::ZERO, move |_, _| (200, text.to_string()))
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        self.server.unblock();
    }
}

fn docs(n: usize) -> Vec<Document> {
    (0..n)
        .map(|i| Document::new(format!("doc{i}"), format!("Report number {i}: crowds gathered downtown.")))
        .collect()
}

fn job(stub: &Stub, n: usize) -> AnnotationJob {
    let mut job = AnnotationJob::new(docs(n), Codebook::fixture("acled").unwrap(), &stub.url, "stub-model");
    job.api_key = Some("test-key".into());
    job.backoff = Duration::from_millis(5);
    job.timeout = Duration::from_secs(10);
    job
}

#[test]
fn yes_everywhere_labels_everything_positive() {
    let stub = Stub::replying("yes");
    let rows = annotate_documents(&job(&stub, 12)).unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.outcome == Outcome::Labeled(Label::ONE)));
    let ids: Vec<_> = rows.iter().map(|r| r.id.clone()).collect();
    let expected: Vec<_> = docs(12).into_iter().map(|d| d.id).collect();
    assert_eq!(ids, expected);
}

#[test]
fn capitalized_no_with_period_is_negative() {
    let stub = Stub::replying("No.");
    let rows = annotate_documents(&job(&stub, 3)).unwrap();
    assert!(rows.iter().all(|r| r.label() == Some(Label::ZERO)));
    assert!(rows.iter().all(|r| r.raw == "No."));
}

#[test]
fn hedged_reply_is_a_parse_failure_without_label() {
    let stub = Stub::replying("maybe");
    let rows = annotate_documents(&job(&stub, 4)).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.outcome, Outcome::ParseFailure);
        assert_eq!(r.label(), None);
        assert_eq!(r.raw, "maybe");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    write_annotations_csv(&rows, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",,maybe")), "{text}");
}

#[test]
fn rejected_credentials_fail_the_whole_job() {
    let stub = Stub::start(Duration::ZERO, |_, _| (401, "unauthorized".into()));
    match annotate_documents(&job(&stub, 5)) {
        Err(AnnotatorError::Auth { status: 401, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn transient_errors_are_retried() {
    // First two requests fail with 503, then the service recovers.
    let stub = Stub::start(Duration::ZERO, |k, _| if k < 2 { (503, String::new()) } else { (200, "Yes".into()) });
    let mut j = job(&stub, 1);
    j.max_retries = 3;
    let rows = annotate_documents(&j).unwrap();
    assert_eq!(rows[0].label(), Some(Label::ONE));
    assert_eq!(stub.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_server_errors_become_failure_rows() {
    let stub = Stub::start(Duration::ZERO, |_, _| (500, String::new()));
    let mut j = job(&stub, 3);
    j.max_retries = 2;
    let rows = annotate_documents(&j).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(matches!(r.outcome, Outcome::RequestFailed(_)), "{r:?}");
        assert_eq!(r.label(), None);
    }
    assert_eq!(stub.requests.load(Ordering::SeqCst), 3 * 3);
}

#[test]
fn unreachable_endpoint_yields_failure_rows() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let mut j = AnnotationJob::new(docs(2), Codebook::surface_form("protest"), format!("http://{addr}/v1/chat/completions"), "m");
    j.max_retries = 1;
    j.backoff = Duration::from_millis(1);
    let rows = annotate_documents(&j).unwrap();
    assert!(rows.iter().all(|r| matches!(r.outcome, Outcome::RequestFailed(_))));
}

#[test]
fn in_flight_requests_never_exceed_the_limit() {
    let stub = Stub::start(Duration::from_millis(40), |_, _| (200, "yes".into()));
    let mut j = job(&stub, 24);
    j.concurrency = 3;
    let rows = annotate_documents(&j).unwrap();
    assert_eq!(rows.len(), 24);
    let peak = stub.max_in_flight.load(Ordering::SeqCst);
    assert!(peak <= 3, "peak {peak}");
    assert!(peak >= 2, "requests were not concurrent (peak {peak})");
}

#[test]
fn request_body_carries_codebook_document_and_zero_temperature() {
    let stub = Stub::replying("yes");
    let j = job(&stub, 1);
    annotate_documents(&j).unwrap();
    let bodies = stub.bodies.lock().unwrap();
    let body = &bodies[0];
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["temperature"], 0);
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 2);
    assert_eq!(messages[0]["role"], "system");
    assert!(messages[0]["content"]
        .as_str()
        .unwrap()
        .contains("in-person public demonstration of three or more participants"));
    assert_eq!(messages[1]["role"], "user");
    assert_eq!(messages[1]["content"], j.documents[0].text.as_str());
}

#[test]
fn identical_replies_give_identical_files() {
    // Replies depend only on the document, not on arrival order.
    let answer = |_: usize, body: &Value| {
        let doc = body["messages"][1]["content"].as_str().unwrap_or("");
        let n: usize = doc.split_whitespace().nth(2).and_then(|t| t.trim_end_matches(':').parse().ok()).unwrap_or(0);
        (200, match n % 3 { 0 => "Yes.", 1 => "no", _ => "unclear" }.to_string())
    };
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (k, concurrency) in [1, 6].into_iter().enumerate() {
        let stub = Stub::start(Duration::from_millis(2), answer);
        let mut j = job(&stub, 30);
        j.concurrency = concurrency;
        let rows = annotate_documents(&j).unwrap();
        assert_eq!(rows.len(), 30);
        let path = dir.path().join(format!("run{k}.csv"));
        write_annotations_csv(&rows, &path).unwrap();
        files.push(fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files.remove(0)).unwrap();
    assert!(text.starts_with("id,llm_label,raw\ndoc0,1,Yes.\ndoc1,0,no\ndoc2,,unclear\n"), "{text}");
}

#[test]
fn duplicate_ids_are_rejected_before_any_request() {
    let stub = Stub::replying("yes");
    let mut j = job(&stub, 2);
    j.documents[1].id = j.documents[0].id.clone();
    assert!(matches!(annotate_documents(&j), Err(AnnotatorError::InvalidJob(_))));
    assert_eq!(stub.requests.load(Ordering::SeqCst), 0);
}
