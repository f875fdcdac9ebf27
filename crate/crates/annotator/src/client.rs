use std::collections::HashSet;
use std::env;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use annotinfer::Label;
use serde_json::{json, Value};

use crate::codebook::Codebook;
use crate::error::{AnnotatorError, Result};
use crate::parse::parse_response;
use crate::prompt::build_messages;

pub const API_KEY_ENV: &str = "ANNOTATOR_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnnotationJob {
    pub documents: Vec<Document>,
    pub codebook: Codebook,
    /// Full chat-completions URL, e.g. `http://localhost:8000/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Bearer token; [`AnnotationJob::new`] reads it from `ANNOTATOR_API_KEY`.
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub concurrency: usize,
    /// Delay before the first retry; doubled on each further attempt.
    pub backoff: Duration,
}

impl AnnotationJob {
    pub fn new(
        documents: Vec<Document>,
        codebook: Codebook,
        endpoint: impl Into<String>,
        model: impl Into<String>,
    ) -> Self {
        Self {
            documents,
            codebook,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            concurrency: 4,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.codebook.validate()?;
        if self.concurrency == 0 {
            return Err(AnnotatorError::InvalidJob("concurrency must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for d in &self.documents {
            if !seen.insert(d.id.as_str()) {
                return Err(AnnotatorError::InvalidJob(format!("duplicate document id '{}'", d.id)));
            }
            if d.text.trim().is_empty() {
                return Err(AnnotatorError::InvalidJob(format!("document '{}' is empty", d.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Labeled(Label),
    /// The service answered, but not with a leading yes/no.
    ParseFailure,
    /// No usable answer after all retries.
    RequestFailed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub id: String,
    pub outcome: Outcome,
    /// Model reply text, or the error description for failed requests.
    pub raw: String,
}

impl Annotation {
    pub fn label(&self) -> Option<Label> {
        match self.outcome {
            Outcome::Labeled(l) => Some(l),
            _ => None,
        }
    }
}

enum Attempt {
    Reply(String),
    Retryable(String),
    Fatal(String),
    Auth(u16),
}

fn request_once(agent: &ureq::Agent, job: &AnnotationJob, doc: &Document) -> Attempt {
    let messages: Vec<Value> = build_messages(&job.codebook, &doc.text)
        .into_iter()
        .map(|(role, content)| json!({ "role": role, "content": content }))
        .collect();
    let body = json!({
        "model": job.model,
        "messages": messages,
        "temperature": 0,
    });
    let mut req = agent.post(&job.endpoint).set("Content-Type", "application/json");
    if let Some(key) = &job.api_key {
        req = req.set("Authorization", &format!("Bearer {key}"));
    }
    match req.send_json(body) {
        Ok(resp) => match resp.into_json::<Value>() {
            Ok(v) => match v.pointer("/choices/0/message/content").and_then(Value::as_str) {
                Some(text) => Attempt::Reply(text.to_string()),
                None => Attempt::Fatal(format!("response has no choices[0].message.content: {v}")),
            },
            Err(e) => Attempt::Fatal(format!("malformed response body: {e}")),
        },
        Err(ureq::Error::Status(code, _)) if code == 401 || code == 403 => Attempt::Auth(code),
        Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => {
            Attempt::Retryable(format!("HTTP {code}"))
        }
        Err(ureq::Error::Status(code, _)) => Attempt::Fatal(format!("HTTP {code}")),
        Err(ureq::Error::Transport(t)) => Attempt::Retryable(t.to_string()),
    }
}

/// Annotates one document. `Err` only for authentication failures.
fn annotate_one(agent: &ureq::Agent, job: &AnnotationJob, doc: &Document) -> Result<Annotation> {
    let mut delay = job.backoff;
    let mut attempt = 0;
    let failure = loop {
        match request_once(agent, job, doc) {
            Attempt::Reply(raw) => {
                let outcome = match parse_response(&raw) {
                    Some(l) => Outcome::Labeled(l),
                    None => Outcome::ParseFailure,
                };
                return Ok(Annotation {
                    id: doc.id.clone(),
                    outcome,
                    raw,
                });
            }
            Attempt::Auth(status) => {
                return Err(AnnotatorError::Auth {
                    endpoint: job.endpoint.clone(),
                    status,
                })
            }
            Attempt::Fatal(msg) => break msg,
            Attempt::Retryable(msg) if attempt >= job.max_retries => {
                break format!("{msg} (after {} attempts)", attempt + 1)
            }
            Attempt::Retryable(_) => {
                thread::sleep(delay);
                delay = delay.saturating_mul(2);
                attempt += 1;
            }
        }
    };
    Ok(Annotation {
        id: doc.id.clone(),
        outcome: Outcome::RequestFailed(failure.clone()),
        raw: failure,
    })
}

/// Labels every document of `job`, returning one row per document in input
/// order. At most `job.concurrency` requests are in flight at once.
///
/// Unparseable replies and exhausted retries become explicit rows without a
/// label; an authentication failure aborts the whole job.
pub fn annotate_documents(job: &AnnotationJob) -> Result<Vec<Annotation>> {
    job.validate()?;
    let agent = ureq::AgentBuilder::new().timeout(job.timeout).build();
    let n = job.documents.len();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Annotation>>> = Mutex::new(vec![None; n]);
    let auth_error: Mutex<Option<AnnotatorError>> = Mutex::new(None);

    thread::scope(|s| {
        for _ in 0..job.concurrency.min(n) {
            s.spawn(|| loop {
                if auth_error.lock().unwrap().is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    return;
                }
                match annotate_one(&agent, job, &job.documents[i]) {
                    Ok(a) => slots.lock().unwrap()[i] = Some(a),
                    Err(e) => {
                        auth_error.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });

    if let Some(e) = auth_error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|a| a.expect("every document is processed"))
        .collect())
}

/// Reads documents from a CSV with header `id,text`.
pub fn read_documents<R: Read>(reader: R) -> Result<Vec<Document>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["id", "text"] {
        return Err(AnnotatorError::Parse {
            line: 1,
            reason: format!("header must be id,text; got {}", header.join(",")),
        });
    }
    let mut docs = Vec::new();
    for row in rdr.records() {
        let row = row?;
        docs.push(Document::new(&row[0], &row[1]));
    }
    Ok(docs)
}

pub fn read_documents_csv(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    read_documents(fs::File::open(path)?)
}

/// Writes `id,llm_label,raw`; the label cell is empty when no label was obtained.
pub fn write_annotations<W: Write>(rows: &[Annotation], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["id", "llm_label", "raw"])?;
    for a in rows {
        let label = a.label().map(|l| l.to_string()).unwrap_or_default();
        w.write_record([a.id.as_str(), label.as_str(), a.raw.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_annotations_csv(rows: &[Annotation], path: impl AsRef<Path>) -> Result<()> {
    write_annotations(rows, fs::File::create(path)?)
}
