//! Document annotation through an OpenAI-compatible chat-completions service.
//!
//! A [`Codebook`] supplies the class definition; each document is sent with
//! that definition and a fixed yes/no instruction, and the reply is parsed
//! into a binary [`Label`](annotinfer::Label). Replies that are not a clear
//! yes or no are kept as parse failures rather than guessed.

mod client;
mod codebook;
mod error;
mod parse;
mod prompt;

pub use client::{
    annotate_documents, read_documents, read_documents_csv, write_annotations,
    write_annotations_csv, Annotation, AnnotationJob, Document, Outcome, API_KEY_ENV,
};
pub use codebook::{Codebook, DefinitionType};
pub use error::{AnnotatorError, Result};
pub use parse::parse_response;
pub use prompt::{build_messages, build_prompt, ANSWER_INSTRUCTION};
