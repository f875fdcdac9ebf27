use crate::codebook::Codebook;

pub const ANSWER_INSTRUCTION: &str = "Answer with exactly one word: yes or no.";

/// Full single-string prompt: definition, document, then the answer instruction.
pub fn build_prompt(codebook: &Codebook, document: &str) -> String {
    format!(
        "{}\n\n{}\n\n{}",
        codebook.definition_text.trim(),
        document.trim(),
        ANSWER_INSTRUCTION
    )
}

/// Chat form of the same prompt: the system message carries the codebook and
/// the instruction, the user message carries the document.
pub fn build_messages(codebook: &Codebook, document: &str) -> [(&'static str, String); 2] {
    [
        (
            "system",
            format!("{}\n\n{}", codebook.definition_text.trim(), ANSWER_INSTRUCTION),
        ),
        ("user", document.trim().to_string()),
    ]
}
