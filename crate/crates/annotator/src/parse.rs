use annotinfer::Label;

/// Reads a leading `yes` / `no` from a model reply.
///
/// Leading whitespace, quotes and markdown emphasis are skipped and case is
/// ignored; the word must end at a non-alphanumeric character. Anything else
/// (hedges, other words, empty replies) yields `None`.
pub fn parse_response(raw: &str) -> Option<Label> {
    let s = raw
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '*' | '`' | '_'))
        .to_lowercase();
    for (word, label) in [("yes", Label::ONE), ("no", Label::ZERO)] {
        if let Some(rest) = s.strip_prefix(word) {
            if !rest.chars().next().is_some_and(char::is_alphanumeric) {
                return Some(label);
            }
        }
    }
    None
}
