use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AnnotatorError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefinitionType {
    /// Only the class label itself, e.g. "protest".
    SurfaceForm,
    /// A general-purpose dictionary sense.
    Dictionary,
    /// A bespoke, task-specific definition.
    Stipulative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    pub name: String,
    pub definition_type: DefinitionType,
    pub definition_text: String,
}

const FIXTURES: [(&str, &str); 5] = [
    ("ace", include_str!("../codebooks/ace.json")),
    ("acled", include_str!("../codebooks/acled.json")),
    ("cameo", include_str!("../codebooks/cameo.json")),
    ("ccc", include_str!("../codebooks/ccc.json")),
    ("protest_surface", include_str!("../codebooks/protest_surface.json")),
];

impl Codebook {
    pub fn surface_form(label: impl Into<String>) -> Self {
        let label = label.into();
        Self {
            name: label.clone(),
            definition_type: DefinitionType::SurfaceForm,
            definition_text: label,
        }
    }

    /// Surface-form codebooks may contain nothing but the label token(s).
    pub fn validate(&self) -> Result<()> {
        if self.definition_text.trim().is_empty() {
            return Err(AnnotatorError::InvalidCodebook(format!(
                "codebook '{}' has an empty definition",
                self.name
            )));
        }
        if self.definition_type == DefinitionType::SurfaceForm {
            let label: Vec<String> = tokens(&self.name);
            let extra = tokens(&self.definition_text)
                .into_iter()
                .find(|t| !label.contains(t));
            if let Some(t) = extra {
                return Err(AnnotatorError::InvalidCodebook(format!(
                    "surface-form codebook '{}' contains non-label token '{t}'",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Names of the bundled protest codebooks.
    pub fn fixture_names() -> impl Iterator<Item = &'static str> {
        FIXTURES.iter().map(|(n, _)| *n)
    }

    pub fn fixture(name: &str) -> Result<Self> {
        let (_, json) = FIXTURES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| AnnotatorError::InvalidCodebook(format!("no bundled codebook '{name}'")))?;
        let cb: Codebook = serde_json::from_str(json)?;
        cb.validate()?;
        Ok(cb)
    }

    /// Loads a codebook JSON file, or a bundled fixture when `spec` is a fixture name.
    pub fn load(spec: &str) -> Result<Self> {
        if Self::fixture_names().any(|n| n == spec) {
            return Self::fixture(spec);
        }
        let cb: Codebook = serde_json::from_slice(&fs::read(Path::new(spec))?)?;
        cb.validate()?;
        Ok(cb)
    }
}

fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_load() {
        for name in Codebook::fixture_names() {
            Codebook::fixture(name).unwrap();
        }
        let acled = Codebook::fixture("acled").unwrap();
        assert_eq!(acled.definition_type, DefinitionType::Stipulative);
        assert!(acled
            .definition_text
            .contains("in-person public demonstration of three or more participants"));
        assert!(Codebook::fixture("nope").is_err());
    }

    #[test]
    fn surface_form_rejects_extra_tokens() {
        assert!(Codebook::surface_form("protest").validate().is_ok());
        let bad = Codebook {
            definition_text: "protest, excluding violent events".into(),
            ..Codebook::surface_form("protest")
        };
        assert!(bad.validate().is_err());
    }
}
