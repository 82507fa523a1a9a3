//! Keeps provider credentials out of everything that gets persisted.

use serde::{de::DeserializeOwned, Serialize};

pub const REDACTED: &str = "[REDACTED]";

/// Replaces known secret strings wherever they occur.
#[derive(Debug, Clone, Default)]
pub struct Redactor {
    secrets: Vec<String>,
}

impl Redactor {
    /// Secrets shorter than four bytes are ignored; replacing them would
    /// mangle ordinary text.
    pub fn new(secrets: impl IntoIterator<Item = String>) -> Self {
        let mut secrets: Vec<String> = secrets.into_iter().filter(|s| s.len() >= 4).collect();
        secrets.sort_by_key(|s| std::cmp::Reverse(s.len()));
        Self { secrets }
    }

    /// Redactor for the value of environment variable `var`, if set.
    pub fn from_env(var: &str) -> Self {
        Self::new(std::env::var(var).ok())
    }

    pub fn is_empty(&self) -> bool {
        self.secrets.is_empty()
    }

    pub fn redact_str(&self, text: &str) -> String {
        let mut out = text.to_string();
        for s in &self.secrets {
            if out.contains(s.as_str()) {
                out = out.replace(s.as_str(), REDACTED);
            }
        }
        out
    }

    /// Round-trips `value` through JSON with secrets replaced. Fails if the
    /// redacted form no longer deserializes, e.g. a secret inside an id.
    pub fn scrub<T: Serialize + DeserializeOwned + Clone>(&self, value: &T) -> Result<T, serde_json::Error> {
        if self.secrets.is_empty() {
            return Ok(value.clone());
        }
        let json = serde_json::to_string(value).expect("value serializes");
        let mut changed = false;
        let mut out = json;
        for s in &self.secrets {
            // Match the secret as it appears inside a JSON string.
            let encoded = serde_json::to_string(s).expect("string serializes");
            let inner = &encoded[1..encoded.len() - 1];
            if out.contains(inner) {
                out = out.replace(inner, REDACTED);
                changed = true;
            }
        }
        if !changed {
            return Ok(value.clone());
        }
        serde_json::from_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scrubs_nested_strings() {
        let r = Redactor::new(["sk-secret-123".to_string(), "ab".to_string()]);
        assert_eq!(r.redact_str("key sk-secret-123 ab"), "key [REDACTED] ab");
        let v = vec!["x sk-secret-123".to_string()];
        assert_eq!(r.scrub(&v).unwrap(), vec!["x [REDACTED]".to_string()]);
    }
}
