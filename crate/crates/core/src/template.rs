//! Prompt templates with `{name}` placeholders.
//!
//! Substitution is a single left-to-right pass: only the placeholder names
//! the caller supplies are replaced, substituted values are never rescanned,
//! and any other brace text is copied through untouched. The same template
//! and values always give the same bytes.

use alloc::string::String;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        Self { name: name.into(), body: body.into() }
    }

    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        substitute(&self.body, vars)
    }

    /// Whether the body mentions `{name}`.
    pub fn has_placeholder(&self, name: &str) -> bool {
        let mut needle = String::with_capacity(name.len() + 2);
        needle.push('{');
        needle.push_str(name);
        needle.push('}');
        self.body.contains(&needle)
    }
}

pub fn substitute(body: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(body.len() + 256);
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (*v, close))
        });
        match replaced {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_known_names_only() {
        let t = PromptTemplate::new("t", "Hi {who}, see {other} and {who}.");
        assert_eq!(t.render(&[("who", "Ann")]), "Hi Ann, see {other} and Ann.");
        assert!(t.has_placeholder("other"));
    }

    #[test]
    fn values_are_not_rescanned() {
        assert_eq!(substitute("{a}{b}", &[("a", "{b}"), ("b", "x")]), "{b}x");
        assert_eq!(substitute("{ {a} }", &[("a", "1")]), "{ 1 }");
        assert_eq!(substitute("unclosed {a", &[("a", "1")]), "unclosed {a");
    }
}
