//! The `(stage, iteration)` progress coordinate and its textual form.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Position of a campaign: 1-based stage and 1-based iteration within it.
///
/// Rendered as `"<stage>-<iteration>"`, e.g. `2-6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StageCursor {
    stage: u32,
    iteration: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CursorError {
    #[error("malformed stage cursor {0:?}")]
    Malformed(String),
    #[error("stage and iteration must both be at least 1 (got {stage}-{iteration})")]
    ZeroComponent { stage: u32, iteration: u32 },
}

impl StageCursor {
    pub const START: StageCursor = StageCursor { stage: 1, iteration: 1 };

    pub fn new(stage: u32, iteration: u32) -> Result<Self, CursorError> {
        if stage == 0 || iteration == 0 {
            return Err(CursorError::ZeroComponent { stage, iteration });
        }
        Ok(Self { stage, iteration })
    }

    pub fn stage(self) -> u32 {
        self.stage
    }

    pub fn iteration(self) -> u32 {
        self.iteration
    }

    /// Same stage, one more iteration.
    pub fn next_iteration(self) -> Self {
        Self { stage: self.stage, iteration: self.iteration + 1 }
    }

    /// First iteration of the following stage.
    pub fn next_stage(self) -> Self {
        Self { stage: self.stage + 1, iteration: 1 }
    }
}

impl fmt::Display for StageCursor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.stage, self.iteration)
    }
}

impl FromStr for StageCursor {
    type Err = CursorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_cursor(s)
    }
}

impl TryFrom<String> for StageCursor {
    type Error = CursorError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        parse_cursor(&value)
    }
}

impl From<StageCursor> for String {
    fn from(c: StageCursor) -> String {
        c.to_string()
    }
}

/// Accepted spellings of the separator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CursorSyntax {
    /// Treat typographic dashes (en/em dash, minus sign, Unicode hyphens) as `-`.
    pub normalize_dashes: bool,
}

pub fn format_cursor(cursor: StageCursor) -> String {
    format!("{cursor}")
}

/// Strict parse: ASCII hyphen only.
pub fn parse_cursor(text: &str) -> Result<StageCursor, CursorError> {
    parse_cursor_with(text, CursorSyntax::default())
}

pub fn parse_cursor_with(text: &str, syntax: CursorSyntax) -> Result<StageCursor, CursorError> {
    let trimmed = text.trim();
    let normalized: String;
    let body = if syntax.normalize_dashes {
        normalized = trimmed
            .chars()
            .map(|c| match c {
                '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2212}' => '-',
                other => other,
            })
            .collect();
        normalized.as_str()
    } else {
        trimmed
    };

    let malformed = || CursorError::Malformed(text.to_string());
    let (stage, iteration) = body.split_once('-').ok_or_else(malformed)?;
    let stage = parse_component(stage).ok_or_else(malformed)?;
    let iteration = parse_component(iteration).ok_or_else(malformed)?;
    StageCursor::new(stage, iteration)
}

fn parse_component(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}
