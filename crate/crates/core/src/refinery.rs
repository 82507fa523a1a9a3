//! Interactive prompt refinement: a writer model drafts a prompt, a fresh
//! probe model is run against it, and a human verdict either accepts the
//! draft or sends a revision note back to the writer.
//!
//! Provider calls produce [`SessionEvent`]s; [`RefinementSession::apply`]
//! folds them, so a session log replays to the same state.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::provider::{ChatProvider, ProviderError};
use crate::template::PromptTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Some line of the output, trimmed, equals the pattern.
    Line,
    Substring,
}

/// What the probe output must contain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub pattern: String,
    pub mode: MatchMode,
}

impl Expectation {
    pub fn line(pattern: impl Into<String>) -> Self {
        Self { pattern: pattern.into(), mode: MatchMode::Line }
    }

    pub fn substring(pattern: impl Into<String>) -> Self {
        Self { pattern: pattern.into(), mode: MatchMode::Substring }
    }

    pub fn matches(&self, output: &str) -> bool {
        let pattern = self.pattern.trim();
        match self.mode {
            MatchMode::Line => output.lines().any(|l| l.trim() == pattern),
            MatchMode::Substring => output.contains(pattern),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Revise { note: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub input: String,
    pub output: String,
    pub expected: Expectation,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub writer_prompt: String,
    pub candidate: String,
    pub probe: Option<Probe>,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Open,
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum SessionEvent {
    Started { target: String, goal_statement: String, max_rounds: Option<usize> },
    CandidateComposed { writer_prompt: String, candidate: String },
    Probed { probe: Probe },
    VerdictRecorded { verdict: Verdict },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RefineryError {
    #[error("the goal statement is empty")]
    EmptyGoal,
    #[error("the session is already accepted")]
    SessionClosed,
    #[error("no candidate prompt has been composed yet")]
    NoCandidate,
    #[error("the latest candidate has not been probed yet")]
    NoProbeYet,
    #[error("the latest round already has a verdict")]
    VerdictGiven,
    #[error("the previous round needs a verdict first")]
    AwaitingVerdict,
    #[error("round limit of {0} reached")]
    RoundLimit(usize),
    #[error("the writer returned an empty prompt")]
    EmptyCandidate,
    #[error("session log must start with Started")]
    NotStarted,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementSession {
    /// Name the accepted prompt is exported under.
    pub target: String,
    pub goal_statement: String,
    pub max_rounds: Option<usize>,
    rounds: Vec<Round>,
    status: SessionStatus,
}

impl RefinementSession {
    pub fn start(
        target: impl Into<String>,
        goal_statement: impl Into<String>,
        max_rounds: Option<usize>,
    ) -> Result<(Self, SessionEvent), RefineryError> {
        let event = SessionEvent::Started {
            target: target.into(),
            goal_statement: goal_statement.into(),
            max_rounds,
        };
        let session = Self::from_started(&event)?;
        Ok((session, event))
    }

    fn from_started(event: &SessionEvent) -> Result<Self, RefineryError> {
        let SessionEvent::Started { target, goal_statement, max_rounds } = event else {
            return Err(RefineryError::NotStarted);
        };
        if goal_statement.trim().is_empty() {
            return Err(RefineryError::EmptyGoal);
        }
        Ok(Self {
            target: target.clone(),
            goal_statement: goal_statement.clone(),
            max_rounds: *max_rounds,
            rounds: Vec::new(),
            status: SessionStatus::Open,
        })
    }

    pub fn replay<'a>(events: impl IntoIterator<Item = &'a SessionEvent>) -> Result<Self, RefineryError> {
        let mut iter = events.into_iter();
        let mut session = Self::from_started(iter.next().ok_or(RefineryError::NotStarted)?)?;
        for e in iter {
            session.apply(e)?;
        }
        Ok(session)
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    fn open(&self) -> Result<(), RefineryError> {
        match self.status {
            SessionStatus::Open => Ok(()),
            SessionStatus::Accepted => Err(RefineryError::SessionClosed),
        }
    }

    /// Revision notes from all rounds so far.
    pub fn revision_notes(&self) -> Vec<&str> {
        self.rounds
            .iter()
            .filter_map(|r| match &r.verdict {
                Some(Verdict::Revise { note }) => Some(note.as_str()),
                _ => None,
            })
            .collect()
    }

    /// The writer request for the next round: the goal on the first round,
    /// afterwards every revision note followed by the latest candidate.
    pub fn writer_prompt(&self) -> String {
        let Some(last) = self.rounds.last() else {
            return self.goal_statement.trim().to_string();
        };
        let mut out = self.revision_notes().join("\n\n");
        out.push_str("\n\nPrompt:\n\n\"\"\n\n");
        out.push_str(last.candidate.trim());
        out.push_str("\n\n\"\"\n");
        out
    }

    fn check(&self, event: &SessionEvent) -> Result<(), RefineryError> {
        match event {
            SessionEvent::Started { .. } => Err(RefineryError::NotStarted),
            SessionEvent::CandidateComposed { candidate, .. } => {
                self.open()?;
                if self.rounds.last().is_some_and(|r| r.verdict.is_none()) {
                    return Err(RefineryError::AwaitingVerdict);
                }
                if let Some(max) = self.max_rounds {
                    if self.rounds.len() >= max {
                        return Err(RefineryError::RoundLimit(max));
                    }
                }
                if candidate.trim().is_empty() {
                    return Err(RefineryError::EmptyCandidate);
                }
                Ok(())
            }
            SessionEvent::Probed { .. } => {
                self.open()?;
                match self.rounds.last() {
                    None => Err(RefineryError::NoCandidate),
                    Some(r) if r.verdict.is_some() => Err(RefineryError::VerdictGiven),
                    Some(_) => Ok(()),
                }
            }
            SessionEvent::VerdictRecorded { .. } => {
                self.open()?;
                match self.rounds.last() {
                    None => Err(RefineryError::NoProbeYet),
                    Some(r) if r.probe.is_none() => Err(RefineryError::NoProbeYet),
                    Some(r) if r.verdict.is_some() => Err(RefineryError::VerdictGiven),
                    Some(_) => Ok(()),
                }
            }
        }
    }

    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), RefineryError> {
        self.check(event)?;
        match event {
            SessionEvent::Started { .. } => {}
            SessionEvent::CandidateComposed { writer_prompt, candidate } => self.rounds.push(Round {
                writer_prompt: writer_prompt.clone(),
                candidate: candidate.clone(),
                probe: None,
                verdict: None,
            }),
            SessionEvent::Probed { probe } => {
                if let Some(r) = self.rounds.last_mut() {
                    r.probe = Some(probe.clone());
                }
            }
            SessionEvent::VerdictRecorded { verdict } => {
                if let Some(r) = self.rounds.last_mut() {
                    r.verdict = Some(verdict.clone());
                }
                if *verdict == Verdict::Accept {
                    self.status = SessionStatus::Accepted;
                }
            }
        }
        Ok(())
    }

    /// Asks the writer for the next candidate. Nothing changes on error.
    pub fn compose_candidate(&mut self, writer: &dyn ChatProvider) -> Result<SessionEvent, RefineryError> {
        self.open()?;
        let writer_prompt = self.writer_prompt();
        // Validate before spending a provider call.
        self.check(&SessionEvent::CandidateComposed { writer_prompt: String::new(), candidate: "x".into() })?;
        let reply = writer.chat(&writer_prompt)?;
        let event = SessionEvent::CandidateComposed { writer_prompt, candidate: extract_candidate(&reply) };
        self.apply(&event)?;
        Ok(event)
    }

    /// Runs the latest candidate on a fresh probe call. A provider error
    /// leaves the round as it was.
    pub fn probe_candidate(
        &mut self,
        probe_input: &str,
        expected: Expectation,
        probe: &dyn ChatProvider,
    ) -> Result<SessionEvent, RefineryError> {
        self.check(&SessionEvent::Probed {
            probe: Probe {
                input: String::new(),
                output: String::new(),
                expected: expected.clone(),
                matched: false,
            },
        })?;
        let candidate = &self.rounds.last().ok_or(RefineryError::NoCandidate)?.candidate;
        let output = probe.chat(&probe_prompt(candidate, probe_input))?;
        let matched = expected.matches(&output);
        let event = SessionEvent::Probed {
            probe: Probe { input: probe_input.to_string(), output, expected, matched },
        };
        self.apply(&event)?;
        Ok(event)
    }

    /// Records the human verdict. Accepting returns the exported template.
    pub fn record_verdict(&mut self, verdict: Verdict) -> Result<(SessionEvent, Option<PromptTemplate>), RefineryError> {
        let event = SessionEvent::VerdictRecorded { verdict };
        self.apply(&event)?;
        Ok((event, self.exported_template()))
    }

    /// The accepted candidate, named `<target>-v<round>`.
    pub fn exported_template(&self) -> Option<PromptTemplate> {
        if self.status != SessionStatus::Accepted {
            return None;
        }
        let last = self.rounds.last()?;
        Some(PromptTemplate::new(format!("{}-v{}", self.target, self.rounds.len()), last.candidate.trim()))
    }
}

/// Candidate followed by the probe input, as one message.
pub fn probe_prompt(candidate: &str, probe_input: &str) -> String {
    format!("{}\n\n{}", candidate.trim_end(), probe_input.trim_start())
}

/// Pulls the drafted prompt out of a writer reply: drops a one-line
/// lead-in that introduces "the prompt" and ends in a colon, and unwraps a
/// reply fenced in `""` lines.
pub fn extract_candidate(reply: &str) -> String {
    let mut body = reply.trim();
    if let Some((first, rest)) = body.split_once("\n\n") {
        let first = first.trim();
        if !first.contains('\n') && first.ends_with(':') && first.to_lowercase().contains("prompt") {
            body = rest.trim();
        }
    }
    if let Some(inner) = body.strip_prefix("\"\"").and_then(|b| b.strip_suffix("\"\"")) {
        body = inner.trim();
    }
    body.to_string()
}
