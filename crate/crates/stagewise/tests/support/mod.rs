//! Shared test fixtures.
#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use stagewise::corpus::{drive_session, Corpus, SessionLog};
use stagewise::engine::Orchestrator;
use stagewise::provider::ScriptedProvider;
use stagewise::store::EventStore;
use stagewise_core::navigator::ParseOptions;
use stagewise_core::text::detect_sentinel;
use stagewise_core::{parse_cursor, Campaign, ChatProvider, ProviderError};

/// A stand-in probe model that follows only the cursor rules its prompt
/// actually states. It always adds one to the iteration, and moves to the
/// next stage only if the instructions mention the advance phrase and the
/// human feedback contains it.
pub struct RuleFollowingNavigator;

fn field<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.trim().strip_prefix(label)).map(str::trim)
}

impl ChatProvider for RuleFollowingNavigator {
    fn chat(&self, prompt: &str) -> Result<String, ProviderError> {
        let split = prompt
            .rfind("Current Summary:")
            .ok_or_else(|| ProviderError::TransportFailure("probe prompt has no inputs".into()))?;
        let (instructions, inputs) = prompt.split_at(split);
        let last = field(inputs, "Last Iteration:")
            .and_then(|c| parse_cursor(c).ok())
            .ok_or_else(|| ProviderError::TransportFailure("no last iteration".into()))?;
        let feedback = field(inputs, "Human Feedback:").unwrap_or("");
        let next = if detect_sentinel(instructions) && detect_sentinel(feedback) {
            last.next_stage()
        } else {
            last.next_iteration()
        };
        Ok(format!("Output Summary: (omitted)\n\nCurrent Stage and Iteration: {next}\n"))
    }
}

/// The inputs block of the refinery probe figure, from its first
/// "Current Summary:" line through the human feedback.
pub fn probe_input(corpus: &Corpus) -> String {
    let text = corpus.read("refinery/S44_probe.txt").unwrap();
    let start = text.find("Current Summary:").unwrap();
    let end = text[start..].find("Human Feedback:").unwrap() + start;
    let end = end + text[end..].find('\n').unwrap_or(text.len() - end);
    text[start..end].trim().to_string()
}

/// Runs a full scripted corpus session into `dir`.
pub fn scripted_session(corpus: &Corpus, name: &str, dir: &Path) -> (Arc<EventStore>, Campaign, SessionLog) {
    let store = Arc::new(EventStore::open(dir).unwrap());
    let provider = Arc::new(ScriptedProvider::new(corpus.session_transcript(name).unwrap()));
    let orch = Orchestrator::new(store.clone(), provider).with_parse_options(ParseOptions::summary_elided());
    let (campaign, log) = drive_session(&orch, corpus, name).unwrap();
    (store, campaign, log)
}
