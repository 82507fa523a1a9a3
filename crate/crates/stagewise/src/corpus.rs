//! The bundled transcript corpus: fixture lookup, consistency checks and a
//! scripted end-to-end session that drives the orchestrator with recorded
//! model output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use stagewise_core::labdata::{iteration_stats, StageCounts};
use stagewise_core::navigator::{
    advance_cursor, lint_turn, parse_navigator_output_with, split_navigator_sections, Advance, Lint, ParseOptions,
};
use stagewise_core::scope::{parse_scope_output, ScopeRequest};
use stagewise_core::{
    parse_cursor, Blueprint, Campaign, CampaignId, EventKind, Exemplar, Feedback, Phase, StageCursor,
    SENTINEL_PHRASE,
};

use std::sync::Arc;

use crate::engine::{EngineError, Orchestrator, TurnOutcome};
use crate::provider::{ScriptedProvider, TranscriptEntry};
use crate::store::EventStore;

pub const CORPUS_ENV: &str = "STAGEWISE_CORPUS";

/// Feedback recorded for turns that stay in their stage.
pub const CONTINUE_FEEDBACK: &str = "Done. The results are attached for review.";

/// Appended to a recorded response that lists only two task choices, so the
/// re-run of that turn can proceed.
pub const PLACEHOLDER_CHOICE: &str =
    "Task Choice 3: [not present in source figure; placeholder supplied by corpus replay]";

/// Turn at which the scripted session asks the executor for a brief, and the
/// choice it picks there.
const BRIEF_AT: (&str, &str, u8) = ("H", "2-1", 2);
const BRIEF_FIXTURE: &str = "executor/S41_output.txt";

#[derive(Debug, Clone, Copy)]
pub struct CorpusCampaign {
    pub name: &'static str,
    pub subject: &'static str,
    pub final_summary: &'static str,
}

pub const CAMPAIGNS: [CorpusCampaign; 4] = [
    CorpusCampaign { name: "H", subject: "BTB-H", final_summary: "summaries/S47_H.txt" },
    CorpusCampaign { name: "oF", subject: "BTB-oF", final_summary: "summaries/S82_oF.txt" },
    CorpusCampaign { name: "mF", subject: "BTB-mF", final_summary: "summaries/S112_mF.txt" },
    CorpusCampaign { name: "CH3", subject: "BTB-CH3", final_summary: "summaries/S139_CH3.txt" },
];

pub fn campaign_info(name: &str) -> Option<CorpusCampaign> {
    CAMPAIGNS.iter().copied().find(|c| c.name == name)
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus not found; set {CORPUS_ENV}")]
    NotFound,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error("unknown corpus campaign {0}")]
    UnknownCampaign(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexRow {
    pub figure: String,
    pub campaign: String,
    pub turn: u32,
    pub cursor: StageCursor,
    pub sentinel: bool,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
}

impl Corpus {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// `$STAGEWISE_CORPUS`, then `./corpus`, then the copy shipped in the
    /// source tree.
    pub fn locate() -> Result<Self, CorpusError> {
        let candidates = std::env::var_os(CORPUS_ENV)
            .map(PathBuf::from)
            .into_iter()
            .chain([PathBuf::from("corpus"), Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")]);
        for c in candidates {
            if c.join("navigator/index.csv").is_file() {
                return Ok(Self::new(c));
            }
        }
        Err(CorpusError::NotFound)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn read(&self, rel: &str) -> Result<String, CorpusError> {
        let path = self.path(rel);
        std::fs::read_to_string(&path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })
    }

    fn malformed(&self, rel: &str, message: impl Into<String>) -> CorpusError {
        CorpusError::Malformed { path: self.path(rel).display().to_string(), message: message.into() }
    }

    pub fn index(&self) -> Result<Vec<IndexRow>, CorpusError> {
        const REL: &str = "navigator/index.csv";
        let text = self.read(REL)?;
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |m: &str| self.malformed(REL, format!("line {}: {m}", n + 1));
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let sentinel = match f[4] {
                "sentinel" => true,
                "continue" => false,
                other => return Err(bad(&format!("feedback_after {other:?}"))),
            };
            rows.push(IndexRow {
                figure: f[0].into(),
                campaign: f[1].into(),
                turn: f[2].parse().map_err(|_| bad("turn is not a number"))?,
                cursor: parse_cursor(f[3]).map_err(|e| bad(&e.to_string()))?,
                sentinel,
            });
        }
        Ok(rows)
    }

    pub fn campaign_rows(&self, name: &str) -> Result<Vec<IndexRow>, CorpusError> {
        campaign_info(name).ok_or_else(|| CorpusError::UnknownCampaign(name.into()))?;
        Ok(self.index()?.into_iter().filter(|r| r.campaign == name).collect())
    }

    pub fn navigator_fixture(&self, figure: &str) -> Result<String, CorpusError> {
        self.read(&format!("navigator/{figure}.txt"))
    }

    pub fn scope_request(&self) -> Result<ScopeRequest, CorpusError> {
        const REL: &str = "scope/request.json";
        serde_json::from_str(&self.read(REL)?).map_err(|e| self.malformed(REL, e.to_string()))
    }

    pub fn blueprint(&self) -> Result<Blueprint, CorpusError> {
        const REL: &str = "scope/S38_output.txt";
        parse_scope_output(&self.read(REL)?).map_err(|e| self.malformed(REL, e.to_string()))
    }

    pub fn final_summary(&self, name: &str) -> Result<String, CorpusError> {
        let info = campaign_info(name).ok_or_else(|| CorpusError::UnknownCampaign(name.into()))?;
        self.read(info.final_summary)
    }

    /// Replays every recorded trajectory through the advance rule and the
    /// navigator parser.
    pub fn verify(&self) -> Result<VerifyReport, CorpusError> {
        let rows = self.index()?;
        let mut report = VerifyReport { turns: rows.len(), ..Default::default() };
        let options = ParseOptions::summary_elided();
        for info in CAMPAIGNS {
            let rows: Vec<&IndexRow> = rows.iter().filter(|r| r.campaign == info.name).collect();
            let mut cursor = StageCursor::START;
            let mut completed = false;
            let mut trajectory = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                let text = self.navigator_fixture(&row.figure)?;
                if completed {
                    report.cursor_mismatches.push(format!("{}: turn after completion", row.figure));
                }
                let printed = split_navigator_sections(&text)
                    .ok()
                    .and_then(|s| s.cursor)
                    .and_then(|c| parse_cursor(c.trim()).ok());
                if printed != Some(row.cursor) {
                    report.cursor_mismatches.push(format!("{}: index says {}, figure prints {printed:?}", row.figure, row.cursor));
                }
                if row.cursor != cursor {
                    report.cursor_mismatches.push(format!("{}: rule expects {cursor}, recorded {}", row.figure, row.cursor));
                }
                match parse_navigator_output_with(&text, options) {
                    Ok(out) => {
                        for lint in lint_turn(&out, cursor) {
                            if let Lint::CursorDivergence { .. } = lint {
                                report.divergences.push(format!("{}: {lint:?}", row.figure));
                            }
                        }
                    }
                    Err(e) => report.parse_failures.push(format!("{}: {e}", row.figure)),
                }
                trajectory.push(row.cursor);
                let feedback = Feedback::new(if row.sentinel { SENTINEL_PHRASE } else { CONTINUE_FEEDBACK });
                match advance_cursor(cursor, &feedback, 5) {
                    Advance::Moved(next) => cursor = next,
                    Advance::CampaignComplete => {
                        completed = true;
                        if i + 1 != rows.len() {
                            report.cursor_mismatches.push(format!("{}: completes before the last turn", row.figure));
                        }
                    }
                }
            }
            if completed {
                report.completed.push(info.name.into());
            } else {
                report.incomplete.push(info.name.into());
            }
            match iteration_stats(&trajectory) {
                Ok(stats) => report.stats.push((info.name.into(), stats)),
                Err(e) => report.cursor_mismatches.push(format!("{}: {e}", info.name)),
            }
        }
        Ok(report)
    }

    /// Recorded responses in the order a scripted session consumes them.
    pub fn session_transcript(&self, name: &str) -> Result<Vec<TranscriptEntry>, CorpusError> {
        let mut out = vec![TranscriptEntry::any_prompt(self.read("scope/S38_output.txt")?)];
        for row in self.campaign_rows(name)? {
            let text = self.navigator_fixture(&row.figure)?;
            let parses = parse_navigator_output_with(&text, ParseOptions::summary_elided()).is_ok();
            if !parses {
                out.push(TranscriptEntry::any_prompt(text.clone()));
                out.push(TranscriptEntry::any_prompt(format!("{}\n\n{PLACEHOLDER_CHOICE}\n", text.trim_end())));
            } else {
                out.push(TranscriptEntry::any_prompt(text));
            }
            if name == BRIEF_AT.0 && row.cursor.to_string() == BRIEF_AT.1 {
                out.push(TranscriptEntry::any_prompt(self.read(BRIEF_FIXTURE)?));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub turns: usize,
    pub cursor_mismatches: Vec<String>,
    pub divergences: Vec<String>,
    pub parse_failures: Vec<String>,
    pub completed: Vec<String>,
    pub incomplete: Vec<String>,
    pub stats: Vec<(String, StageCounts)>,
}

impl VerifyReport {
    pub fn parsed(&self) -> usize {
        self.turns - self.parse_failures.len()
    }

    pub fn is_clean(&self) -> bool {
        self.cursor_mismatches.is_empty()
            && self.divergences.is_empty()
            && self.parse_failures.is_empty()
            && self.incomplete.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "turns: {}", self.turns);
        let _ = writeln!(s, "cursor replay mismatches: {}", self.cursor_mismatches.len());
        for m in &self.cursor_mismatches {
            let _ = writeln!(s, "  {m}");
        }
        let _ = writeln!(s, "cursor divergences: {}", self.divergences.len());
        for m in &self.divergences {
            let _ = writeln!(s, "  {m}");
        }
        let _ = writeln!(s, "navigator parses: {}/{}", self.parsed(), self.turns);
        for m in &self.parse_failures {
            let _ = writeln!(s, "  {m}");
        }
        let _ = writeln!(s, "completed: {}", self.completed.join(", "));
        if !self.incomplete.is_empty() {
            let _ = writeln!(s, "incomplete: {}", self.incomplete.join(", "));
        }
        for (name, st) in &self.stats {
            let per: Vec<String> = st.per_stage.iter().map(u32::to_string).collect();
            let _ = writeln!(s, "{name}: {} total ({})", st.total, per.join("/"));
        }
        s
    }
}

/// What a scripted session did, for logging and assertions.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SessionLog {
    pub turns: usize,
    pub reruns: Vec<StageCursor>,
    pub briefs: Vec<StageCursor>,
}

/// Drives one corpus campaign end to end. The orchestrator's provider must
/// serve [`Corpus::session_transcript`] for the same campaign and parse with
/// [`ParseOptions::summary_elided`].
pub fn drive_session(
    orch: &Orchestrator,
    corpus: &Corpus,
    name: &str,
) -> Result<(Campaign, SessionLog), SessionError> {
    let info = campaign_info(name).ok_or_else(|| CorpusError::UnknownCampaign(name.into()))?;
    let id = CampaignId::new(name).expect("corpus names are valid ids");
    let exemplar = if name == "H" {
        None
    } else {
        Some(Exemplar { subject: "BTB-H".into(), summary: corpus.final_summary("H")?.trim().into() })
    };
    let stage_count = corpus.scope_request()?.stage_count_hint;
    orch.create_campaign(id.clone(), info.subject, stage_count, exemplar)?;
    orch.scope(&id, &corpus.scope_request()?)?;

    let mut log = SessionLog::default();
    for row in corpus.campaign_rows(name)? {
        let mut outcome = orch.run_turn(&id)?;
        if let TurnOutcome::Failed { .. } = outcome {
            log.reruns.push(row.cursor);
            outcome = orch.run_turn(&id)?;
        }
        let TurnOutcome::Parsed { turn } = outcome else {
            return Err(SessionError::Stuck(row.figure));
        };
        if turn.expected_cursor != row.cursor {
            return Err(SessionError::Stuck(row.figure));
        }
        log.turns += 1;
        let mut feedback = if row.sentinel { format!("{SENTINEL_PHRASE}.") } else { CONTINUE_FEEDBACK.to_string() };
        if name == BRIEF_AT.0 && row.cursor.to_string() == BRIEF_AT.1 {
            orch.choose(&id, BRIEF_AT.2)?;
            let brief = orch.brief(&id)?;
            let values: BTreeMap<String, String> =
                brief.slots.iter().map(|s| (s.clone(), format!("({s} recorded in lab notebook)"))).collect();
            let report = orch.fill_report(&id, &values)?;
            feedback = format!("{report}\n\n{feedback}");
            log.briefs.push(row.cursor);
        } else {
            orch.choose(&id, 1)?;
        }
        orch.feedback(&id, feedback)?;
    }
    Ok((orch.store().snapshot(&id).map_err(EngineError::from)?, log))
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("session stopped at {0}")]
    Stuck(String),
}

/// Directory under the corpus root holding blessed prompt renderings.
pub const GOLDEN_DIR: &str = "golden";

/// Prompts the scripted sessions render at fixed points, named by phase,
/// campaign and cursor. Sessions are written under `scratch`.
pub fn golden_prompts(corpus: &Corpus, scratch: &Path) -> Result<Vec<(String, String)>, SessionError> {
    const WANTED: [(&str, Phase, &str); 5] = [
        ("H", Phase::Scope, ""),
        ("H", Phase::Navigator, "1-1"),
        ("H", Phase::Navigator, "2-1"),
        ("H", Phase::Executor, "2-1"),
        ("oF", Phase::Navigator, "1-2"),
    ];
    let store = Arc::new(EventStore::open(scratch).map_err(EngineError::from)?);
    let mut out = Vec::new();
    for name in ["H", "oF"] {
        let provider = Arc::new(ScriptedProvider::new(corpus.session_transcript(name)?));
        let orch = Orchestrator::new(store.clone(), provider).with_parse_options(ParseOptions::summary_elided());
        drive_session(&orch, corpus, name)?;
        let id = CampaignId::new(name).expect("corpus names are valid ids");
        let events = store.events(&id).map_err(EngineError::from)?;
        let mut pending: Option<(Phase, &str)> = None;
        let mut cursor = String::new();
        for e in &events {
            let answered = match &e.kind {
                EventKind::PromptRendered { phase, prompt } => {
                    pending = Some((*phase, prompt));
                    continue;
                }
                EventKind::TurnParsed { expected_cursor, .. } => {
                    cursor = expected_cursor.to_string();
                    pending.take()
                }
                EventKind::BlueprintSet { .. } | EventKind::BriefParsed { .. } => pending.take(),
                _ => continue,
            };
            let Some((phase, text)) = answered else { continue };
            let at = if phase == Phase::Scope { "" } else { cursor.as_str() };
            if WANTED.contains(&(name, phase, at)) {
                let file = match phase {
                    Phase::Scope => format!("scope_{name}.txt"),
                    _ => format!("{}_{name}_{cursor}.txt", phase_name(phase)),
                };
                out.push((file, text.to_string()));
            }
        }
    }
    Ok(out)
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Scope => "scope",
        Phase::Navigator => "navigator",
        Phase::Executor => "executor",
    }
}
