//! Runs campaign phases against a provider and records every step in the
//! event store.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use stagewise_core::campaign::TurnRecord;
use stagewise_core::executor::{
    default_executor_template, instantiate_report, parse_executor_output, render_executor_prompt_with,
    ExecutorError,
};
use stagewise_core::navigator::{
    advance_cursor, default_navigator_template, lint_turn, parse_navigator_output_with, render_navigator_prompt_with,
    Advance, NavigatorError, ParseOptions,
};
use stagewise_core::scope::{
    default_scope_template, parse_scope_output, render_scope_prompt_with, ScopeError, ScopeRequest,
};
use stagewise_core::labdata::{iteration_stats, StageCounts};
use stagewise_core::rubric::{aggregate, RubricError, RubricReport};
use stagewise_core::template::PromptTemplate;
use stagewise_core::{
    Blueprint, Campaign, CampaignId, CampaignStatus, ChatProvider, Event, EventKind, Exemplar, ExecutorBrief,
    Feedback, LoopState, Phase, ProviderError, RubricScore,
};

use crate::store::{EventStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("could not parse the scope response: {0}")]
    Scope(#[from] ScopeError),
    #[error("could not parse the navigator response: {0}")]
    Navigator(#[from] NavigatorError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error("a provider call for campaign {0} is already in flight")]
    TurnInFlight(CampaignId),
    #[error("campaign {id} is {status:?}; {action} needs it Active")]
    NotActive { id: CampaignId, status: CampaignStatus, action: &'static str },
    #[error("no task has been chosen for the current turn")]
    NoChoice,
    #[error("no executor brief for the current turn")]
    NoBrief,
    #[error("stored trajectory does not follow the advance rule: {0}")]
    Trajectory(String),
}

impl EngineError {
    /// Whether this is a state conflict rather than bad input or a failure.
    pub fn is_conflict(&self) -> bool {
        matches!(
            self,
            EngineError::TurnInFlight(_)
                | EngineError::NotActive { .. }
                | EngineError::NoChoice
                | EngineError::NoBrief
                | EngineError::Store(StoreError::IllegalTransition(_))
                | EngineError::Store(StoreError::AlreadyExists(_))
        )
    }
}

/// Prompt templates for the three phases.
#[derive(Debug, Clone)]
pub struct Templates {
    pub scope: PromptTemplate,
    pub navigator: PromptTemplate,
    pub executor: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            scope: default_scope_template(),
            navigator: default_navigator_template(),
            executor: default_executor_template(),
        }
    }
}

impl Templates {
    /// Defaults, overridden by `scope.txt`, `navigator.txt` or
    /// `executor.txt` found in `dir`.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        for (name, slot) in [("scope", &mut t.scope), ("navigator", &mut t.navigator), ("executor", &mut t.executor)] {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = PromptTemplate::new(name, std::fs::read_to_string(path)?);
            }
        }
        Ok(t)
    }
}

/// Releases the in-flight slot on drop.
pub struct InFlight {
    set: Arc<Mutex<HashSet<CampaignId>>>,
    id: CampaignId,
}

impl Drop for InFlight {
    fn drop(&mut self) {
        self.set.lock().expect("in-flight set poisoned").remove(&self.id);
    }
}

/// What a navigator turn produced.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TurnOutcome {
    Parsed { turn: TurnRecord },
    /// The response was recorded but did not parse; the campaign is
    /// unchanged and the turn can be re-run.
    Failed { error: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct FeedbackOutcome {
    pub advance: Advance,
    pub status: CampaignStatus,
}

pub struct Orchestrator {
    store: Arc<EventStore>,
    provider: Arc<dyn ChatProvider>,
    templates: Templates,
    parse: ParseOptions,
    in_flight: Arc<Mutex<HashSet<CampaignId>>>,
}

impl Orchestrator {
    pub fn new(store: Arc<EventStore>, provider: Arc<dyn ChatProvider>) -> Self {
        Self {
            store,
            provider,
            templates: Templates::default(),
            parse: ParseOptions::strict(),
            in_flight: Arc::new(Mutex::new(HashSet::new())),
        }
    }

    pub fn with_templates(mut self, templates: Templates) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_parse_options(mut self, parse: ParseOptions) -> Self {
        self.parse = parse;
        self
    }

    pub fn store(&self) -> &Arc<EventStore> {
        &self.store
    }

    /// Claims the single provider slot of a campaign.
    pub fn reserve(&self, id: &CampaignId) -> Result<InFlight, EngineError> {
        let mut set = self.in_flight.lock().expect("in-flight set poisoned");
        if !set.insert(id.clone()) {
            return Err(EngineError::TurnInFlight(id.clone()));
        }
        Ok(InFlight { set: self.in_flight.clone(), id: id.clone() })
    }

    fn append(&self, id: &CampaignId, kind: EventKind) -> Result<(Event, Campaign), EngineError> {
        Ok(self.store.append(id, kind)?)
    }

    pub fn create_campaign(
        &self,
        id: CampaignId,
        subject: impl Into<String>,
        stage_count: u32,
        exemplar: Option<Exemplar>,
    ) -> Result<Campaign, EngineError> {
        let kind = EventKind::CampaignCreated { id, subject: subject.into(), stage_count, exemplar };
        Ok(self.store.create(kind)?.1)
    }

    pub fn set_blueprint(&self, id: &CampaignId, blueprint: Blueprint) -> Result<Campaign, EngineError> {
        Ok(self.append(id, EventKind::BlueprintSet { blueprint })?.1)
    }

    /// Whether `phase` can be run now; lets callers refuse before any
    /// provider work starts.
    pub fn precheck(&self, id: &CampaignId, phase: Phase) -> Result<Campaign, EngineError> {
        let campaign = self.store.snapshot(id)?;
        match phase {
            Phase::Scope => {}
            Phase::Navigator if campaign.status() != CampaignStatus::Active => {
                return Err(EngineError::NotActive { id: id.clone(), status: campaign.status(), action: "a turn" });
            }
            Phase::Navigator => {}
            Phase::Executor => {
                if !matches!(campaign.loop_state(), LoopState::AwaitingFeedback { .. }) {
                    return Err(EngineError::NoChoice);
                }
            }
        }
        campaign.check(&EventKind::PromptRendered { phase, prompt: String::new() }).map_err(StoreError::from)?;
        Ok(campaign)
    }

    /// Runs the scoping phase. A response that does not parse is recorded
    /// as a failed turn and returned as an error.
    pub fn scope(&self, id: &CampaignId, req: &ScopeRequest) -> Result<Campaign, EngineError> {
        let _slot = self.reserve(id)?;
        self.scope_reserved(id, req)
    }

    pub fn scope_reserved(&self, id: &CampaignId, req: &ScopeRequest) -> Result<Campaign, EngineError> {
        self.precheck(id, Phase::Scope)?;
        let prompt = render_scope_prompt_with(&self.templates.scope, req)?;
        let text = self.provider.chat(&prompt)?;
        self.append(id, EventKind::PromptRendered { phase: Phase::Scope, prompt })?;
        self.append(id, EventKind::ModelResponded { phase: Phase::Scope, text: text.clone() })?;
        match parse_scope_output(&text) {
            Ok(blueprint) => Ok(self.append(id, EventKind::BlueprintSet { blueprint })?.1),
            Err(e) => {
                self.append(id, EventKind::TurnFailed { phase: Phase::Scope, error: e.to_string() })?;
                Err(e.into())
            }
        }
    }

    /// One navigator round trip. Provider errors leave no trace in the log.
    pub fn run_turn(&self, id: &CampaignId) -> Result<TurnOutcome, EngineError> {
        let _slot = self.reserve(id)?;
        self.run_turn_reserved(id)
    }

    pub fn run_turn_reserved(&self, id: &CampaignId) -> Result<TurnOutcome, EngineError> {
        let campaign = self.precheck(id, Phase::Navigator)?;
        let prompt = render_navigator_prompt_with(
            &self.templates.navigator,
            campaign.prompt_context()?,
            &campaign.navigator_input(),
        );
        let text = self.provider.chat(&prompt)?;
        self.append(id, EventKind::PromptRendered { phase: Phase::Navigator, prompt })?;
        self.append(id, EventKind::ModelResponded { phase: Phase::Navigator, text: text.clone() })?;
        match parse_navigator_output_with(&text, self.parse) {
            Ok(output) => {
                let expected = campaign.cursor();
                let lints = lint_turn(&output, expected);
                let (_, c) = self.append(id, EventKind::TurnParsed { output, expected_cursor: expected, lints })?;
                Ok(TurnOutcome::Parsed { turn: c.current_turn().cloned().expect("turn just parsed") })
            }
            Err(e) => {
                self.append(id, EventKind::TurnFailed { phase: Phase::Navigator, error: e.to_string() })?;
                Ok(TurnOutcome::Failed { error: e.to_string() })
            }
        }
    }

    pub fn choose(&self, id: &CampaignId, index: u8) -> Result<Campaign, EngineError> {
        Ok(self.append(id, EventKind::TaskSelected { index })?.1)
    }

    /// Runs the executor for the chosen task of the current turn.
    pub fn brief(&self, id: &CampaignId) -> Result<ExecutorBrief, EngineError> {
        let _slot = self.reserve(id)?;
        self.brief_reserved(id)
    }

    pub fn brief_reserved(&self, id: &CampaignId) -> Result<ExecutorBrief, EngineError> {
        let campaign = self.precheck(id, Phase::Executor)?;
        let LoopState::AwaitingFeedback { chosen } = campaign.loop_state() else {
            return Err(EngineError::NoChoice);
        };
        let turn = campaign.current_turn().ok_or(EngineError::NoChoice)?;
        let prompt = render_executor_prompt_with(
            &self.templates.executor,
            campaign.prompt_context()?,
            &campaign.stage_summaries(),
            turn.expected_cursor,
            &turn.output,
            chosen as u32,
        )?;
        let text = self.provider.chat(&prompt)?;
        self.append(id, EventKind::PromptRendered { phase: Phase::Executor, prompt })?;
        self.append(id, EventKind::ModelResponded { phase: Phase::Executor, text: text.clone() })?;
        match parse_executor_output(&text) {
            Ok(brief) => {
                self.append(id, EventKind::BriefParsed { chosen, brief: brief.clone() })?;
                Ok(brief)
            }
            Err(e) => {
                self.append(id, EventKind::TurnFailed { phase: Phase::Executor, error: e.to_string() })?;
                Err(e.into())
            }
        }
    }

    /// Fills the current brief's report template.
    pub fn fill_report(&self, id: &CampaignId, values: &BTreeMap<String, String>) -> Result<String, EngineError> {
        let campaign = self.store.snapshot(id)?;
        let brief = campaign.current_turn().and_then(|t| t.brief.as_ref()).ok_or(EngineError::NoBrief)?;
        Ok(instantiate_report(brief, values)?.text)
    }

    /// Records feedback and applies the advance rule.
    pub fn feedback(&self, id: &CampaignId, text: impl Into<String>) -> Result<FeedbackOutcome, EngineError> {
        let feedback = Feedback::new(text);
        let (_, campaign) = self.append(id, EventKind::FeedbackRecorded { feedback: feedback.clone() })?;
        let from = campaign.cursor();
        let advance = advance_cursor(from, &feedback, campaign.stage_count());
        let kind = match advance {
            Advance::Moved(to) => EventKind::CursorAdvanced { from, to },
            Advance::CampaignComplete => EventKind::CampaignCompleted { final_cursor: from },
        };
        let (_, campaign) = self.append(id, kind)?;
        Ok(FeedbackOutcome { advance, status: campaign.status() })
    }

    pub fn score(&self, score: RubricScore, overwrite: bool) -> Result<Campaign, EngineError> {
        let id = score.task_ref.campaign.clone();
        Ok(self.append(&id, EventKind::ScoreRecorded { score, overwrite })?.1)
    }
}

/// Rubric tallies for a campaign; every live turn offered three tasks.
pub fn rubric_report(campaign: &Campaign) -> Result<RubricReport, RubricError> {
    let tasks: usize = campaign.live_turns().map(|t| t.output.choices().len()).sum();
    aggregate(campaign.scores(), tasks as u32)
}

/// Per-stage iteration counts for each stored campaign that has turns.
pub fn iteration_report(store: &EventStore) -> Result<Vec<(String, StageCounts)>, EngineError> {
    let mut rows = Vec::new();
    for id in store.list()? {
        let campaign = store.snapshot(&id)?;
        let trajectory = campaign.trajectory();
        if trajectory.is_empty() {
            continue;
        }
        let counts = iteration_stats(&trajectory).map_err(|e| EngineError::Trajectory(e.to_string()))?;
        rows.push((id.to_string(), counts));
    }
    Ok(rows)
}
