//! Campaign state as a fold over its events.
//!
//! [`Campaign::check`] decides whether an event is legal in the current
//! state; [`Campaign::apply`] checks and then mutates. Replaying a log is
//! just applying its events in order, so live and replayed state agree by
//! construction.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cursor::StageCursor;
use crate::event::{Event, EventKind, Phase};
use crate::executor::StageSummary;
use crate::model::{
    Blueprint, CampaignId, Exemplar, ExecutorBrief, Feedback, NavigatorOutput, RubricScore, TaskChoice,
    TaskRef,
};
use crate::navigator::{advance_cursor, Advance, Lint, NavigatorError, NavigatorInput, PromptContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CampaignStatus {
    Scoping,
    Active,
    Complete,
}

/// Where the navigation loop stands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state")]
pub enum LoopState {
    /// A navigator turn should be run next.
    AwaitingTurn,
    /// The latest turn has not had a task chosen.
    AwaitingChoice,
    AwaitingFeedback { chosen: u8 },
    /// Feedback is in; the cursor rule has not been applied yet.
    AwaitingAdvance,
}

/// Provider exchange in progress, between prompt and parsed result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pending {
    Prompted(Phase),
    Responded(Phase),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub output: NavigatorOutput,
    /// The engine's cursor for this turn; task references use it.
    pub expected_cursor: StageCursor,
    pub lints: Vec<Lint>,
    pub chosen: Option<u8>,
    pub brief: Option<ExecutorBrief>,
    pub feedback: Option<Feedback>,
    /// Replaced by a re-run before any task was chosen.
    pub superseded: bool,
}

impl TurnRecord {
    pub fn chosen_task(&self) -> Option<&TaskChoice> {
        self.chosen.and_then(|i| self.output.choice(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransitionError {
    #[error("a campaign log must start with CampaignCreated")]
    NotCreated,
    #[error("CampaignCreated may only appear once")]
    AlreadyCreated,
    #[error("expected seq {expected}, found {found}")]
    SeqGap { expected: u64, found: u64 },
    #[error("stage count must be at least 1")]
    ZeroStages,
    #[error("{event} is not allowed while {state}")]
    IllegalTransition { event: &'static str, state: String },
    #[error("blueprint has {found} stages but the campaign was created with {expected}")]
    BlueprintLength { expected: u32, found: u32 },
    #[error("cursor {found} does not match the campaign cursor {expected}")]
    CursorMismatch { expected: StageCursor, found: StageCursor },
    #[error("the advance rule gives {expected:?} here, not {found:?}")]
    WrongAdvance { expected: Advance, found: Advance },
    #[error("choice must be 1, 2 or 3 (got {0})")]
    InvalidChoice(u8),
    #[error("score belongs to campaign {0}")]
    WrongCampaign(CampaignId),
    #[error("no task {0}")]
    UnknownTask(TaskRef),
    #[error("task {0} is already scored; pass overwrite to rescore")]
    DuplicateScore(TaskRef),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FoldError {
    #[error("empty event log")]
    Empty,
    #[error("event {seq}: {error}")]
    At { seq: u64, error: TransitionError },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Campaign {
    id: CampaignId,
    subject: String,
    stage_count: u32,
    blueprint: Option<Blueprint>,
    exemplar: Option<Exemplar>,
    cursor: StageCursor,
    rolling_summary: String,
    status: CampaignStatus,
    loop_state: LoopState,
    pending: Option<Pending>,
    turns: Vec<TurnRecord>,
    scores: Vec<RubricScore>,
    last_seq: u64,
}

impl Campaign {
    /// Starts a campaign from its first event.
    pub fn create(event: &Event) -> Result<Self, TransitionError> {
        if event.seq != 1 {
            return Err(TransitionError::SeqGap { expected: 1, found: event.seq });
        }
        let EventKind::CampaignCreated { id, subject, stage_count, exemplar } = &event.kind else {
            return Err(TransitionError::NotCreated);
        };
        if *stage_count == 0 {
            return Err(TransitionError::ZeroStages);
        }
        Ok(Self {
            id: id.clone(),
            subject: subject.clone(),
            stage_count: *stage_count,
            blueprint: None,
            exemplar: exemplar.clone(),
            cursor: StageCursor::START,
            rolling_summary: String::new(),
            status: CampaignStatus::Scoping,
            loop_state: LoopState::AwaitingTurn,
            pending: None,
            turns: Vec::new(),
            scores: Vec::new(),
            last_seq: 1,
        })
    }

    pub fn fold<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self, FoldError> {
        let mut iter = events.into_iter();
        let first = iter.next().ok_or(FoldError::Empty)?;
        let mut campaign =
            Self::create(first).map_err(|error| FoldError::At { seq: first.seq, error })?;
        for event in iter {
            campaign.apply(event).map_err(|error| FoldError::At { seq: event.seq, error })?;
        }
        Ok(campaign)
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), TransitionError> {
        let expected = self.last_seq + 1;
        if event.seq != expected {
            return Err(TransitionError::SeqGap { expected, found: event.seq });
        }
        self.check(&event.kind)?;
        self.mutate(&event.kind);
        self.last_seq = event.seq;
        Ok(())
    }

    fn illegal(&self, kind: &EventKind) -> TransitionError {
        let state = match self.status {
            CampaignStatus::Scoping => "scoping".to_string(),
            CampaignStatus::Complete => "complete".to_string(),
            CampaignStatus::Active => match self.loop_state {
                LoopState::AwaitingTurn => "awaiting a turn".to_string(),
                LoopState::AwaitingChoice => "awaiting a choice".to_string(),
                LoopState::AwaitingFeedback { .. } => "awaiting feedback".to_string(),
                LoopState::AwaitingAdvance => "awaiting the cursor advance".to_string(),
            },
        };
        TransitionError::IllegalTransition { event: kind.name(), state }
    }

    fn scope_open(&self) -> bool {
        self.status != CampaignStatus::Complete && self.turns.is_empty()
    }

    /// Whether `kind` may be appended next.
    pub fn check(&self, kind: &EventKind) -> Result<(), TransitionError> {
        let active = self.status == CampaignStatus::Active;
        match kind {
            EventKind::CampaignCreated { .. } => Err(TransitionError::AlreadyCreated),
            EventKind::BlueprintSet { blueprint } => {
                if !self.scope_open() {
                    return Err(self.illegal(kind));
                }
                if blueprint.len() != self.stage_count {
                    return Err(TransitionError::BlueprintLength {
                        expected: self.stage_count,
                        found: blueprint.len(),
                    });
                }
                Ok(())
            }
            EventKind::PromptRendered { phase, .. } => {
                let ok = match phase {
                    Phase::Scope => self.scope_open(),
                    Phase::Navigator => {
                        active
                            && matches!(self.loop_state, LoopState::AwaitingTurn | LoopState::AwaitingChoice)
                    }
                    Phase::Executor => {
                        active && matches!(self.loop_state, LoopState::AwaitingFeedback { .. })
                    }
                };
                if ok { Ok(()) } else { Err(self.illegal(kind)) }
            }
            EventKind::ModelResponded { phase, .. } => match self.pending {
                Some(Pending::Prompted(p)) if p == *phase => Ok(()),
                _ => Err(self.illegal(kind)),
            },
            EventKind::TurnFailed { phase, .. } => match self.pending {
                Some(Pending::Responded(p)) if p == *phase => Ok(()),
                _ => Err(self.illegal(kind)),
            },
            EventKind::TurnParsed { expected_cursor, .. } => {
                if self.pending != Some(Pending::Responded(Phase::Navigator)) {
                    return Err(self.illegal(kind));
                }
                if *expected_cursor != self.cursor {
                    return Err(TransitionError::CursorMismatch {
                        expected: self.cursor,
                        found: *expected_cursor,
                    });
                }
                Ok(())
            }
            EventKind::TaskSelected { index } => {
                if !active
                    || !matches!(
                        self.loop_state,
                        LoopState::AwaitingChoice | LoopState::AwaitingFeedback { .. }
                    )
                {
                    return Err(self.illegal(kind));
                }
                if !(1..=3).contains(index) {
                    return Err(TransitionError::InvalidChoice(*index));
                }
                Ok(())
            }
            EventKind::BriefParsed { chosen, .. } => {
                match (self.pending, self.loop_state) {
                    (Some(Pending::Responded(Phase::Executor)), LoopState::AwaitingFeedback { chosen: c })
                        if c == *chosen =>
                    {
                        Ok(())
                    }
                    _ => Err(self.illegal(kind)),
                }
            }
            EventKind::FeedbackRecorded { .. } => {
                if active && matches!(self.loop_state, LoopState::AwaitingFeedback { .. }) {
                    Ok(())
                } else {
                    Err(self.illegal(kind))
                }
            }
            EventKind::CursorAdvanced { from, to } => {
                let feedback = self.pending_feedback().ok_or_else(|| self.illegal(kind))?;
                if *from != self.cursor {
                    return Err(TransitionError::CursorMismatch { expected: self.cursor, found: *from });
                }
                let rule = advance_cursor(self.cursor, feedback, self.stage_count);
                if rule != Advance::Moved(*to) {
                    return Err(TransitionError::WrongAdvance { expected: rule, found: Advance::Moved(*to) });
                }
                Ok(())
            }
            EventKind::CampaignCompleted { final_cursor } => {
                let feedback = self.pending_feedback().ok_or_else(|| self.illegal(kind))?;
                if *final_cursor != self.cursor {
                    return Err(TransitionError::CursorMismatch {
                        expected: self.cursor,
                        found: *final_cursor,
                    });
                }
                let rule = advance_cursor(self.cursor, feedback, self.stage_count);
                if rule != Advance::CampaignComplete {
                    return Err(TransitionError::WrongAdvance {
                        expected: rule,
                        found: Advance::CampaignComplete,
                    });
                }
                Ok(())
            }
            EventKind::ScoreRecorded { score, overwrite } => {
                let task = &score.task_ref;
                if task.campaign != self.id {
                    return Err(TransitionError::WrongCampaign(task.campaign.clone()));
                }
                if self.resolve_task(task).is_none() {
                    return Err(TransitionError::UnknownTask(task.clone()));
                }
                if !overwrite && self.score_for(task).is_some() {
                    return Err(TransitionError::DuplicateScore(task.clone()));
                }
                Ok(())
            }
        }
    }

    fn pending_feedback(&self) -> Option<&Feedback> {
        if self.status != CampaignStatus::Active || self.loop_state != LoopState::AwaitingAdvance {
            return None;
        }
        self.live_turns().last()?.feedback.as_ref()
    }

    fn mutate(&mut self, kind: &EventKind) {
        match kind {
            EventKind::CampaignCreated { .. } => {}
            EventKind::BlueprintSet { blueprint } => {
                self.blueprint = Some(blueprint.clone());
                self.status = CampaignStatus::Active;
                self.pending = None;
            }
            EventKind::PromptRendered { phase, .. } => self.pending = Some(Pending::Prompted(*phase)),
            EventKind::ModelResponded { phase, .. } => self.pending = Some(Pending::Responded(*phase)),
            EventKind::TurnFailed { .. } => self.pending = None,
            EventKind::TurnParsed { output, expected_cursor, lints } => {
                if self.loop_state == LoopState::AwaitingChoice {
                    if let Some(last) = self.turns.iter_mut().rev().find(|t| !t.superseded) {
                        last.superseded = true;
                    }
                }
                self.turns.push(TurnRecord {
                    output: output.clone(),
                    expected_cursor: *expected_cursor,
                    lints: lints.clone(),
                    chosen: None,
                    brief: None,
                    feedback: None,
                    superseded: false,
                });
                self.loop_state = LoopState::AwaitingChoice;
                self.pending = None;
            }
            EventKind::TaskSelected { index } => {
                if let Some(turn) = self.live_turn_mut() {
                    if turn.chosen != Some(*index) {
                        turn.brief = None;
                    }
                    turn.chosen = Some(*index);
                }
                self.loop_state = LoopState::AwaitingFeedback { chosen: *index };
            }
            EventKind::BriefParsed { brief, .. } => {
                if let Some(turn) = self.live_turn_mut() {
                    turn.brief = Some(brief.clone());
                }
                self.pending = None;
            }
            EventKind::FeedbackRecorded { feedback } => {
                if let Some(turn) = self.live_turn_mut() {
                    turn.feedback = Some(feedback.clone());
                    if !turn.output.summary.trim().is_empty() {
                        self.rolling_summary = turn.output.summary.clone();
                    }
                }
                self.loop_state = LoopState::AwaitingAdvance;
                self.pending = None;
            }
            EventKind::CursorAdvanced { to, .. } => {
                self.cursor = *to;
                self.loop_state = LoopState::AwaitingTurn;
            }
            EventKind::CampaignCompleted { .. } => {
                self.status = CampaignStatus::Complete;
                self.loop_state = LoopState::AwaitingTurn;
            }
            EventKind::ScoreRecorded { score, .. } => {
                match self.scores.iter_mut().find(|s| s.task_ref == score.task_ref) {
                    Some(existing) => *existing = score.clone(),
                    None => self.scores.push(score.clone()),
                }
            }
        }
    }

    fn live_turn_mut(&mut self) -> Option<&mut TurnRecord> {
        self.turns.iter_mut().rev().find(|t| !t.superseded)
    }

    pub fn id(&self) -> &CampaignId {
        &self.id
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn stage_count(&self) -> u32 {
        self.stage_count
    }

    pub fn blueprint(&self) -> Option<&Blueprint> {
        self.blueprint.as_ref()
    }

    pub fn exemplar(&self) -> Option<&Exemplar> {
        self.exemplar.as_ref()
    }

    /// The engine's cursor: the coordinate of the current or next turn.
    pub fn cursor(&self) -> StageCursor {
        self.cursor
    }

    /// Summary as of the most recently concluded turn.
    pub fn rolling_summary(&self) -> &str {
        &self.rolling_summary
    }

    pub fn status(&self) -> CampaignStatus {
        self.status
    }

    pub fn loop_state(&self) -> LoopState {
        self.loop_state
    }

    pub fn pending(&self) -> Option<Pending> {
        self.pending
    }

    /// All turns, superseded ones included.
    pub fn turns(&self) -> &[TurnRecord] {
        &self.turns
    }

    pub fn live_turns(&self) -> impl DoubleEndedIterator<Item = &TurnRecord> {
        self.turns.iter().filter(|t| !t.superseded)
    }

    pub fn scores(&self) -> &[RubricScore] {
        &self.scores
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Latest non-superseded turn.
    pub fn current_turn(&self) -> Option<&TurnRecord> {
        self.live_turns().next_back()
    }

    pub fn prompt_context(&self) -> Result<PromptContext<'_>, NavigatorError> {
        let blueprint = self.blueprint.as_ref().ok_or(NavigatorError::MissingBlueprint)?;
        Ok(PromptContext { subject: &self.subject, blueprint, exemplar: self.exemplar.as_ref() })
    }

    /// Inputs for the next navigator call. A re-run of an unanswered turn
    /// gets the same inputs the original call had.
    pub fn navigator_input(&self) -> NavigatorInput {
        let Some(last) = self.live_turns().rev().find(|t| t.feedback.is_some()) else {
            return NavigatorInput::first_turn();
        };
        NavigatorInput {
            summary: self.rolling_summary.clone(),
            last_cursor: Some(last.expected_cursor),
            latest_task: last.chosen_task().map(|c| c.text.clone()).unwrap_or_default(),
            feedback: last.feedback.clone(),
        }
    }

    /// For each stage before the current one, the summary of its last turn.
    pub fn stage_summaries(&self) -> Vec<StageSummary> {
        let mut out: Vec<StageSummary> = Vec::new();
        for turn in self.live_turns() {
            if turn.expected_cursor.stage() >= self.cursor.stage() {
                break;
            }
            match out.last_mut() {
                Some(s) if s.cursor.stage() == turn.expected_cursor.stage() => {
                    s.cursor = turn.expected_cursor;
                    s.summary = turn.output.summary.clone();
                }
                _ => out.push(StageSummary {
                    cursor: turn.expected_cursor,
                    summary: turn.output.summary.clone(),
                }),
            }
        }
        out.retain(|s| !s.summary.trim().is_empty());
        out
    }

    /// Cursors of the live turns in order.
    pub fn trajectory(&self) -> Vec<StageCursor> {
        self.live_turns().map(|t| t.expected_cursor).collect()
    }

    pub fn resolve_task(&self, task: &TaskRef) -> Option<&TaskChoice> {
        if task.campaign != self.id {
            return None;
        }
        self.live_turns()
            .rev()
            .find(|t| t.expected_cursor == task.cursor)
            .and_then(|t| t.output.choice(task.choice))
    }

    pub fn score_for(&self, task: &TaskRef) -> Option<&RubricScore> {
        self.scores.iter().find(|s| &s.task_ref == task)
    }

    /// SHA-256 over the serialized state, hex encoded. Event timestamps
    /// never reach the state, so replay reproduces it exactly.
    pub fn state_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("campaign state serializes");
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest.iter() {
            hex.push(char::from_digit((b >> 4) as u32, 16).unwrap());
            hex.push(char::from_digit((b & 0xf) as u32, 16).unwrap());
        }
        hex
    }
}
