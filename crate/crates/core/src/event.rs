//! Campaign events. The log of these is the only source of campaign state.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cursor::StageCursor;
use crate::model::{Blueprint, CampaignId, Exemplar, ExecutorBrief, Feedback, NavigatorOutput, RubricScore};
use crate::navigator::Lint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Scope,
    Navigator,
    Executor,
}

/// One appended record. `seq` starts at 1 and has no gaps; `at` is wall-clock
/// milliseconds and takes no part in state comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    CampaignCreated {
        id: CampaignId,
        subject: String,
        stage_count: u32,
        #[serde(default)]
        exemplar: Option<Exemplar>,
    },
    BlueprintSet {
        blueprint: Blueprint,
    },
    PromptRendered {
        phase: Phase,
        prompt: String,
    },
    ModelResponded {
        phase: Phase,
        text: String,
    },
    TurnParsed {
        output: NavigatorOutput,
        expected_cursor: StageCursor,
        lints: Vec<Lint>,
    },
    /// A response that could not be parsed. The campaign stays where it was.
    TurnFailed {
        phase: Phase,
        error: String,
    },
    TaskSelected {
        index: u8,
    },
    BriefParsed {
        chosen: u8,
        brief: ExecutorBrief,
    },
    FeedbackRecorded {
        feedback: Feedback,
    },
    CursorAdvanced {
        from: StageCursor,
        to: StageCursor,
    },
    ScoreRecorded {
        score: RubricScore,
        #[serde(default)]
        overwrite: bool,
    },
    CampaignCompleted {
        final_cursor: StageCursor,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::CampaignCreated { .. } => "CampaignCreated",
            EventKind::BlueprintSet { .. } => "BlueprintSet",
            EventKind::PromptRendered { .. } => "PromptRendered",
            EventKind::ModelResponded { .. } => "ModelResponded",
            EventKind::TurnParsed { .. } => "TurnParsed",
            EventKind::TurnFailed { .. } => "TurnFailed",
            EventKind::TaskSelected { .. } => "TaskSelected",
            EventKind::BriefParsed { .. } => "BriefParsed",
            EventKind::FeedbackRecorded { .. } => "FeedbackRecorded",
            EventKind::CursorAdvanced { .. } => "CursorAdvanced",
            EventKind::ScoreRecorded { .. } => "ScoreRecorded",
            EventKind::CampaignCompleted { .. } => "CampaignCompleted",
        }
    }
}
