//! Pure core of the stagewise orchestrator.
//!
//! Everything here is deterministic and free of IO: the stage cursor and its
//! advance rule, prompt renderers and structured-output parsers for the three
//! campaign phases, the campaign event fold, the task rubric, screening-table
//! analytics and the prompt-refinement session. The crate builds without
//! `std` (it needs `alloc`); the companion `stagewise` crate adds storage,
//! HTTP and the CLI.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod campaign;
pub mod cursor;
pub mod event;
pub mod executor;
pub mod labdata;
pub mod model;
pub mod navigator;
pub mod provider;
pub mod refinery;
pub mod rubric;
pub mod scope;
pub mod template;
pub mod text;

mod sections;

pub use campaign::{Campaign, CampaignStatus, LoopState, TransitionError, TurnRecord};
pub use cursor::{format_cursor, parse_cursor, parse_cursor_with, CursorError, CursorSyntax, StageCursor};
pub use event::{Event, EventKind, Phase};
pub use model::{
    Blueprint, BlueprintError, CampaignId, Exemplar, ExecutorBrief, Feedback, NavigatorOutput,
    RubricScore, StageSpec, TaskChoice, TaskRef,
};
pub use provider::{ChatProvider, ProviderError};
pub use text::{count_sentences, detect_sentinel, SENTINEL_PHRASE};
