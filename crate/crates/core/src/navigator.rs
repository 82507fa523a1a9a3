//! Navigation loop: prompt rendering, response parsing, the cursor-advance
//! rule and contract lints.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cursor::{parse_cursor_with, CursorError, CursorSyntax, StageCursor};
use crate::model::{number_word, Blueprint, Exemplar, Feedback, NavigatorOutput, TaskChoice};
use crate::sections::{self, SplitError};
use crate::template::PromptTemplate;

/// Inputs-block marker used on the first turn of a campaign.
pub const FIRST_TURN_MARKER: &str = "(none \u{2014} first iteration)";
/// Summary slot marker for later turns whose summary was empty.
pub const NO_SUMMARY_MARKER: &str = "(no summary recorded)";

pub const SUMMARY_SENTENCE_LIMIT: usize = 30;
pub const CHOICE_SENTENCE_MIN: usize = 10;
pub const CHOICE_SENTENCE_MAX: usize = 20;

pub const LABEL_SUMMARY: &str = "Output Summary";
pub const LABEL_CURSOR: &str = "Current Stage and Iteration";
pub const LABEL_EVALUATION: &str = "Status Evaluation";
pub const LABEL_CHOICES: [&str; 3] = ["Task Choice 1", "Task Choice 2", "Task Choice 3"];

pub const DEFAULT_NAVIGATOR_TEMPLATE: &str = "\
You are an AI reticular chemist assisting a human apprentice in a research project to develop a \
novel aluminum MOF using {linker name} as a linker. The project is structured into {stage count} stages:

{stage list}

{exemplar block}In each interaction, you'll be provided with the current project summary, the most \
recent task suggestion, and the feedback from the human apprentice. With these inputs, you should \
generate the following:

Output Summary: Construct an updated summary that primarily draw from the previous summary, adding \
only one or two sentences regarding the latest task and its outcomes based on human feedback, and \
another one sentence discussing the status of the current stage.

The summary should tell the story of the project so far, summarizing both successes and failures \
from all completed stages and tasks. Keep in mind that it is important to maintain the vital \
details from each stage. The summary part should not exceed {summary limit} sentences. If it does, you \
should condense earlier information.

Current Stage and Iteration: Indicate this with a numerical pair (e.g., 2-6), where the first \
number refers to the current stage and the second to the iteration within this stage. You should \
only advance to the next stage when the apprentice explicitly states, \"{sentinel}.\" Upon this \
declaration, you can immediately update the stage and iteration pair in your output to reflect \
progress (e.g., from 3-6 to 4-1). Otherwise, you will add one to the iteration number (e.g. from \
3-6 to 3-7).

Output Status Evaluation: Explain the reason behind the results reported by the human apprentice \
based on your most recent task suggestion. This should be a short (one or two sentence) analysis. \
Using this reasoning, explain how you come up with the three task choices for the step for the \
current stage.

Output Task Choices: Offer three task options that the apprentice can choose from for the next \
step, each consisting of {choice min} to {choice max} sentences and should be presented in a detailed, \
step-by-step manner to instruct the human what to do next. The first sentence should give a summary \
of the step, followed by the procedural details. If the apprentice's feedback implies the \
completion of a stage, one of your choices can be encouraging the apprentice to state, \
\"{sentinel}.\" Always remember to only suggest tasks relevant to the current stage and avoid \
proposing tasks related to upcoming stages.

Here are the inputs:

\"\"

Current Summary: {summary}

Last Iteration: {iteration}

Latest Task: {last task}

Human Feedback: {human feedback}

\"\"

I need you to only respond in the format as described below:

\"\"

Output Summary: <updated summary>

Current Stage and Iteration: <X-X>

Status Evaluation: <reasoning>

Task Choice 1: <next task choice 1>

Task Choice 2: <alternative next task choice>

Task Choice 3: <alternative next task choice>

\"\"
";

pub fn default_navigator_template() -> PromptTemplate {
    PromptTemplate::new("navigator", DEFAULT_NAVIGATOR_TEMPLATE)
}

/// What the model sees about the previous turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigatorInput {
    pub summary: String,
    /// `None` on the first turn.
    pub last_cursor: Option<StageCursor>,
    pub latest_task: String,
    pub feedback: Option<Feedback>,
}

impl NavigatorInput {
    pub fn first_turn() -> Self {
        Self { summary: String::new(), last_cursor: None, latest_task: String::new(), feedback: None }
    }
}

/// Everything the navigator prompt needs from a campaign.
#[derive(Debug, Clone, Copy)]
pub struct PromptContext<'a> {
    pub subject: &'a str,
    pub blueprint: &'a Blueprint,
    pub exemplar: Option<&'a Exemplar>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NavigatorError {
    #[error("campaign has no blueprint yet")]
    MissingBlueprint,
    #[error("response lacks the \"{0}\" section")]
    MissingSection(String),
    #[error("response repeats the \"{0}\" section")]
    DuplicateSection(String),
    #[error("section \"{0}\" holds only a template placeholder")]
    PlaceholderSection(String),
    #[error("section \"{0}\" is empty")]
    EmptySection(String),
    #[error(transparent)]
    MalformedCursor(#[from] CursorError),
}

/// Numbered stage list as it appears in the role preamble.
pub(crate) fn stage_list(blueprint: &Blueprint) -> String {
    let mut out = String::new();
    for (i, stage) in blueprint.stages().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("- {}) {}", stage.index, stage.title.trim()));
    }
    out
}

fn or_marker(s: &str) -> &str {
    if s.trim().is_empty() {
        FIRST_TURN_MARKER
    } else {
        s.trim()
    }
}

/// Renders the navigator prompt. Build `ctx` with
/// [`Campaign::prompt_context`](crate::Campaign::prompt_context), which
/// fails with [`NavigatorError::MissingBlueprint`] before scoping is done.
pub fn render_navigator_prompt(ctx: PromptContext<'_>, input: &NavigatorInput) -> String {
    render_navigator_prompt_with(&default_navigator_template(), ctx, input)
}

pub fn render_navigator_prompt_with(
    template: &PromptTemplate,
    ctx: PromptContext<'_>,
    input: &NavigatorInput,
) -> String {
    let exemplar_block = match ctx.exemplar {
        Some(ex) => format!(
            "Below is an example of work summary of another project using {} linker, and it is \
             suggested that you make similar attempts:\n\n\"\"\n\n{}\n\n\"\"\n\n",
            ex.subject.trim(),
            ex.summary.trim()
        ),
        None => String::new(),
    };
    let iteration = input.last_cursor.map(|c| c.to_string());
    let summary = match (input.summary.trim(), input.last_cursor) {
        ("", Some(_)) => NO_SUMMARY_MARKER,
        _ => or_marker(&input.summary),
    };
    let feedback = input.feedback.as_ref().map(|f| f.text.as_str()).unwrap_or("");
    let stage_count = number_word(ctx.blueprint.len());
    let list = stage_list(ctx.blueprint);
    let summary_limit = SUMMARY_SENTENCE_LIMIT.to_string();
    let choice_min = CHOICE_SENTENCE_MIN.to_string();
    let choice_max = CHOICE_SENTENCE_MAX.to_string();
    template.render(&[
        ("linker name", ctx.subject.trim()),
        ("stage count", &stage_count),
        ("stage list", &list),
        ("exemplar block", &exemplar_block),
        ("sentinel", crate::text::SENTINEL_PHRASE),
        ("summary limit", &summary_limit),
        ("choice min", &choice_min),
        ("choice max", &choice_max),
        ("summary", summary),
        ("iteration", iteration.as_deref().unwrap_or(FIRST_TURN_MARKER)),
        ("last task", or_marker(&input.latest_task)),
        ("human feedback", or_marker(feedback)),
    ])
}

/// Parser knobs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOptions {
    /// Accept responses whose "Output Summary" section was removed before
    /// archiving (the summary is then empty and a `SummaryOmitted` lint is
    /// raised).
    pub allow_missing_summary: bool,
    pub normalize_dashes: bool,
}

impl ParseOptions {
    pub fn strict() -> Self {
        Self::default()
    }

    pub fn summary_elided() -> Self {
        Self { allow_missing_summary: true, ..Self::default() }
    }
}

/// Raw labelled sections of a navigator response, before shape checks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NavigatorSections {
    pub summary: Option<String>,
    pub cursor: Option<String>,
    pub evaluation: Option<String>,
    pub choices: [Option<String>; 3],
}

const ALL_LABELS: [&str; 6] = [
    LABEL_SUMMARY,
    LABEL_CURSOR,
    LABEL_EVALUATION,
    LABEL_CHOICES[0],
    LABEL_CHOICES[1],
    LABEL_CHOICES[2],
];

/// Splits a response into its labelled sections without requiring any of
/// them.
pub fn split_navigator_sections(text: &str) -> Result<NavigatorSections, NavigatorError> {
    let mut bodies = sections::split(text, &ALL_LABELS)
        .map_err(|SplitError::Duplicate(i)| NavigatorError::DuplicateSection(ALL_LABELS[i].into()))?
        .into_iter();
    let mut next = || bodies.next().flatten();
    Ok(NavigatorSections {
        summary: next(),
        cursor: next(),
        evaluation: next(),
        choices: [next(), next(), next()],
    })
}

fn is_placeholder(body: &str) -> bool {
    let b = body.trim();
    b.len() >= 2 && b.starts_with('<') && b.ends_with('>') && !b[1..].contains('<')
}

fn required(body: Option<String>, label: &str) -> Result<String, NavigatorError> {
    let body = body.ok_or_else(|| NavigatorError::MissingSection(label.into()))?;
    if is_placeholder(&body) {
        return Err(NavigatorError::PlaceholderSection(label.into()));
    }
    Ok(body)
}

pub fn parse_navigator_output(text: &str) -> Result<NavigatorOutput, NavigatorError> {
    parse_navigator_output_with(text, ParseOptions::strict())
}

pub fn parse_navigator_output_with(
    text: &str,
    options: ParseOptions,
) -> Result<NavigatorOutput, NavigatorError> {
    let s = split_navigator_sections(text)?;

    let summary = match s.summary {
        None if options.allow_missing_summary => String::new(),
        other => required(other, LABEL_SUMMARY)?,
    };
    let cursor_text = required(s.cursor, LABEL_CURSOR)?;
    let cursor = parse_cursor_with(
        &cursor_text,
        CursorSyntax { normalize_dashes: options.normalize_dashes },
    )?;
    let evaluation = required(s.evaluation, LABEL_EVALUATION)?;

    let mut choices = Vec::with_capacity(3);
    for (i, body) in s.choices.into_iter().enumerate() {
        let label = LABEL_CHOICES[i];
        let body = required(body, label)?;
        if body.is_empty() {
            return Err(NavigatorError::EmptySection(label.into()));
        }
        choices.push(TaskChoice::new(i as u8 + 1, body));
    }
    NavigatorOutput::new(summary, cursor, evaluation, choices)
        .map_err(|e| NavigatorError::EmptySection(e.to_string()))
}

/// Result of applying human feedback to a cursor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Advance {
    Moved(StageCursor),
    CampaignComplete,
}

/// Sentinel feedback moves to the next stage (or completes the campaign at
/// stage `stage_count`); anything else adds one iteration.
pub fn advance_cursor(cursor: StageCursor, feedback: &Feedback, stage_count: u32) -> Advance {
    if feedback.sentinel {
        if cursor.stage() >= stage_count {
            Advance::CampaignComplete
        } else {
            Advance::Moved(cursor.next_stage())
        }
    } else {
        Advance::Moved(cursor.next_iteration())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "lint")]
pub enum Lint {
    SummaryTooLong { sentences: usize },
    SummaryOmitted,
    TaskChoiceLengthOutOfRange { choice: u8, sentences: usize },
    CursorDivergence { reported: StageCursor, expected: StageCursor },
}

/// Contract checks on a parsed turn; `expected` is the engine's cursor for
/// this turn.
pub fn lint_turn(output: &NavigatorOutput, expected: StageCursor) -> Vec<Lint> {
    let mut lints = Vec::new();
    if output.summary.trim().is_empty() {
        lints.push(Lint::SummaryOmitted);
    } else if output.summary_sentences > SUMMARY_SENTENCE_LIMIT {
        lints.push(Lint::SummaryTooLong { sentences: output.summary_sentences });
    }
    for choice in output.choices() {
        if !(CHOICE_SENTENCE_MIN..=CHOICE_SENTENCE_MAX).contains(&choice.sentence_count) {
            lints.push(Lint::TaskChoiceLengthOutOfRange {
                choice: choice.index,
                sentences: choice.sentence_count,
            });
        }
    }
    if output.cursor != expected {
        lints.push(Lint::CursorDivergence { reported: output.cursor, expected });
    }
    lints
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cur(s: u32, i: u32) -> StageCursor {
        StageCursor::new(s, i).unwrap()
    }

    fn blueprint() -> Blueprint {
        Blueprint::from_titles(["Make linker.", "Screen.", "Activate.", "Analyse.", "Replicate"]).unwrap()
    }

    fn ten_sentences(tag: &str) -> String {
        (0..10).map(|i| format!("{tag} step {i}.")).collect::<Vec<_>>().join(" ")
    }

    fn response(cursor: &str) -> String {
        format!(
            "Output Summary: Things happened.\n\nCurrent Stage and Iteration: {cursor}\n\n\
             Status Evaluation: Fine.\n\nTask Choice 1: {}\n\nTask Choice 2: {}\n\nTask Choice 3: {}\n",
            ten_sentences("a"),
            ten_sentences("b"),
            ten_sentences("c")
        )
    }

    #[test]
    fn advance_rule() {
        let go = Feedback::new("I'm ready to move to the next stage.");
        let stay = Feedback::new("More work needed.");
        assert_eq!(advance_cursor(cur(3, 6), &go, 5), Advance::Moved(cur(4, 1)));
        assert_eq!(advance_cursor(cur(3, 6), &stay, 5), Advance::Moved(cur(3, 7)));
        assert_eq!(advance_cursor(cur(1, 5), &go, 5), Advance::Moved(cur(2, 1)));
        assert_eq!(advance_cursor(cur(5, 4), &go, 5), Advance::CampaignComplete);
        assert_eq!(advance_cursor(cur(5, 4), &stay, 5), Advance::Moved(cur(5, 5)));
    }

    #[test]
    fn first_turn_prompt_uses_markers_and_no_exemplar() {
        let bp = blueprint();
        let ctx = PromptContext { subject: "BTB-H", blueprint: &bp, exemplar: None };
        let p = render_navigator_prompt(ctx, &NavigatorInput::first_turn());
        assert!(p.contains("using BTB-H as a linker. The project is structured into five stages:"));
        assert!(p.contains("- 1) Make linker.\n- 2) Screen."));
        assert!(!p.contains("example of work summary"));
        assert!(p.contains(&format!("Current Summary: {FIRST_TURN_MARKER}\n")));
        assert!(p.contains(&format!("Last Iteration: {FIRST_TURN_MARKER}\n")));
        assert!(p.contains(&format!("Human Feedback: {FIRST_TURN_MARKER}\n")));
        assert!(p.contains("should not exceed 30 sentences"));
        assert!(p.contains("each consisting of 10 to 20 sentences"));
        assert!(p.contains("explicitly states, \"I'm ready to move to the next stage.\""));
    }

    #[test]
    fn exemplar_block_is_optional() {
        let bp = blueprint();
        let ex = Exemplar { subject: "BTB-H".into(), summary: "It went well.".into() };
        let ctx = PromptContext { subject: "BTB-oF", blueprint: &bp, exemplar: Some(&ex) };
        let input = NavigatorInput {
            summary: "Prior.".into(),
            last_cursor: Some(cur(2, 3)),
            latest_task: "Screen ratios.".into(),
            feedback: Some(Feedback::new("Ratio 3:4 gave crystals.")),
        };
        let p = render_navigator_prompt(ctx, &input);
        assert!(p.contains("example of work summary of another project using BTB-H linker"));
        assert!(p.contains("\"\"\n\nIt went well.\n\n\"\"\n\nIn each interaction"));
        assert!(p.contains("Last Iteration: 2-3\n"));
    }

    #[test]
    fn parses_well_formed_response() {
        let out = parse_navigator_output(&response("2-6")).unwrap();
        assert_eq!(out.cursor, cur(2, 6));
        assert_eq!(out.summary, "Things happened.");
        assert_eq!(out.choices()[2].sentence_count, 10);
        assert!(lint_turn(&out, cur(2, 6)).is_empty());
    }

    #[test]
    fn parse_errors() {
        let missing = response("1-1").replace("Task Choice 3:", "Something else:");
        assert_eq!(
            parse_navigator_output(&missing),
            Err(NavigatorError::MissingSection("Task Choice 3".into()))
        );
        let dup = format!("{}\nStatus Evaluation: again", response("1-1"));
        assert_eq!(
            parse_navigator_output(&dup),
            Err(NavigatorError::DuplicateSection("Status Evaluation".into()))
        );
        assert!(matches!(
            parse_navigator_output(&response("3–7")),
            Err(NavigatorError::MalformedCursor(_))
        ));
        let lenient = ParseOptions { normalize_dashes: true, ..ParseOptions::strict() };
        assert_eq!(parse_navigator_output_with(&response("3–7"), lenient).unwrap().cursor, cur(3, 7));
        assert_eq!(
            parse_navigator_output("hello"),
            Err(NavigatorError::MissingSection("Output Summary".into()))
        );
    }

    #[test]
    fn elided_summary_option() {
        let text = response("1-2").replace("Output Summary: Things happened.\n", "");
        assert_eq!(
            parse_navigator_output(&text),
            Err(NavigatorError::MissingSection("Output Summary".into()))
        );
        let out = parse_navigator_output_with(&text, ParseOptions::summary_elided()).unwrap();
        assert_eq!(out.summary, "");
        assert_eq!(lint_turn(&out, cur(1, 2)), vec![Lint::SummaryOmitted]);
    }

    #[test]
    fn prompt_skeleton_never_parses() {
        let bp = blueprint();
        let ctx = PromptContext { subject: "X", blueprint: &bp, exemplar: None };
        let p = render_navigator_prompt(ctx, &NavigatorInput::first_turn());
        assert!(parse_navigator_output(&p).is_err());
        let skeleton = &p[p.rfind("I need you to only respond").unwrap()..];
        assert_eq!(
            parse_navigator_output(skeleton),
            Err(NavigatorError::PlaceholderSection("Output Summary".into()))
        );
        assert!(parse_navigator_output_with(skeleton, ParseOptions::summary_elided()).is_err());
    }

    #[test]
    fn lints() {
        let long_summary: String = (0..31).map(|i| format!("W{i}. ")).collect();
        let mut text = response("1-3").replace("Things happened.", &long_summary);
        text = text.replace(&ten_sentences("b"), "One. Two. Three. Four. Five.");
        let out = parse_navigator_output(&text).unwrap();
        assert_eq!(
            lint_turn(&out, cur(1, 2)),
            vec![
                Lint::SummaryTooLong { sentences: 31 },
                Lint::TaskChoiceLengthOutOfRange { choice: 2, sentences: 5 },
                Lint::CursorDivergence { reported: cur(1, 3), expected: cur(1, 2) },
            ]
        );
    }
}
