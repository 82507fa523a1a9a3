//! Execution briefs: summary consolidation prompt, step/template parser and
//! report instantiation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cursor::StageCursor;
use crate::model::{number_word, BriefLint, ExecutorBrief, NavigatorOutput};
use crate::navigator::{stage_list, PromptContext, NO_SUMMARY_MARKER};
use crate::sections::match_label;
use crate::template::PromptTemplate;

pub const DEFAULT_EXECUTOR_TEMPLATE: &str = "\
You are an AI reticular chemist assisting a human apprentice in a research project to develop a \
novel aluminum MOF using {linker name} as a linker. The project is structured into {stage count} stages:

{stage list}

You have already collaborated with the human apprentice to complete a few stages, and at the end \
of each stage, you have written down a summary. Below, I will provide you with these summaries, \
and your first job is to consolidate them into a comprehensive summary. This final summary should \
be as explicit as possible, detailing every success and failure at all stages. There is no word \
limit for the final summary. It will be used to instruct and inform another AI reticular chemist, \
who will guide another human apprentice to carry out a similar research project. Second, your job \
is to show me step by step how do choice {number} and give me a template on how to report to you \
the results.

Here are the inputs:

\"\"

{stage summaries}Current Stage and Iteration: {iteration}, Output Summary: {summary};

Status Evaluation: {reasoning}

Task Choice 1: {task 1 content}

Task Choice 2: {task 2 content}

Task Choice 3: {task 3 content}

\"\"
";

pub fn default_executor_template() -> PromptTemplate {
    PromptTemplate::new("executor", DEFAULT_EXECUTOR_TEMPLATE)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecutorError {
    #[error("choice must be 1, 2 or 3 (got {0})")]
    InvalidChoiceIndex(u32),
    #[error("no \"Step-by-step\" section")]
    MissingStepsSection,
    #[error("no report \"Template\" section")]
    MissingTemplateSection,
    #[error("value supplied for slot [{0}] which the template does not contain")]
    UnknownSlotName(String),
}

/// Stage summary handed to the executor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSummary {
    pub cursor: StageCursor,
    pub summary: String,
}

pub fn render_executor_prompt(
    ctx: PromptContext<'_>,
    stage_summaries: &[StageSummary],
    current_cursor: StageCursor,
    current: &NavigatorOutput,
    chosen: u32,
) -> Result<String, ExecutorError> {
    render_executor_prompt_with(
        &default_executor_template(),
        ctx,
        stage_summaries,
        current_cursor,
        current,
        chosen,
    )
}

pub fn render_executor_prompt_with(
    template: &PromptTemplate,
    ctx: PromptContext<'_>,
    stage_summaries: &[StageSummary],
    current_cursor: StageCursor,
    current: &NavigatorOutput,
    chosen: u32,
) -> Result<String, ExecutorError> {
    if !(1..=3).contains(&chosen) {
        return Err(ExecutorError::InvalidChoiceIndex(chosen));
    }
    let mut summaries = String::new();
    for s in stage_summaries {
        summaries.push_str(&format!(
            "Stage and Iteration: {}, Output Summary: {};\n\n",
            s.cursor,
            s.summary.trim()
        ));
    }
    let [c1, c2, c3] = current.choices();
    let number = chosen.to_string();
    let iteration = current_cursor.to_string();
    let summary = match current.summary.trim() {
        "" => NO_SUMMARY_MARKER,
        s => s,
    };
    let count = number_word(ctx.blueprint.len());
    let list = stage_list(ctx.blueprint);
    Ok(template.render(&[
        ("linker name", ctx.subject.trim()),
        ("stage count", &count),
        ("stage list", &list),
        ("number", &number),
        ("stage summaries", &summaries),
        ("iteration", &iteration),
        ("summary", summary),
        ("reasoning", current.evaluation.trim()),
        ("task 1 content", c1.text.trim()),
        ("task 2 content", c2.text.trim()),
        ("task 3 content", c3.text.trim()),
    ]))
}

fn is_steps_header(line: &str) -> bool {
    let l = line.trim().trim_matches(['*', '#', '_', ' ']);
    l.len() >= 12 && l[..12].eq_ignore_ascii_case("step-by-step")
}

fn is_template_header(line: &str) -> bool {
    let l = line.trim().trim_start_matches(['*', '#', '_', ' ']);
    l.get(..8).is_some_and(|h| h.eq_ignore_ascii_case("template"))
}

/// `"12. text"` or `"12) text"`.
fn numbered(line: &str) -> Option<(u32, &str)> {
    let l = line.trim_start();
    let end = l.find(|c: char| !c.is_ascii_digit())?;
    if end == 0 {
        return None;
    }
    let rest = l[end..].strip_prefix(['.', ')'])?;
    if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some((l[..end].parse().ok()?, rest.trim()))
}

/// Splits the executor response into summary, steps and report template.
pub fn parse_executor_output(text: &str) -> Result<ExecutorBrief, ExecutorError> {
    let lines: Vec<&str> = text.lines().collect();
    let steps_at = lines.iter().position(|l| is_steps_header(l)).ok_or(ExecutorError::MissingStepsSection)?;
    let template_at = lines[steps_at + 1..]
        .iter()
        .position(|l| is_template_header(l))
        .map(|p| p + steps_at + 1)
        .ok_or(ExecutorError::MissingTemplateSection)?;

    let mut summary_lines = &lines[..steps_at];
    if let Some(first) = summary_lines.iter().position(|l| !l.trim().is_empty()) {
        summary_lines = &summary_lines[first..];
        if match_label(summary_lines[0], "Summary") == Some("") {
            summary_lines = &summary_lines[1..];
        }
    }
    let consolidated_summary = summary_lines.join("\n").trim().to_string();

    let mut steps: Vec<String> = Vec::new();
    let mut numbers: Vec<u32> = Vec::new();
    for line in &lines[steps_at + 1..template_at] {
        if let Some((n, body)) = numbered(line) {
            numbers.push(n);
            steps.push(body.to_string());
        } else if let (Some(last), false) = (steps.last_mut(), line.trim().is_empty()) {
            last.push(' ');
            last.push_str(line.trim());
        }
    }
    let mut lints = Vec::new();
    if numbers.iter().enumerate().any(|(i, n)| *n as usize != i + 1) {
        lints.push(BriefLint::NonContiguousSteps { numbers });
    }

    let report_template = lines[template_at + 1..].join("\n").trim_matches('\n').to_string();
    let slots = slot_spans(&report_template).into_iter().map(|(_, _, name)| name.to_string()).collect();
    Ok(ExecutorBrief { consolidated_summary, steps, report_template, slots, lints })
}

/// `(start, end, inner)` for every maximal `[...]` span: from a `[` to the
/// next `]` with no other `[` in between.
fn slot_spans(template: &str) -> Vec<(usize, usize, &str)> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, ch) in template.char_indices() {
        match ch {
            '[' => open = Some(i),
            ']' => {
                if let Some(start) = open.take() {
                    spans.push((start, i + 1, &template[start + 1..i]));
                }
            }
            _ => {}
        }
    }
    spans
}

/// Filled-in report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstantiatedReport {
    pub text: String,
    /// Slots left bracketed, in first-appearance order.
    pub unfilled: Vec<String>,
}

/// Replaces each `[slot]` with its value; unfilled slots stay bracketed.
pub fn instantiate_report(
    brief: &ExecutorBrief,
    values: &BTreeMap<String, String>,
) -> Result<InstantiatedReport, ExecutorError> {
    for key in values.keys() {
        if !brief.slots.iter().any(|s| s == key) {
            return Err(ExecutorError::UnknownSlotName(key.clone()));
        }
    }
    let template = brief.report_template.as_str();
    let mut text = String::with_capacity(template.len());
    let mut unfilled: Vec<String> = Vec::new();
    let mut cursor = 0;
    for (start, end, name) in slot_spans(template) {
        text.push_str(&template[cursor..start]);
        match values.get(name) {
            Some(v) => text.push_str(v),
            None => {
                text.push_str(&template[start..end]);
                if !unfilled.iter().any(|u| u == name) {
                    unfilled.push(name.to_string());
                }
            }
        }
        cursor = end;
    }
    text.push_str(&template[cursor..]);
    Ok(InstantiatedReport { text, unfilled })
}
