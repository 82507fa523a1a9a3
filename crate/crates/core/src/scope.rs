//! Scoping phase: the blueprint prompt and the staged-plan parser.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{Blueprint, BlueprintError, StageSpec};
use crate::sections::match_label;
use crate::template::PromptTemplate;

pub const DEFAULT_SCOPE_TEMPLATE: &str = "\
{role} {focus} Afterward, you should propose {stage count} broad stages of research development \
pertinent to this project. For each stage, clearly define the objective or the indication of its \
completion. Consider this process as analogous to writing Python code. In coding, the whole \
project is divided into several generic functions, where the testing of subsequent functions \
relies on the completion of previous ones. Similarly, we need to guide our apprentice, who has \
limited knowledge of reticular chemistry, in completing tasks sequentially, and ultimately \
mastering the standard practice in reticular chemistry.

{notes block}\"\"

{practice text}

\"\"

Should you have any questions or find any aspects of this prompt unclear, please include your \
inquiries in your response.
";

pub fn default_scope_template() -> PromptTemplate {
    PromptTemplate::new("scope", DEFAULT_SCOPE_TEMPLATE)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeRequest {
    pub role_preamble: String,
    pub focus_instruction: String,
    /// Literature excerpt the model must ground the plan in.
    pub practice_text: String,
    pub project_notes: Vec<String>,
    pub stage_count_hint: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScopeError {
    #[error("the grounding practice text is empty")]
    EmptyGroundingText,
    #[error("no \"Stage N:\" header found")]
    MissingStageHeader,
    #[error("stage {0} has no \"Objective:\"")]
    MissingObjective(u32),
    #[error("stage {0} has no \"Completion Indicator:\"")]
    MissingCompletionIndicator(u32),
    #[error("stage headers are not numbered 1..=K: {0:?}")]
    NonContiguousStages(Vec<u32>),
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
}

pub fn render_scope_prompt(req: &ScopeRequest) -> Result<String, ScopeError> {
    render_scope_prompt_with(&default_scope_template(), req)
}

pub fn render_scope_prompt_with(
    template: &PromptTemplate,
    req: &ScopeRequest,
) -> Result<String, ScopeError> {
    if req.practice_text.trim().is_empty() {
        return Err(ScopeError::EmptyGroundingText);
    }
    let notes_block = if req.project_notes.is_empty() {
        String::new()
    } else {
        let mut block =
            String::from("In addition, below are some additional notes regarding this research:\n\n");
        for (i, note) in req.project_notes.iter().enumerate() {
            block.push_str(&format!("- {}) {}\n", i + 1, note.trim()));
        }
        block.push('\n');
        block
    };
    let count = req.stage_count_hint.to_string();
    Ok(template.render(&[
        ("role", req.role_preamble.trim()),
        ("focus", req.focus_instruction.trim()),
        ("stage count", &count),
        ("notes block", &notes_block),
        ("practice text", req.practice_text.trim_matches('\n')),
    ]))
}

/// Parses "Stage N: title" blocks carrying "Objective:" and
/// "Completion Indicator:" bodies.
pub fn parse_scope_output(text: &str) -> Result<Blueprint, ScopeError> {
    struct Draft {
        index: u32,
        title: String,
        objective: Option<String>,
        indicator: Option<String>,
    }
    #[derive(Clone, Copy)]
    enum Field {
        None,
        Objective,
        Indicator,
    }

    let mut drafts: Vec<Draft> = Vec::new();
    let mut field = Field::None;

    for line in text.lines() {
        if let Some((index, title)) = stage_header(line) {
            drafts.push(Draft { index, title, objective: None, indicator: None });
            field = Field::None;
            continue;
        }
        let Some(draft) = drafts.last_mut() else { continue };
        if let Some(rest) = match_label(line, "Objective") {
            draft.objective = Some(rest.to_string());
            field = Field::Objective;
        } else if let Some(rest) = match_label(line, "Completion Indicator") {
            draft.indicator = Some(rest.to_string());
            field = Field::Indicator;
        } else {
            let slot = match field {
                Field::Objective => draft.objective.as_mut(),
                Field::Indicator => draft.indicator.as_mut(),
                Field::None => None,
            };
            if let Some(body) = slot {
                body.push('\n');
                body.push_str(line);
            }
        }
    }

    if drafts.is_empty() {
        return Err(ScopeError::MissingStageHeader);
    }
    let numbers: Vec<u32> = drafts.iter().map(|d| d.index).collect();
    if numbers.iter().enumerate().any(|(i, n)| *n as usize != i + 1) {
        return Err(ScopeError::NonContiguousStages(numbers));
    }
    let mut stages = Vec::with_capacity(drafts.len());
    for d in drafts {
        let objective = d
            .objective
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .ok_or(ScopeError::MissingObjective(d.index))?;
        let completion_indicator = d
            .indicator
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .ok_or(ScopeError::MissingCompletionIndicator(d.index))?;
        stages.push(StageSpec { index: d.index, title: d.title, objective, completion_indicator });
    }
    Ok(Blueprint::new(stages)?)
}

/// `Stage 3: Title`, tolerating markdown markers and case.
fn stage_header(line: &str) -> Option<(u32, String)> {
    let s = line.trim_start_matches(|c: char| matches!(c, '*' | '_' | '#' | '>' | ' ' | '\t'));
    let head = s.get(..5)?;
    if !head.eq_ignore_ascii_case("stage") {
        return None;
    }
    let rest = s[5..].trim_start();
    let digits_end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    if digits_end == 0 {
        return None;
    }
    let index: u32 = rest[..digits_end].parse().ok()?;
    let rest = rest[digits_end..].trim_start_matches(['*', '_', ' ']);
    let title = rest.strip_prefix(':')?;
    let title = title.trim().trim_matches(['*', '_']).trim();
    Some((index, title.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn request() -> ScopeRequest {
        ScopeRequest {
            role_preamble: "You are a planner.".into(),
            focus_instruction: "Read the text.".into(),
            practice_text: "Some practice.".into(),
            project_notes: vec!["Only note.".into()],
            stage_count_hint: 3,
        }
    }

    #[test]
    fn substitutes_stage_count_and_notes() {
        let p = render_scope_prompt(&request()).unwrap();
        assert!(p.starts_with("You are a planner. Read the text. Afterward, you should propose 3 broad stages"));
        assert!(p.contains("- 1) Only note.\n\n\"\""));
        assert!(!p.contains("- 2)"));
        assert_eq!(p, render_scope_prompt(&request()).unwrap());
    }

    #[test]
    fn empty_grounding_text_is_rejected() {
        let mut r = request();
        r.practice_text = "  \n".into();
        assert_eq!(render_scope_prompt(&r), Err(ScopeError::EmptyGroundingText));
    }

    #[test]
    fn parses_decorated_headers() {
        let text = "Plan:\n\n**Stage 1: Make it**\nObjective: build\nCompletion Indicator: built\n\n\
                    ## stage 2 : Test it\n**Objective:** test\nmore detail\n**Completion Indicator:** passes\n";
        let bp = parse_scope_output(text).unwrap();
        assert_eq!(bp.len(), 2);
        assert_eq!(bp.stages()[0].title, "Make it");
        assert_eq!(bp.stages()[1].title, "Test it");
        assert_eq!(bp.stages()[1].objective, "test\nmore detail");
        assert_eq!(bp.stages()[1].completion_indicator, "passes");
    }

    #[test]
    fn structural_errors() {
        let stage = |n: u32| format!("Stage {n}: T{n}\nObjective: o\nCompletion Indicator: c\n");
        let gap = format!("{}{}{}", stage(1), stage(2), stage(4));
        assert_eq!(parse_scope_output(&gap), Err(ScopeError::NonContiguousStages(vec![1, 2, 4])));
        assert_eq!(
            parse_scope_output("Stage 1: A\nObjective: o\n"),
            Err(ScopeError::MissingCompletionIndicator(1))
        );
        assert_eq!(
            parse_scope_output("Stage 1: A\nCompletion Indicator: c\n"),
            Err(ScopeError::MissingObjective(1))
        );
        assert_eq!(parse_scope_output("nothing here"), Err(ScopeError::MissingStageHeader));
    }
}
