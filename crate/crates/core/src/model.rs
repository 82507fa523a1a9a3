//! Domain records shared by the phase engines, the event log and the rubric.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cursor::{CursorError, StageCursor};
use crate::text::{count_sentences, detect_sentinel};

/// Opaque campaign identifier. Restricted to `[A-Za-z0-9_-]` so it can name
/// a log file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CampaignId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid campaign id {0:?}: use 1-64 characters from [A-Za-z0-9_-]")]
pub struct InvalidCampaignId(pub String);

impl CampaignId {
    pub fn new(id: impl Into<String>) -> Result<Self, InvalidCampaignId> {
        let id = id.into();
        let ok = !id.is_empty()
            && id.len() <= 64
            && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
        if ok {
            Ok(Self(id))
        } else {
            Err(InvalidCampaignId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CampaignId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for CampaignId {
    type Error = InvalidCampaignId;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<CampaignId> for String {
    fn from(id: CampaignId) -> String {
        id.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub index: u32,
    pub title: String,
    pub objective: String,
    pub completion_indicator: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlueprintError {
    #[error("a blueprint needs at least one stage")]
    Empty,
    #[error("stage indices must run 1..=K without gaps; found {found} at position {position}")]
    NonContiguous { position: usize, found: u32 },
    #[error("stage {0} has an empty title")]
    EmptyTitle(u32),
    #[error("stage {0} has an empty objective")]
    EmptyObjective(u32),
}

/// The K-stage project plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BlueprintRepr", into = "BlueprintRepr")]
pub struct Blueprint {
    stages: Vec<StageSpec>,
}

#[derive(Serialize, Deserialize)]
struct BlueprintRepr {
    stages: Vec<StageSpec>,
}

impl TryFrom<BlueprintRepr> for Blueprint {
    type Error = BlueprintError;
    fn try_from(r: BlueprintRepr) -> Result<Self, Self::Error> {
        Blueprint::new(r.stages)
    }
}

impl From<Blueprint> for BlueprintRepr {
    fn from(b: Blueprint) -> Self {
        BlueprintRepr { stages: b.stages }
    }
}

impl Blueprint {
    pub fn new(stages: Vec<StageSpec>) -> Result<Self, BlueprintError> {
        if stages.is_empty() {
            return Err(BlueprintError::Empty);
        }
        for (position, stage) in stages.iter().enumerate() {
            if stage.index as usize != position + 1 {
                return Err(BlueprintError::NonContiguous { position, found: stage.index });
            }
            if stage.title.trim().is_empty() {
                return Err(BlueprintError::EmptyTitle(stage.index));
            }
            if stage.objective.trim().is_empty() {
                return Err(BlueprintError::EmptyObjective(stage.index));
            }
        }
        Ok(Self { stages })
    }

    /// Blueprint with the given stage titles and no objective detail beyond
    /// the title itself.
    pub fn from_titles<I, S>(titles: I) -> Result<Self, BlueprintError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let stages = titles
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let title = t.into();
                StageSpec {
                    index: i as u32 + 1,
                    objective: title.clone(),
                    title,
                    completion_indicator: String::new(),
                }
            })
            .collect();
        Self::new(stages)
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    /// K.
    pub fn len(&self) -> u32 {
        self.stages.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A prior campaign's final summary, injected into later campaigns' prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub subject: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskChoice {
    pub index: u8,
    pub text: String,
    pub sentence_count: usize,
}

impl TaskChoice {
    pub fn new(index: u8, text: impl Into<String>) -> Self {
        let text = text.into();
        let sentence_count = count_sentences(&text);
        Self { index, text, sentence_count }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OutputShapeError {
    #[error("a navigator turn needs exactly three task choices, got {0}")]
    ChoiceCount(usize),
    #[error("task choices must be numbered 1, 2, 3")]
    ChoiceNumbering,
    #[error("task choice {0} is empty")]
    EmptyChoice(u8),
}

/// One parsed navigator response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigatorOutput {
    pub summary: String,
    pub summary_sentences: usize,
    pub cursor: StageCursor,
    pub evaluation: String,
    choices: [TaskChoice; 3],
}

impl NavigatorOutput {
    pub fn new(
        summary: impl Into<String>,
        cursor: StageCursor,
        evaluation: impl Into<String>,
        choices: Vec<TaskChoice>,
    ) -> Result<Self, OutputShapeError> {
        let choices: [TaskChoice; 3] = choices
            .try_into()
            .map_err(|v: Vec<TaskChoice>| OutputShapeError::ChoiceCount(v.len()))?;
        for (i, choice) in choices.iter().enumerate() {
            if choice.index as usize != i + 1 {
                return Err(OutputShapeError::ChoiceNumbering);
            }
            if choice.text.trim().is_empty() {
                return Err(OutputShapeError::EmptyChoice(choice.index));
            }
        }
        let summary = summary.into();
        Ok(Self {
            summary_sentences: count_sentences(&summary),
            summary,
            cursor,
            evaluation: evaluation.into(),
            choices,
        })
    }

    pub fn choices(&self) -> &[TaskChoice; 3] {
        &self.choices
    }

    /// Choice by its 1-based index.
    pub fn choice(&self, index: u8) -> Option<&TaskChoice> {
        match index {
            1..=3 => Some(&self.choices[index as usize - 1]),
            _ => None,
        }
    }
}

/// Human feedback on the latest task. `sentinel` is always recomputed from
/// `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "FeedbackRepr")]
pub struct Feedback {
    pub text: String,
    pub sentinel: bool,
}

#[derive(Deserialize)]
struct FeedbackRepr {
    text: String,
}

impl From<FeedbackRepr> for Feedback {
    fn from(r: FeedbackRepr) -> Self {
        Feedback::new(r.text)
    }
}

impl Feedback {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let sentinel = detect_sentinel(&text);
        Self { text, sentinel }
    }
}

/// Parsed executor response: consolidated summary, steps and the fill-in
/// report template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutorBrief {
    pub consolidated_summary: String,
    pub steps: Vec<String>,
    pub report_template: String,
    /// Every bracketed span of the template in order of appearance,
    /// duplicates included.
    pub slots: Vec<String>,
    #[serde(default)]
    pub lints: Vec<BriefLint>,
}

impl ExecutorBrief {
    /// Distinct slot names in first-appearance order.
    pub fn unique_slots(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for s in &self.slots {
            if !seen.contains(&s.as_str()) {
                seen.push(s);
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "lint")]
pub enum BriefLint {
    NonContiguousSteps { numbers: Vec<u32> },
}

/// Identifies one suggested task: campaign, turn cursor and choice index.
///
/// Text form: `<campaign>/<stage>-<iteration>/<choice>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskRef {
    pub campaign: CampaignId,
    pub cursor: StageCursor,
    pub choice: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskRefError {
    #[error("task reference {0:?} is not of the form campaign/stage-iteration/choice")]
    Shape(String),
    #[error(transparent)]
    Campaign(#[from] InvalidCampaignId),
    #[error(transparent)]
    Cursor(#[from] CursorError),
    #[error("choice index must be 1, 2 or 3 (got {0:?})")]
    Choice(String),
}

impl fmt::Display for TaskRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.campaign, self.cursor, self.choice)
    }
}

impl FromStr for TaskRef {
    type Err = TaskRefError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.trim().split('/');
        let (Some(c), Some(cur), Some(ch), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(TaskRefError::Shape(s.to_owned()));
        };
        let choice = match ch {
            "1" => 1,
            "2" => 2,
            "3" => 3,
            other => return Err(TaskRefError::Choice(other.to_owned())),
        };
        Ok(TaskRef { campaign: CampaignId::new(c)?, cursor: cur.parse()?, choice })
    }
}

/// Relevance / potential-for-progress / helpfulness, each 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricScore {
    pub task_ref: TaskRef,
    #[serde(with = "bit")]
    pub relevance: bool,
    #[serde(with = "bit")]
    pub progress: bool,
    #[serde(with = "bit")]
    pub helpfulness: bool,
}

impl RubricScore {
    pub fn new(task_ref: TaskRef, relevance: bool, progress: bool, helpfulness: bool) -> Self {
        Self { task_ref, relevance, progress, helpfulness }
    }

    /// Builds a score from 0/1 integers.
    pub fn from_bits(task_ref: TaskRef, r: u8, p: u8, h: u8) -> Result<Self, ScoreValueError> {
        Ok(Self::new(task_ref, to_bit(r)?, to_bit(p)?, to_bit(h)?))
    }

    pub fn total(&self) -> u8 {
        self.relevance as u8 + self.progress as u8 + self.helpfulness as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rubric criteria are scored 0 or 1, got {0}")]
pub struct ScoreValueError(pub u8);

fn to_bit(v: u8) -> Result<bool, ScoreValueError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(ScoreValueError(other)),
    }
}

mod bit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(super::format!("expected 0 or 1, got {other}"))),
        }
    }
}

pub(crate) fn number_word(n: u32) -> String {
    const WORDS: [&str; 11] =
        ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    WORDS.get(n as usize).map_or_else(|| n.to_string(), |w| (*w).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn choice(i: u8) -> TaskChoice {
        TaskChoice::new(i, format!("Do task {i}."))
    }

    #[test]
    fn navigator_output_requires_exactly_three_choices() {
        let cur = StageCursor::START;
        assert_eq!(
            NavigatorOutput::new("", cur, "", vec![choice(1), choice(2)]).unwrap_err(),
            OutputShapeError::ChoiceCount(2)
        );
        assert_eq!(
            NavigatorOutput::new("", cur, "", vec![choice(1), choice(2), choice(3), choice(4)])
                .unwrap_err(),
            OutputShapeError::ChoiceCount(4)
        );
        assert_eq!(
            NavigatorOutput::new("", cur, "", vec![choice(1), choice(3), choice(2)]).unwrap_err(),
            OutputShapeError::ChoiceNumbering
        );
        let ok = NavigatorOutput::new("S.", cur, "E", vec![choice(1), choice(2), choice(3)]).unwrap();
        assert_eq!(ok.choice(2).unwrap().text, "Do task 2.");
        assert!(ok.choice(0).is_none() && ok.choice(4).is_none());
    }

    #[test]
    fn blueprint_checks_contiguity() {
        let spec = |i: u32| StageSpec {
            index: i,
            title: format!("Stage {i}"),
            objective: "obj".into(),
            completion_indicator: "done".into(),
        };
        assert!(Blueprint::new(vec![spec(1), spec(2), spec(3)]).is_ok());
        assert_eq!(
            Blueprint::new(vec![spec(1), spec(2), spec(4)]).unwrap_err(),
            BlueprintError::NonContiguous { position: 2, found: 4 }
        );
        assert_eq!(Blueprint::new(vec![]).unwrap_err(), BlueprintError::Empty);
        let json = r#"{"stages":[{"index":2,"title":"t","objective":"o","completion_indicator":""}]}"#;
        assert!(serde_json::from_str::<Blueprint>(json).is_err());
    }

    #[test]
    fn feedback_sentinel_is_derived() {
        let fb: Feedback =
            serde_json::from_str(r#"{"text":"I'm ready to move to the next stage.","sentinel":false}"#)
                .unwrap();
        assert!(fb.sentinel);
        assert!(!Feedback::new("keep going").sentinel);
    }

    #[test]
    fn task_ref_text_form() {
        let r: TaskRef = "H/4-11/3".parse().unwrap();
        assert_eq!(r.cursor, StageCursor::new(4, 11).unwrap());
        assert_eq!(r.to_string(), "H/4-11/3");
        assert!("H/4-11/4".parse::<TaskRef>().is_err());
        assert!("H/4-11".parse::<TaskRef>().is_err());
        assert!("a b/1-1/1".parse::<TaskRef>().is_err());
    }

    #[test]
    fn score_bits() {
        let r: TaskRef = "H/1-1/1".parse().unwrap();
        let s = RubricScore::from_bits(r.clone(), 1, 1, 1).unwrap();
        assert_eq!(s.total(), 3);
        assert_eq!(RubricScore::from_bits(r.clone(), 0, 0, 0).unwrap().total(), 0);
        assert_eq!(RubricScore::from_bits(r, 2, 0, 0).unwrap_err(), ScoreValueError(2));
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"relevance\":1"));
    }
}
