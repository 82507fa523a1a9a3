//! Task-quality rubric aggregation.
//!
//! Percentages are truncated, not rounded, to one decimal place; the raw
//! quotient is kept next to the displayed value.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::RubricScore;

/// A percentage held as whole tenths, e.g. `901` for 90.1%.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tenths(pub u32);

impl Tenths {
    /// `floor(1000 * num / den)` tenths of a percent. `den` must be non-zero.
    pub fn truncated(num: u64, den: u64) -> Self {
        Tenths((num * 1000 / den) as u32)
    }
}

impl fmt::Display for Tenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Relevance,
    Progress,
    Helpfulness,
    Total,
}

impl Criterion {
    pub fn label(self) -> &'static str {
        match self {
            Criterion::Relevance => "Relevance",
            Criterion::Progress => "Potential for progress",
            Criterion::Helpfulness => "Helpfulness",
            Criterion::Total => "Total",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub criterion: Criterion,
    pub sum: u32,
    pub percent: Tenths,
    /// Untruncated percentage.
    pub raw_percent: f64,
}

impl Row {
    fn new(criterion: Criterion, sum: u32, out_of: u64) -> Self {
        Row {
            criterion,
            sum,
            percent: Tenths::truncated(sum as u64, out_of),
            raw_percent: 100.0 * sum as f64 / out_of as f64,
        }
    }
}

/// A printed figure that the computed report disagrees with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub criterion: Criterion,
    pub published: Tenths,
    pub computed: Tenths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricReport {
    pub task_count: u32,
    pub rows: [Row; 4],
    /// Filled when the sums match a published assessment whose printed
    /// percentages differ from the computed ones.
    pub discrepancies: Vec<Discrepancy>,
}

impl RubricReport {
    pub fn row(&self, c: Criterion) -> &Row {
        match c {
            Criterion::Relevance => &self.rows[0],
            Criterion::Progress => &self.rows[1],
            Criterion::Helpfulness => &self.rows[2],
            Criterion::Total => &self.rows[3],
        }
    }

    /// Compares against `published` if it describes the same tallies.
    pub fn discrepancies_against(&self, published: &PublishedAssessment) -> Option<Vec<Discrepancy>> {
        let same = published.task_count == self.task_count
            && published.rows.iter().zip(&self.rows).all(|(p, r)| p.1 == r.sum);
        if !same {
            return None;
        }
        Some(
            published
                .rows
                .iter()
                .zip(&self.rows)
                .filter(|(p, r)| p.2 != r.percent)
                .map(|(p, r)| Discrepancy { criterion: p.0, published: p.2, computed: r.percent })
                .collect(),
        )
    }

    /// Criterion / score / percentage table.
    pub fn render_table(&self) -> String {
        let mut out = format!("Assessment of {} task suggestions\n", self.task_count);
        out.push_str(&format!("{:<24} {:>6} {:>11}\n", "Criterion", "Score", "Percentage"));
        for row in &self.rows {
            let mut line =
                format!("{:<24} {:>6} {:>10}%", row.criterion.label(), row.sum, format!("{}", row.percent));
            if let Some(d) = self.discrepancies.iter().find(|d| d.criterion == row.criterion) {
                line.push_str(&format!("  [published: {}%, discrepancy]", d.published));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Printed tallies to check computed reports against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedAssessment {
    pub task_count: u32,
    pub rows: [(Criterion, u32, Tenths); 4],
}

impl PublishedAssessment {
    /// The MOF-521-H campaign assessment as printed: 102 tasks, total row
    /// printed as 83.4%.
    pub const MOF_521_H: PublishedAssessment = PublishedAssessment {
        task_count: 102,
        rows: [
            (Criterion::Relevance, 92, Tenths(901)),
            (Criterion::Progress, 82, Tenths(803)),
            (Criterion::Helpfulness, 83, Tenths(813)),
            (Criterion::Total, 257, Tenths(834)),
        ],
    };
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RubricError {
    #[error("cannot aggregate over zero tasks")]
    ZeroTasks,
    #[error("task_count is {task_count} but {scored} scores were given")]
    TaskCountMismatch { task_count: u32, scored: usize },
}

/// Per-criterion sums and truncated percentages; the total row is over
/// `3 * task_count`.
pub fn aggregate<'a>(
    scores: impl IntoIterator<Item = &'a RubricScore>,
    task_count: u32,
) -> Result<RubricReport, RubricError> {
    if task_count == 0 {
        return Err(RubricError::ZeroTasks);
    }
    let (mut r, mut p, mut h, mut n) = (0u32, 0u32, 0u32, 0usize);
    for s in scores {
        r += s.relevance as u32;
        p += s.progress as u32;
        h += s.helpfulness as u32;
        n += 1;
    }
    if n != task_count as usize {
        return Err(RubricError::TaskCountMismatch { task_count, scored: n });
    }
    let t = task_count as u64;
    let mut report = RubricReport {
        task_count,
        rows: [
            Row::new(Criterion::Relevance, r, t),
            Row::new(Criterion::Progress, p, t),
            Row::new(Criterion::Helpfulness, h, t),
            Row::new(Criterion::Total, r + p + h, 3 * t),
        ],
        discrepancies: Vec::new(),
    };
    if let Some(d) = report.discrepancies_against(&PublishedAssessment::MOF_521_H) {
        report.discrepancies = d;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskRef;

    fn scores(n: u32, f: impl Fn(u32) -> (bool, bool, bool)) -> Vec<RubricScore> {
        (0..n)
            .map(|i| {
                let (r, p, h) = f(i);
                let t: TaskRef = format!("X/1-{}/1", i + 1).parse().unwrap();
                RubricScore::new(t, r, p, h)
            })
            .collect()
    }

    #[test]
    fn truncation_not_rounding() {
        assert_eq!(Tenths::truncated(92, 102).to_string(), "90.1");
        assert_eq!(Tenths::truncated(82, 102).to_string(), "80.3");
        assert_eq!(Tenths::truncated(83, 102).to_string(), "81.3");
        assert_eq!(Tenths::truncated(257, 306).to_string(), "83.9");
        assert_eq!(Tenths::truncated(10, 10).to_string(), "100.0");
    }

    #[test]
    fn all_ones() {
        let report = aggregate(&scores(10, |_| (true, true, true)), 10).unwrap();
        assert!(report.rows.iter().all(|r| r.percent == Tenths(1000)));
        assert_eq!(report.row(Criterion::Total).sum, 30);
        assert!(report.discrepancies.is_empty());
    }

    #[test]
    fn published_tallies_flag_the_total() {
        let s = scores(102, |i| (i < 92, i < 82, i < 83));
        let report = aggregate(&s, 102).unwrap();
        assert_eq!(
            report.discrepancies,
            vec![Discrepancy { criterion: Criterion::Total, published: Tenths(834), computed: Tenths(839) }]
        );
        let table = report.render_table();
        assert!(table.contains("Relevance"));
        assert!(table.contains("[published: 83.4%, discrepancy]"));
    }

    #[test]
    fn errors() {
        assert_eq!(aggregate(&[], 0), Err(RubricError::ZeroTasks));
        assert_eq!(
            aggregate(&scores(3, |_| (true, true, true)), 4),
            Err(RubricError::TaskCountMismatch { task_count: 4, scored: 3 })
        );
    }
}
