//! Screening-condition records and campaign iteration statistics.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cursor::StageCursor;

/// Modulator codes accepted when no vocabulary is supplied.
pub const DEFAULT_MODULATORS: [&str; 6] = ["FA", "TFA", "AA", "BA", "HCl", "H2O"];

/// Column order of screening tables.
pub const SCREENING_COLUMNS: [&str; 6] = ["exp_id", "linker", "modulator", "lm_ratio", "temp_c", "time_h"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModulatorPart {
    pub name: String,
    pub parts: u32,
}

/// Linker-to-metal ratio `a:b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LmRatio {
    pub linker_parts: u32,
    pub metal_parts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScreeningRecord {
    pub exp_id: u32,
    pub linker: String,
    pub modulators: Vec<ModulatorPart>,
    pub lm_ratio: LmRatio,
    pub temp_c: i32,
    pub time_h: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabDataError {
    #[error("expected 6 fields, got {0}")]
    FieldCount(usize),
    #[error("linker code is empty")]
    EmptyLinker,
    #[error("bad ratio {0:?}: expected a:b with both parts at least 1")]
    BadRatio(String),
    #[error("unknown modulator code {0:?}")]
    UnknownModulatorCode(String),
    #[error("malformed modulator expression {0:?}")]
    MalformedModulator(String),
    #[error("field {field} is not an integer: {value:?}")]
    NonIntegerField { field: &'static str, value: String },
    #[error("experiment id {0} appears more than once")]
    DuplicateExpId(u32),
}

/// Maps Unicode subscript digits to ASCII (`H₂O` to `H2O`).
pub fn normalize_subscripts(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '\u{2080}'..='\u{2089}' => char::from(b'0' + (c as u32 - 0x2080) as u8),
            other => other,
        })
        .collect()
}

/// Declared modulator codes, matched after subscript normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    codes: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new(DEFAULT_MODULATORS)
    }
}

impl Vocabulary {
    pub fn new<I, S>(codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self { codes: codes.into_iter().map(|c| normalize_subscripts(c.as_ref().trim())).collect() }
    }

    pub fn contains(&self, code: &str) -> bool {
        self.codes.iter().any(|c| c == code)
    }
}

fn positive(s: &str) -> Option<u32> {
    let s = s.trim();
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok().filter(|n| *n >= 1)
}

fn parse_ratio(s: &str) -> Result<LmRatio, LabDataError> {
    let bad = || LabDataError::BadRatio(s.trim().to_string());
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok(LmRatio { linker_parts: positive(a).ok_or_else(bad)?, metal_parts: positive(b).ok_or_else(bad)? })
}

/// `"FA"` or `"A/B (p:q)"`.
fn parse_modulators(raw: &str, vocab: &Vocabulary) -> Result<Vec<ModulatorPart>, LabDataError> {
    let text = normalize_subscripts(raw.trim());
    let malformed = || LabDataError::MalformedModulator(raw.trim().to_string());
    let (names, parts): (&str, Option<&str>) = match text.split_once('(') {
        Some((names, rest)) => (names.trim(), Some(rest.trim().strip_suffix(')').ok_or_else(malformed)?)),
        None => (text.as_str(), None),
    };
    let names: Vec<&str> = names.split('/').map(str::trim).collect();
    if names.iter().any(|n| n.is_empty()) {
        return Err(malformed());
    }
    for n in &names {
        if !vocab.contains(n) {
            return Err(LabDataError::UnknownModulatorCode(n.to_string()));
        }
    }
    let parts: Vec<u32> = match parts {
        None if names.len() == 1 => Vec::from([1]),
        None => return Err(malformed()),
        Some(p) => p
            .split(':')
            .map(|x| positive(x).ok_or_else(|| LabDataError::BadRatio(p.to_string())))
            .collect::<Result<_, _>>()?,
    };
    if parts.len() != names.len() {
        return Err(malformed());
    }
    Ok(names
        .into_iter()
        .zip(parts)
        .map(|(name, parts)| ModulatorPart { name: name.to_string(), parts })
        .collect())
}

fn integer<T: core::str::FromStr>(field: &'static str, value: &str) -> Result<T, LabDataError> {
    value
        .trim()
        .parse()
        .map_err(|_| LabDataError::NonIntegerField { field, value: value.trim().to_string() })
}

/// Parses one row in [`SCREENING_COLUMNS`] order. Text fields are checked
/// before numeric ones.
pub fn parse_screening_row(fields: &[&str], vocab: &Vocabulary) -> Result<ScreeningRecord, LabDataError> {
    let [exp_id, linker, modulator, ratio, temp, time] = fields else {
        return Err(LabDataError::FieldCount(fields.len()));
    };
    let linker = normalize_subscripts(linker.trim());
    if linker.is_empty() {
        return Err(LabDataError::EmptyLinker);
    }
    let modulators = parse_modulators(modulator, vocab)?;
    let lm_ratio = parse_ratio(ratio)?;
    let exp_id: u32 = integer("exp_id", exp_id)?;
    if exp_id == 0 {
        return Err(LabDataError::NonIntegerField { field: "exp_id", value: "0".into() });
    }
    Ok(ScreeningRecord {
        exp_id,
        linker,
        modulators,
        lm_ratio,
        temp_c: integer("temp_c", temp)?,
        time_h: integer("time_h", time)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkerSummary {
    pub linker: String,
    pub count: usize,
    pub temp_c: (i32, i32),
    pub time_h: (u32, u32),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total: usize,
    /// In order of first appearance.
    pub linkers: Vec<LinkerSummary>,
}

impl DatasetSummary {
    pub fn count(&self, linker: &str) -> Option<usize> {
        self.linkers.iter().find(|l| l.linker == linker).map(|l| l.count)
    }

    pub fn render_table(&self) -> String {
        let mut out = format!("{:<10} {:>5} {:>12} {:>10}\n", "linker", "count", "temp_c", "time_h");
        for l in &self.linkers {
            out.push_str(&format!(
                "{:<10} {:>5} {:>12} {:>10}\n",
                l.linker,
                l.count,
                format!("{}-{}", l.temp_c.0, l.temp_c.1),
                format!("{}-{}", l.time_h.0, l.time_h.1)
            ));
        }
        out.push_str(&format!("{:<10} {:>5}\n", "total", self.total));
        out
    }
}

pub fn dataset_summary(records: &[ScreeningRecord]) -> Result<DatasetSummary, LabDataError> {
    let mut ids: Vec<u32> = records.iter().map(|r| r.exp_id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(LabDataError::DuplicateExpId(w[0]));
    }
    let mut linkers: Vec<LinkerSummary> = Vec::new();
    for r in records {
        match linkers.iter_mut().find(|l| l.linker == r.linker) {
            Some(l) => {
                l.count += 1;
                l.temp_c = (l.temp_c.0.min(r.temp_c), l.temp_c.1.max(r.temp_c));
                l.time_h = (l.time_h.0.min(r.time_h), l.time_h.1.max(r.time_h));
            }
            None => linkers.push(LinkerSummary {
                linker: r.linker.clone(),
                count: 1,
                temp_c: (r.temp_c, r.temp_c),
                time_h: (r.time_h, r.time_h),
            }),
        }
    }
    Ok(DatasetSummary { total: records.len(), linkers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Modulator,
    LmRatio,
    Temp,
    Time,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Modulator => "modulator",
            Parameter::LmRatio => "lm_ratio",
            Parameter::Temp => "temp",
            Parameter::Time => "time",
        }
    }
}

/// Condition parameters on which two records differ.
pub fn diff_records(a: &ScreeningRecord, b: &ScreeningRecord) -> Vec<Parameter> {
    let mut changed = Vec::new();
    if a.modulators != b.modulators {
        changed.push(Parameter::Modulator);
    }
    if a.lm_ratio != b.lm_ratio {
        changed.push(Parameter::LmRatio);
    }
    if a.temp_c != b.temp_c {
        changed.push(Parameter::Temp);
    }
    if a.time_h != b.time_h {
        changed.push(Parameter::Time);
    }
    changed
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDiff {
    pub from: u32,
    pub to: u32,
    pub changed: Vec<Parameter>,
    /// More than one parameter changed between neighbours.
    pub multi_param: bool,
}

/// Diffs consecutive experiments within each linker group, ordered by id.
pub fn parameter_diff_report(records: &[ScreeningRecord]) -> Vec<PairDiff> {
    let mut groups: Vec<(&str, Vec<&ScreeningRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(l, _)| *l == r.linker) {
            Some((_, g)) => g.push(r),
            None => groups.push((&r.linker, Vec::from([r]))),
        }
    }
    let mut out = Vec::new();
    for (_, mut group) in groups {
        group.sort_by_key(|r| r.exp_id);
        for w in group.windows(2) {
            let changed = diff_records(w[0], w[1]);
            out.push(PairDiff { from: w[0].exp_id, to: w[1].exp_id, multi_param: changed.len() > 1, changed });
        }
    }
    out.sort_by_key(|d| d.from);
    out
}

/// How a subset row relates to the reference table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossCheck {
    Missing { exp_id: u32 },
    Differs { exp_id: u32, linker_differs: bool, changed: Vec<Parameter> },
}

/// Rows of `subset` that are absent from or differ from `reference`.
pub fn cross_check(subset: &[ScreeningRecord], reference: &[ScreeningRecord]) -> Vec<CrossCheck> {
    let mut out = Vec::new();
    for row in subset {
        match reference.iter().find(|r| r.exp_id == row.exp_id) {
            None => out.push(CrossCheck::Missing { exp_id: row.exp_id }),
            Some(r) if r != row => out.push(CrossCheck::Differs {
                exp_id: row.exp_id,
                linker_differs: r.linker != row.linker,
                changed: diff_records(r, row),
            }),
            Some(_) => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trajectory step {index} goes from {from} to {to}, which the advance rule never produces")]
pub struct NonMonotonicTrajectory {
    pub index: usize,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    /// Iterations in stage 1, 2, ...
    pub per_stage: Vec<u32>,
    pub total: u32,
}

/// Per-stage iteration counts of a cursor trajectory. The trajectory must
/// start at 1-1 and move by single iterations or to the next stage's first.
pub fn iteration_stats(trajectory: &[StageCursor]) -> Result<StageCounts, NonMonotonicTrajectory> {
    let mut counts = StageCounts::default();
    let mut prev: Option<StageCursor> = None;
    for (index, &c) in trajectory.iter().enumerate() {
        let ok = match prev {
            None => c == StageCursor::START,
            Some(p) => c == p.next_iteration() || c == p.next_stage(),
        };
        if !ok {
            return Err(NonMonotonicTrajectory {
                index,
                from: prev.map(|p| p.to_string()).unwrap_or_else(|| "start".into()),
                to: c.to_string(),
            });
        }
        if c.iteration() == 1 {
            counts.per_stage.push(0);
        }
        if let Some(last) = counts.per_stage.last_mut() {
            *last = c.iteration();
        }
        counts.total += 1;
        prev = Some(c);
    }
    Ok(counts)
}

/// Per-stage counts of several campaigns, one column per stage.
pub fn render_iteration_table(rows: &[(String, StageCounts)]) -> String {
    let width = rows.iter().map(|(_, c)| c.per_stage.len()).max().unwrap_or(0);
    let mut out = format!("{:<10}", "campaign");
    for s in 1..=width {
        out.push_str(&format!(" {:>4}", format!("S{s}")));
    }
    out.push_str(&format!(" {:>6}\n", "total"));
    for (name, c) in rows {
        out.push_str(&format!("{name:<10}"));
        for s in 0..width {
            match c.per_stage.get(s) {
                Some(n) => out.push_str(&format!(" {n:>4}")),
                None => out.push_str(&format!(" {:>4}", "-")),
            }
        }
        out.push_str(&format!(" {:>6}\n", c.total));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn row(s: &str) -> Result<ScreeningRecord, LabDataError> {
        let fields: Vec<&str> = s.split(',').collect();
        parse_screening_row(&fields, &Vocabulary::default())
    }

    #[test]
    fn rows() {
        let r = row("1, BTB-H, FA, 1:1, 100, 48").unwrap();
        assert_eq!(r.modulators, vec![ModulatorPart { name: "FA".into(), parts: 1 }]);
        assert_eq!(r.lm_ratio, LmRatio { linker_parts: 1, metal_parts: 1 });
        assert_eq!((r.temp_c, r.time_h), (100, 48));

        let r = row("46, BTB-H, FA/H\u{2082}O (4:1), 3:4, 120, 84").unwrap();
        assert_eq!(
            r.modulators,
            vec![ModulatorPart { name: "FA".into(), parts: 4 }, ModulatorPart { name: "H2O".into(), parts: 1 }]
        );
        assert_eq!(row("3, BTB-CH\u{2083}, FA, 3:4, 120, 48").unwrap().linker, "BTB-CH3");
    }

    #[test]
    fn row_errors() {
        assert_eq!(row("x, BTB-H, FA, 3:0, 120, 48"), Err(LabDataError::BadRatio("3:0".into())));
        assert_eq!(row("1, BTB-H, XX, 3:4, 120, 48"), Err(LabDataError::UnknownModulatorCode("XX".into())));
        assert_eq!(
            row("1, BTB-H, FA, 3:4, hot, 48"),
            Err(LabDataError::NonIntegerField { field: "temp_c", value: "hot".into() })
        );
        assert!(matches!(row("1, BTB-H, FA/AA, 3:4, 1, 1"), Err(LabDataError::MalformedModulator(_))));
        assert_eq!(row("1, BTB-H"), Err(LabDataError::FieldCount(2)));
    }

    #[test]
    fn summary_and_diffs() {
        let recs = vec![
            row("1, A, FA, 1:1, 100, 48").unwrap(),
            row("2, A, TFA, 1:1, 100, 48").unwrap(),
            row("3, B, FA, 1:1, 120, 24").unwrap(),
            row("4, A, FA, 1:2, 140, 48").unwrap(),
        ];
        let s = dataset_summary(&recs).unwrap();
        assert_eq!(s.count("A"), Some(3));
        assert_eq!(s.linkers[0].temp_c, (100, 140));
        assert_eq!(dataset_summary(&[]).unwrap(), DatasetSummary::default());
        let mut dup = recs.clone();
        dup.push(recs[0].clone());
        assert_eq!(dataset_summary(&dup), Err(LabDataError::DuplicateExpId(1)));

        let d = parameter_diff_report(&recs);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].changed, vec![Parameter::Modulator]);
        assert_eq!(d[1], PairDiff { from: 2, to: 4, changed: vec![Parameter::Modulator, Parameter::LmRatio, Parameter::Temp], multi_param: true });
        assert!(diff_records(&recs[0], &recs[0]).is_empty());
    }

    #[test]
    fn trajectories() {
        let c = |s: &str| s.parse::<StageCursor>().unwrap();
        let t: Vec<StageCursor> = ["1-1", "1-2", "2-1", "3-1", "3-2", "3-3"].iter().map(|s| c(s)).collect();
        let stats = iteration_stats(&t).unwrap();
        assert_eq!(stats.per_stage, vec![2, 1, 3]);
        assert_eq!(stats.total, 6);
        assert_eq!(iteration_stats(&[]).unwrap(), StageCounts::default());
        assert!(iteration_stats(&[c("1-1"), c("1-3")]).is_err());
        assert!(iteration_stats(&[c("2-1")]).is_err());
    }
}
