//! CSV input and output for screening tables and rubric scores.

use std::io::{Read, Write};
use std::path::Path;

use stagewise_core::labdata::{parse_screening_row, LabDataError, ScreeningRecord, Vocabulary, SCREENING_COLUMNS};
use stagewise_core::{RubricScore, TaskRef};

pub const SCORE_COLUMNS: [&str; 5] = ["task_ref", "relevance", "progress", "helpfulness", "total"];

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: header must be {expected}")]
    Header { path: String, expected: String },
    #[error("{path} line {line}: {message}")]
    Row { path: String, line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], path: &str) -> Result<(), TableError> {
    let headers = rdr.headers().map_err(|source| TableError::Csv { path: path.into(), source })?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(TableError::Header { path: path.into(), expected: expected.join(",") });
    }
    Ok(())
}

pub fn read_screening(input: impl Read, name: &str, vocab: &Vocabulary) -> Result<Vec<ScreeningRecord>, TableError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &SCREENING_COLUMNS, name)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| TableError::Csv { path: name.into(), source })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<&str> = rec.iter().collect();
        let row = parse_screening_row(&fields, vocab)
            .map_err(|e: LabDataError| TableError::Row { path: name.into(), line, message: e.to_string() })?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_screening_file(path: &Path, vocab: &Vocabulary) -> Result<Vec<ScreeningRecord>, TableError> {
    read_screening(std::fs::File::open(path)?, &path.display().to_string(), vocab)
}

/// Reads `task_ref,relevance,progress,helpfulness,total`; the total column
/// is checked against the three criteria.
pub fn read_scores(input: impl Read, name: &str) -> Result<Vec<RubricScore>, TableError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &SCORE_COLUMNS, name)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| TableError::Csv { path: name.into(), source })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| TableError::Row { path: name.into(), line, message };
        let task: TaskRef = rec[0].parse().map_err(|e| err(format!("{e}")))?;
        let bit = |i: usize| rec[i].parse::<u8>().map_err(|_| err(format!("{} is not 0 or 1", &rec[i])));
        let score = RubricScore::from_bits(task, bit(1)?, bit(2)?, bit(3)?).map_err(|e| err(e.to_string()))?;
        if !rec[4].is_empty() && rec[4].parse::<u8>().ok() != Some(score.total()) {
            return Err(err(format!("total {} does not equal the criteria sum {}", &rec[4], score.total())));
        }
        out.push(score);
    }
    Ok(out)
}

pub fn read_scores_file(path: &Path) -> Result<Vec<RubricScore>, TableError> {
    read_scores(std::fs::File::open(path)?, &path.display().to_string())
}

pub fn write_scores(out: impl Write, scores: &[RubricScore]) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |source| TableError::Csv { path: "<output>".into(), source };
    w.write_record(SCORE_COLUMNS).map_err(csv_err)?;
    for s in scores {
        w.write_record([
            s.task_ref.to_string(),
            (s.relevance as u8).to_string(),
            (s.progress as u8).to_string(),
            (s.helpfulness as u8).to_string(),
            s.total().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_round_trip() {
        let text = "task_ref,relevance,progress,helpfulness,total\nH/1-1/1,1,0,1,2\nH/1-1/2,0,0,0,0\n";
        let scores = read_scores(text.as_bytes(), "mem").unwrap();
        assert_eq!(scores.len(), 2);
        let mut out = Vec::new();
        write_scores(&mut out, &scores).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
        let bad = "task_ref,relevance,progress,helpfulness,total\nH/1-1/1,1,0,1,3\n";
        assert!(matches!(read_scores(bad.as_bytes(), "mem"), Err(TableError::Row { line: 2, .. })));
    }

    #[test]
    fn screening_header_is_checked() {
        let text = "id,linker\n1,A\n";
        assert!(matches!(
            read_screening(text.as_bytes(), "mem", &Vocabulary::default()),
            Err(TableError::Header { .. })
        ));
    }
}
