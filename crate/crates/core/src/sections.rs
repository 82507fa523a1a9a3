//! Line-oriented splitter for "Label: body" model outputs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

fn is_decoration(c: char) -> bool {
    matches!(c, '*' | '_' | '#' | '>' | ' ' | '\t')
}

/// If `line` opens with `label` (case-insensitive, optional markdown
/// emphasis/heading markers, then a colon), returns the text after the colon.
pub(crate) fn match_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let s = line.trim_start_matches(is_decoration);
    let head = s.get(..label.len())?;
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    let rest = s[label.len()..].trim_start_matches(['*', '_', ' ', '\t']);
    let rest = rest.strip_prefix(':')?;
    Some(rest.trim_start_matches(['*', '_']).trim())
}

pub(crate) enum SplitError {
    Duplicate(usize),
}

/// Splits `text` into the bodies of `labels`. A label opens a section only
/// at the start of a line; the section runs until the next label line.
/// Text before the first label is ignored.
pub(crate) fn split(text: &str, labels: &[&str]) -> Result<Vec<Option<String>>, SplitError> {
    let mut bodies: Vec<Option<String>> = vec![None; labels.len()];
    let mut current: Option<usize> = None;
    let mut buf = String::new();

    let close = |current: Option<usize>, buf: &mut String, bodies: &mut Vec<Option<String>>| {
        if let Some(i) = current {
            bodies[i] = Some(String::from(buf.trim()));
        }
        buf.clear();
    };

    for line in text.lines() {
        let hit = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| match_label(line, l).map(|rest| (i, rest)));
        match hit {
            Some((i, rest)) => {
                close(current, &mut buf, &mut bodies);
                if bodies[i].is_some() || current == Some(i) {
                    return Err(SplitError::Duplicate(i));
                }
                // Reserve the slot so a later repeat is detected even if this
                // section ends up empty.
                bodies[i] = Some(String::new());
                current = Some(i);
                buf.push_str(rest);
            }
            None => {
                if current.is_some() {
                    buf.push('\n');
                    buf.push_str(line);
                }
            }
        }
    }
    close(current, &mut buf, &mut bodies);
    Ok(bodies)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_variants() {
        assert_eq!(match_label("Status Evaluation: ok", "Status Evaluation"), Some("ok"));
        assert_eq!(match_label("**Status Evaluation:** ok", "Status Evaluation"), Some("ok"));
        assert_eq!(match_label("**status evaluation**: ok", "Status Evaluation"), Some("ok"));
        assert_eq!(match_label("## Task Choice 1:", "Task Choice 1"), Some(""));
        assert_eq!(match_label("Task Choice 10: x", "Task Choice 1"), None);
        assert_eq!(match_label("Output Status Evaluation: x", "Status Evaluation"), None);
        assert_eq!(match_label("Status Evaluation ok", "Status Evaluation"), None);
    }

    #[test]
    fn multi_line_bodies() {
        let text = "junk\nA: one\ntwo\n\nB:\nthree\n";
        let out = match split(text, &["A", "B", "C"]) {
            Ok(v) => v,
            Err(_) => panic!("unexpected duplicate"),
        };
        assert_eq!(out[0].as_deref(), Some("one\ntwo"));
        assert_eq!(out[1].as_deref(), Some("three"));
        assert_eq!(out[2], None);
        assert!(matches!(split("A: x\nA: y", &["A"]), Err(SplitError::Duplicate(0))));
    }
}
