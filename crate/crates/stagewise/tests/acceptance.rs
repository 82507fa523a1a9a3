//! Acceptance report: one PASS or FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always show. The process
//! fails if any criterion fails other than those listed in
//! `KNOWN_UNATTAINABLE`, which are still evaluated and reported as FAIL.

mod support;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use stagewise::corpus::{golden_prompts, Corpus, CONTINUE_FEEDBACK, GOLDEN_DIR};
use stagewise::engine::rubric_report;
use stagewise::store::EventStore;
use stagewise::tables::{read_scores_file, read_screening_file};
use stagewise_core::executor::{instantiate_report, parse_executor_output};
use stagewise_core::labdata::{cross_check, dataset_summary, iteration_stats, Vocabulary};
use stagewise_core::navigator::{
    advance_cursor, parse_navigator_output_with, split_navigator_sections, Advance, NavigatorError, ParseOptions,
};
use stagewise_core::refinery::{Expectation, RefinementSession, Verdict};
use stagewise_core::rubric::{aggregate, Criterion, PublishedAssessment, Tenths};
use stagewise_core::scope::render_scope_prompt;
use stagewise_core::{
    format_cursor, parse_cursor, CampaignId, ChatProvider, EventKind, Feedback, RubricScore, StageCursor, TaskRef,
    SENTINEL_PHRASE,
};

/// Criteria that cannot pass on the bundled corpus, with the reason.
const KNOWN_UNATTAINABLE: [(&str, &str); 1] =
    [("parser coverage", "the S75 transcript prints only two task choices")];

type Outcome = Result<String, String>;

fn check(cond: bool, detail: impl Into<String>) -> Outcome {
    let detail = detail.into();
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn feedback_for(sentinel: bool) -> Feedback {
    Feedback::new(if sentinel { format!("{SENTINEL_PHRASE}.") } else { CONTINUE_FEEDBACK.to_string() })
}

fn corpus_replay(corpus: &Corpus) -> Outcome {
    let started = Instant::now();
    let rows = corpus.index().map_err(|e| e.to_string())?;
    let mut totals = BTreeMap::new();
    let mut mismatches = Vec::new();
    let mut from_sections = Vec::new();
    let mut advances = Vec::new();
    let mut incomplete = Vec::new();
    for name in ["H", "oF", "mF", "CH3"] {
        let mut expected = StageCursor::START;
        let mut done = false;
        let mut n = 0;
        for row in rows.iter().filter(|r| r.campaign == name) {
            n += 1;
            let text = corpus.navigator_fixture(&row.figure).map_err(|e| e.to_string())?;
            let printed = match parse_navigator_output_with(&text, ParseOptions::summary_elided()) {
                Ok(out) => Some(out.cursor),
                Err(_) => {
                    from_sections.push(row.figure.clone());
                    split_navigator_sections(&text).ok().and_then(|s| s.cursor).and_then(|c| parse_cursor(&c).ok())
                }
            };
            if done || printed != Some(row.cursor) || row.cursor != expected {
                mismatches.push(row.figure.clone());
            }
            match advance_cursor(expected, &feedback_for(row.sentinel), 5) {
                Advance::Moved(next) => {
                    if name == "H" && next.stage() != expected.stage() {
                        advances.push(format!("{expected}->{next}"));
                    }
                    expected = next;
                }
                Advance::CampaignComplete => done = true,
            }
        }
        if !done {
            incomplete.push(name);
        }
        totals.insert(name, n);
    }
    let elapsed = started.elapsed();
    let want_adv = ["1-5->2-1", "2-8->3-1", "3-6->4-1", "4-11->5-1"];
    let detail = format!(
        "{} turns (H {} / oF {} / mF {} / CH3 {}), {} mismatches, H advances {}, {:.0?}; cursor of {} read from its section because the full parse fails",
        rows.len(),
        totals["H"],
        totals["oF"],
        totals["mF"],
        totals["CH3"],
        mismatches.len(),
        advances.join(" "),
        elapsed,
        if from_sections.is_empty() { "none".to_string() } else { from_sections.join(", ") },
    );
    check(
        rows.len() == 115
            && mismatches.is_empty()
            && incomplete.is_empty()
            && advances == want_adv
            && elapsed < Duration::from_secs(2),
        detail,
    )
}

fn parser_coverage(corpus: &Corpus) -> Outcome {
    let rows = corpus.index().map_err(|e| e.to_string())?;
    let mut ok = 0;
    let mut missing = Vec::new();
    let mut other = Vec::new();
    for row in &rows {
        let text = corpus.navigator_fixture(&row.figure).map_err(|e| e.to_string())?;
        match parse_navigator_output_with(&text, ParseOptions::summary_elided()) {
            Ok(out) if out.choices().len() == 3 => ok += 1,
            Ok(_) => other.push(row.figure.clone()),
            Err(NavigatorError::MissingSection(s)) => missing.push(format!("{} lacks {s}", row.figure)),
            Err(e) => other.push(format!("{}: {e}", row.figure)),
        }
    }
    let mut detail = format!("{ok}/{} parse with three choices; {} MissingSection", rows.len(), missing.len());
    if !missing.is_empty() {
        detail.push_str(&format!(" ({})", missing.join(", ")));
    }
    if !other.is_empty() {
        detail.push_str(&format!("; other failures: {}", other.join(", ")));
    }
    check(ok == rows.len() && missing.is_empty() && other.is_empty(), detail)
}

fn rubric_reproduction(corpus: &Corpus) -> Outcome {
    let scores = read_scores_file(&corpus.path("rubric/h_campaign_scores.csv")).map_err(|e| e.to_string())?;
    let report = aggregate(&scores, 102).map_err(|e| e.to_string())?;
    let row = |c| report.row(c);
    let sums = [Criterion::Relevance, Criterion::Progress, Criterion::Helpfulness, Criterion::Total].map(|c| row(c).sum);
    let pcts = [Criterion::Relevance, Criterion::Progress, Criterion::Helpfulness, Criterion::Total].map(|c| row(c).percent);
    let flagged = report.discrepancies.iter().any(|d| d.criterion == Criterion::Total && d.published == Tenths(834));
    let detail = format!(
        "sums {}/{}/{}/{}, percentages {}/{}/{}, total {}%, printed 83.4% {}",
        sums[0], sums[1], sums[2], sums[3], pcts[0], pcts[1], pcts[2], pcts[3],
        if flagged { "flagged" } else { "not flagged" }
    );
    check(
        sums == [92, 82, 83, 257]
            && pcts[..3] == [Tenths(901), Tenths(803), Tenths(813)]
            && pcts[3] == Tenths(839)
            && flagged
            && report.discrepancies.len() == 1
            && report.discrepancies_against(&PublishedAssessment::MOF_521_H).map(|d| d.len()) == Some(1),
        detail,
    )
}

fn trajectories(corpus: &Corpus) -> Result<BTreeMap<String, u32>, String> {
    let rows = corpus.index().map_err(|e| e.to_string())?;
    let mut out = BTreeMap::new();
    for name in ["H", "oF", "mF", "CH3"] {
        let t: Vec<StageCursor> = rows.iter().filter(|r| r.campaign == name).map(|r| r.cursor).collect();
        out.insert(name.to_string(), iteration_stats(&t).map_err(|e| e.to_string())?.total);
    }
    Ok(out)
}

fn task_count_identity(corpus: &Corpus) -> Outcome {
    let totals = trajectories(corpus)?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (store, _, _) = support::scripted_session(corpus, "H", dir.path());
    let id = CampaignId::new("H").unwrap();
    for s in read_scores_file(&corpus.path("rubric/h_campaign_scores.csv")).map_err(|e| e.to_string())? {
        store.append(&id, EventKind::ScoreRecorded { score: s, overwrite: false }).map_err(|e| e.to_string())?;
    }
    let report = rubric_report(&store.snapshot(&id).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let h = totals["H"];
    check(
        h * 3 == 102 && report.task_count == 102,
        format!("H total {h} x 3 = {}, rubric task_count {}", h * 3, report.task_count),
    )
}

fn in_context_learning(corpus: &Corpus) -> Outcome {
    let t = trajectories(corpus)?;
    let (h, of, mf, ch3) = (t["H"], t["oF"], t["mF"], t["CH3"]);
    check(
        (of, mf, ch3) == (29, 26, 26) && of < h && mf < h && ch3 < h,
        format!("oF {of}, mF {mf}, CH3 {ch3} against H {h}"),
    )
}

fn screening(corpus: &Corpus) -> Outcome {
    let vocab = Vocabulary::default();
    let all = read_screening_file(&corpus.path("screening/table_s1.csv"), &vocab).map_err(|e| e.to_string())?;
    let subset = read_screening_file(&corpus.path("screening/table1.csv"), &vocab).map_err(|e| e.to_string())?;
    let summary = dataset_summary(&all).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = summary.linkers.iter().map(|l| l.count).collect();
    let diffs = cross_check(&subset, &all);
    check(
        all.len() == 91 && summary.total == 91 && counts == [52, 17, 12, 10] && subset.len() == 23 && diffs.is_empty(),
        format!(
            "{}/91 rows, counts {:?}, {}/{} main-table rows identical",
            all.len(),
            counts,
            subset.len() - diffs.len(),
            subset.len()
        ),
    )
}

fn golden(corpus: &Corpus) -> Outcome {
    let a = golden_prompts(corpus, tempfile::tempdir().unwrap().path()).map_err(|e| e.to_string())?;
    let b = golden_prompts(corpus, tempfile::tempdir().unwrap().path()).map_err(|e| e.to_string())?;
    let mut differing = Vec::new();
    for (name, text) in &a {
        if corpus.read(&format!("{GOLDEN_DIR}/{name}")).ok().as_deref() != Some(text.as_str()) {
            differing.push(name.clone());
        }
    }
    let scope = render_scope_prompt(&corpus.scope_request().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let scope_ref = corpus.read("scope/S37_prompt.txt").map_err(|e| e.to_string())?;
    check(
        a == b && differing.is_empty() && scope == scope_ref,
        format!(
            "{} prompts identical across two runs: {}; fixture mismatches: {}; scope equals reference: {}",
            a.len(),
            a == b,
            if differing.is_empty() { "none".into() } else { differing.join(", ") },
            scope == scope_ref
        ),
    )
}

fn replay_determinism(corpus: &Corpus) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_, live, log) = support::scripted_session(corpus, "H", dir.path());
    let id = CampaignId::new("H").unwrap();
    let cold = EventStore::open(dir.path()).map_err(|e| e.to_string())?.replay(&id).map_err(|e| e.to_string())?;
    check(
        live.state_hash() == cold.state_hash() && log.turns == 34 && live.status() == stagewise_core::CampaignStatus::Complete,
        format!("{} turns, {} events, live {} replayed {}", log.turns, live.last_seq(), &live.state_hash()[..16], &cold.state_hash()[..16]),
    )
}

fn refinery(corpus: &Corpus) -> Outcome {
    use support::RuleFollowingNavigator;
    let read = |rel: &str| corpus.read(rel).map_err(|e| e.to_string());
    let writer = stagewise::provider::ScriptedProvider::from_responses([
        read("refinery/S43_candidate_raw.txt")?,
        read("refinery/S46_revised_raw.txt")?,
    ]);
    let input = support::probe_input(corpus);
    let expected = Expectation::line("Current Stage and Iteration: 2-1");
    let note = read("refinery/S45_revision_request.txt")?.split("\n\nPrompt:").next().unwrap_or("").trim().to_string();
    let e = |e: stagewise_core::refinery::RefineryError| e.to_string();

    let (mut s, _) = RefinementSession::start("navigator", read("refinery/S42_goal.txt")?.trim(), None).map_err(e)?;
    s.compose_candidate(&writer).map_err(e)?;
    s.probe_candidate(&input, expected.clone(), &RuleFollowingNavigator).map_err(e)?;
    let first = s.rounds()[0].probe.clone().unwrap();
    let detected = !first.matched && first.output.contains("Current Stage and Iteration: 1-6");
    s.record_verdict(Verdict::Revise { note }).map_err(e)?;
    s.compose_candidate(&writer).map_err(e)?;
    s.probe_candidate(&input, expected, &RuleFollowingNavigator).map_err(e)?;
    let passed = s.rounds()[1].probe.as_ref().unwrap().matched;
    let (_, exported) = s.record_verdict(Verdict::Accept).map_err(e)?;
    let template = exported.ok_or("no template exported")?;

    // Both candidates against every cursor before the last stage, with and
    // without the advance phrase.
    let (old, new) = (s.rounds()[0].candidate.clone(), template.body.clone());
    let mut wrong = 0;
    let mut cases = 0;
    for stage in 1..=4 {
        for it in 1..=12 {
            for ready in [false, true] {
                let last = StageCursor::new(stage, it).unwrap();
                let fb = if ready { format!("{SENTINEL_PHRASE}.") } else { CONTINUE_FEEDBACK.into() };
                let input = format!("Current Summary: s\n\nLast Iteration: {last}\n\nLatest Task: t\n\nHuman Feedback: {fb}");
                let want = match advance_cursor(last, &Feedback::new(fb.clone()), 5) {
                    Advance::Moved(c) => c,
                    Advance::CampaignComplete => continue,
                };
                let got = |prompt: &str| {
                    let out = RuleFollowingNavigator.chat(&format!("{prompt}\n\n{input}")).ok()?;
                    parse_cursor(&split_navigator_sections(&out).ok()?.cursor?).ok()
                };
                cases += 1;
                // The old prompt is caught exactly when the phrase is present; the new one always agrees.
                if (got(&old) != Some(want)) != ready || got(&new) != Some(want) {
                    wrong += 1;
                }
            }
        }
    }
    check(
        detected && passed && wrong == 0,
        format!(
            "defect detected: {detected} (probe printed 1-6, expected 2-1); revised prompt passes: {passed}; exported {}; {cases} cursor cases, {wrong} disagreements",
            template.name
        ),
    )
}

fn cases(n: u32) -> Config {
    Config { failure_persistence: None, ..Config::with_cases(n) }
}

fn property_suites() -> Outcome {
    let mut notes = Vec::new();
    let mut failed = false;
    let mut run = |name: &str, cases: u32, result: Result<(), String>| {
        failed |= result.is_err();
        notes.push(match result {
            Ok(()) => format!("{name} ({cases} cases)"),
            Err(e) => format!("{name} FAILED: {e}"),
        });
    };
    let cursor = (1u32..=50, 1u32..=500).prop_map(|(s, i)| StageCursor::new(s, i).unwrap());

    let mut r = TestRunner::new(cases(10_000));
    let res = r.run(&(cursor.clone(), "[a-zA-Z .,'!?]{0,80}", 0u32..5), |(c, text, extra)| {
        let fb = Feedback::new(text);
        if fb.sentinel {
            return Ok(());
        }
        prop_assert_eq!(advance_cursor(c, &fb, c.stage() + extra), Advance::Moved(c.next_iteration()));
        Ok(())
    });
    run("non-sentinel keeps stage", 10_000, res.map_err(|e| e.to_string()));

    let mut r = TestRunner::new(cases(10_000));
    let res = r.run(&cursor, |c| {
        prop_assert_eq!(parse_cursor(&format_cursor(c)).unwrap(), c);
        Ok(())
    });
    run("cursor round trip", 10_000, res.map_err(|e| e.to_string()));

    let mut r = TestRunner::new(cases(1_000));
    let pieces = prop::collection::vec(("[a-z \n:]{0,12}", "[A-Za-z ]{1,10}"), 0..8);
    let res = r.run(&(pieces, "[a-z \n]{0,10}"), |(pieces, tail)| {
        let mut template = String::new();
        for (text, slot) in &pieces {
            template.push_str(&format!("{text}[{slot}]"));
        }
        template.push_str(&tail);
        let text = format!("Summary: s\n\nStep-by-step:\n1. a\n\nTemplate for Reporting Results:\n\n{template}");
        let brief = parse_executor_output(&text).unwrap();
        let identity: BTreeMap<String, String> = brief.slots.iter().map(|s| (s.clone(), format!("[{s}]"))).collect();
        let out = instantiate_report(&brief, &identity).unwrap();
        prop_assert_eq!(&out.text, &brief.report_template);
        Ok(())
    });
    run("slot identity", 1_000, res.map_err(|e| e.to_string()));

    let mut r = TestRunner::new(cases(1_000));
    let bits = prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..60);
    let res = r.run(&(bits, any::<u64>()), |(bits, seed)| {
        let scores: Vec<RubricScore> = bits
            .iter()
            .enumerate()
            .map(|(i, (a, b, c))| {
                let t: TaskRef = format!("C/1-{}/1", i + 1).parse().unwrap();
                RubricScore::new(t, *a, *b, *c)
            })
            .collect();
        let mut shuffled = scores.clone();
        let mut x = seed;
        for i in (1..shuffled.len()).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (x >> 33) as usize % (i + 1));
        }
        let n = scores.len() as u32;
        prop_assert_eq!(aggregate(&scores, n).unwrap(), aggregate(&shuffled, n).unwrap());
        Ok(())
    });
    run("aggregation order", 1_000, res.map_err(|e| e.to_string()));

    check(!failed, notes.join("; "))
}

fn main() {
    let corpus = Corpus::locate().expect("corpus");
    let criteria: [(&str, Box<dyn Fn() -> Outcome>); 10] = [
        ("corpus state-machine replay", Box::new(|| corpus_replay(&corpus))),
        ("parser coverage", Box::new(|| parser_coverage(&corpus))),
        ("rubric reproduction", Box::new(|| rubric_reproduction(&corpus))),
        ("task-count identity", Box::new(|| task_count_identity(&corpus))),
        ("in-context-learning arithmetic", Box::new(|| in_context_learning(&corpus))),
        ("screening dataset", Box::new(|| screening(&corpus))),
        ("golden prompts", Box::new(|| golden(&corpus))),
        ("replay determinism", Box::new(|| replay_determinism(&corpus))),
        ("refinery regression", Box::new(|| refinery(&corpus))),
        ("property suites", Box::new(property_suites)),
    ];
    let mut unexpected = Vec::new();
    for (name, f) in criteria.iter() {
        match f() {
            Ok(detail) => {
                println!("PASS {name}: {detail}");
                if KNOWN_UNATTAINABLE.iter().any(|(n, _)| n == name) {
                    eprintln!("{name} was expected to fail; update KNOWN_UNATTAINABLE");
                    unexpected.push(*name);
                }
            }
            Err(detail) => {
                match KNOWN_UNATTAINABLE.iter().find(|(n, _)| n == name) {
                    Some((_, why)) => println!("FAIL {name}: {detail} [known: {why}]"),
                    None => {
                        println!("FAIL {name}: {detail}");
                        unexpected.push(*name);
                    }
                }
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
