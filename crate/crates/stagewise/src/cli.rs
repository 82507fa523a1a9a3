//! Command-line front end.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use stagewise_core::campaign::TurnRecord;
use stagewise_core::labdata::{
    cross_check, dataset_summary, parameter_diff_report, render_iteration_table, Vocabulary,
};
use stagewise_core::navigator::ParseOptions;
use stagewise_core::refinery::{Expectation, RefinementSession, SessionEvent, Verdict};
use stagewise_core::scope::{parse_scope_output, ScopeRequest};
use stagewise_core::{
    Blueprint, Campaign, CampaignId, ChatProvider, ExecutorBrief, Exemplar, RubricScore, TaskRef,
    SENTINEL_PHRASE,
};

use crate::corpus::{drive_session, Corpus, CAMPAIGNS};
use crate::engine::{iteration_report, rubric_report, Orchestrator, Templates, TurnOutcome};
use crate::gateway::{self, GatewayConfig};
use crate::provider::{HttpProvider, ProviderConfig, RecordingProvider, ScriptedProvider};
use crate::redact::Redactor;
use crate::store::EventStore;
use crate::tables::{read_scores_file, read_screening_file};

#[derive(Debug, Parser)]
#[command(name = "stagewise", version, about = "Staged human-in-the-loop research campaigns")]
pub struct Cli {
    /// Directory holding campaign event logs.
    #[arg(long, global = true, env = "STAGEWISE_DATA_DIR", default_value = "stagewise-data")]
    pub data_dir: PathBuf,
    /// Chat-completions endpoint URL.
    #[arg(long, global = true, env = "STAGEWISE_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, global = true, env = "STAGEWISE_MODEL")]
    pub model: Option<String>,
    /// Name of the environment variable that holds the provider key.
    #[arg(long, global = true, default_value = "STAGEWISE_API_KEY")]
    pub credential_env: String,
    #[arg(long, global = true, default_value_t = 8080)]
    pub port: u16,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Serve model responses from a JSONL transcript instead of the network.
    #[arg(long, global = true)]
    pub transcript: Option<PathBuf>,
    /// Append every exchange to a JSONL transcript, credentials redacted.
    #[arg(long, global = true)]
    pub record: Option<PathBuf>,
    /// Directory with scope.txt, navigator.txt or executor.txt overrides.
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    /// Accept navigator responses that leave out the summary section.
    #[arg(long, global = true)]
    pub allow_missing_summary: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CampaignArg {
    #[arg(long, env = "STAGEWISE_CAMPAIGN")]
    pub campaign: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(subcommand)]
    Campaign(CampaignCmd),
    #[command(subcommand)]
    Turn(TurnCmd),
    /// Select one of the current turn's three tasks.
    Choose {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        index: u8,
        #[command(flatten)]
        c: CampaignArg,
    },
    /// Run the executor for the chosen task.
    Brief {
        #[command(flatten)]
        c: CampaignArg,
    },
    /// Record feedback read from FILE, or stdin for `-`, and advance.
    Feedback {
        source: String,
        /// Append the stage-advance phrase.
        #[arg(long)]
        ready: bool,
        /// Fill a slot of the brief's report template, as SLOT=VALUE.
        #[arg(long, value_name = "SLOT=VALUE")]
        fill: Vec<String>,
        #[command(flatten)]
        c: CampaignArg,
    },
    /// Record one rubric score or import a score table.
    Score {
        #[arg(required_unless_present = "import")]
        task_ref: Option<String>,
        #[arg(requires = "task_ref")]
        relevance: Option<u8>,
        #[arg(requires = "task_ref")]
        progress: Option<u8>,
        #[arg(requires = "task_ref")]
        helpfulness: Option<u8>,
        #[arg(long, conflicts_with = "task_ref")]
        import: Option<PathBuf>,
        #[arg(long)]
        overwrite: bool,
    },
    #[command(subcommand)]
    Report(ReportCmd),
    /// Fold a campaign's log from disk and print the resulting state.
    Replay {
        #[command(flatten)]
        c: CampaignArg,
    },
    /// Interactive prompt refinement.
    Refine {
        #[arg(long)]
        target: String,
        /// File holding the goal statement for the writer model.
        #[arg(long)]
        goal: Option<PathBuf>,
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Where accepted prompts are written; defaults to DATA_DIR/templates.
        #[arg(long)]
        export_dir: Option<PathBuf>,
    },
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Run the HTTP gateway.
    Serve {
        /// Screening CSV for /screening/summary.
        #[arg(long)]
        screening: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CampaignCmd {
    New {
        #[arg(long)]
        subject: String,
        #[arg(long, default_value_t = 5)]
        stages: u32,
        #[arg(long)]
        id: Option<String>,
        /// Final summary of an earlier campaign to show the model.
        #[arg(long, requires = "exemplar_subject")]
        exemplar_file: Option<PathBuf>,
        #[arg(long, requires = "exemplar_file")]
        exemplar_subject: Option<String>,
    },
    List,
    Show {
        id: String,
    },
    /// Set the stage plan: run the scope phase, parse a saved scope
    /// response, or give titles directly.
    Blueprint {
        id: String,
        #[arg(long, group = "source")]
        scope_request: Option<PathBuf>,
        #[arg(long, group = "source")]
        scope_output: Option<PathBuf>,
        #[arg(long, group = "source", num_args = 1..)]
        titles: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TurnCmd {
    Run {
        #[command(flatten)]
        c: CampaignArg,
    },
    Show {
        #[command(flatten)]
        c: CampaignArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReportCmd {
    Rubric {
        #[command(flatten)]
        c: CampaignArg,
    },
    Iterations,
    Screening {
        file: PathBuf,
        /// Compare rows against a reference table.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// List parameter changes between consecutive experiments.
        #[arg(long)]
        diffs: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum CorpusCmd {
    /// Check the bundled transcripts against the advance rule and parsers.
    Verify {
        /// Also fail on navigator responses that do not parse.
        #[arg(long)]
        strict: bool,
        #[arg(long, env = "STAGEWISE_CORPUS")]
        corpus: Option<PathBuf>,
    },
    /// Drive scripted campaigns from the corpus into the data directory.
    Replay {
        campaigns: Vec<String>,
        #[arg(long, env = "STAGEWISE_CORPUS")]
        corpus: Option<PathBuf>,
    },
}

pub type CliResult = Result<(), Box<dyn std::error::Error>>;

struct Ctx {
    cli_json: bool,
    out: Box<dyn Write>,
}

impl Ctx {
    fn emit<T: Serialize>(&mut self, value: &T, human: impl FnOnce() -> String) -> CliResult {
        if self.cli_json {
            writeln!(self.out, "{}", serde_json::to_string_pretty(value)?)?;
        } else {
            write!(self.out, "{}", human())?;
        }
        Ok(())
    }
}

fn campaign_id(s: &str) -> Result<CampaignId, Box<dyn std::error::Error>> {
    Ok(CampaignId::new(s)?)
}

fn open_store(cli: &Cli) -> Result<Arc<EventStore>, Box<dyn std::error::Error>> {
    Ok(Arc::new(EventStore::open(&cli.data_dir)?.with_redactor(Redactor::from_env(&cli.credential_env))))
}

fn provider(cli: &Cli) -> Result<Arc<dyn ChatProvider>, Box<dyn std::error::Error>> {
    let base: Box<dyn ChatProvider> = match &cli.transcript {
        Some(path) => Box::new(ScriptedProvider::load(path)?),
        None => {
            let mut config = ProviderConfig { credential_env_var: cli.credential_env.clone(), ..Default::default() };
            if let Some(e) = &cli.endpoint {
                config.endpoint_url = e.clone();
            }
            if let Some(m) = &cli.model {
                config.model_name = m.clone();
            }
            Box::new(HttpProvider::new(config))
        }
    };
    Ok(match &cli.record {
        Some(path) => Arc::new(RecordingProvider::new(base, path, Redactor::from_env(&cli.credential_env))?),
        None => Arc::from(base),
    })
}

fn orchestrator(cli: &Cli, with_provider: bool) -> Result<Orchestrator, Box<dyn std::error::Error>> {
    let provider: Arc<dyn ChatProvider> =
        if with_provider { provider(cli)? } else { Arc::new(ScriptedProvider::new(Vec::new())) };
    let templates = match &cli.templates {
        Some(dir) => Templates::load_dir(dir)?,
        None => Templates::default(),
    };
    let parse = if cli.allow_missing_summary { ParseOptions::summary_elided() } else { ParseOptions::strict() };
    Ok(Orchestrator::new(open_store(cli)?, provider).with_templates(templates).with_parse_options(parse))
}

fn locate_corpus(dir: &Option<PathBuf>) -> Result<Corpus, Box<dyn std::error::Error>> {
    Ok(match dir {
        Some(d) => Corpus::new(d),
        None => Corpus::locate()?,
    })
}

fn campaign_text(c: &Campaign) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "campaign {} ({})", c.id(), c.subject());
    let _ = writeln!(s, "status: {:?}", c.status());
    let _ = writeln!(s, "cursor: {}", c.cursor());
    let _ = writeln!(s, "state: {:?}", c.loop_state());
    let _ = writeln!(s, "events: {}", c.last_seq());
    if let Some(bp) = c.blueprint() {
        for st in bp.stages() {
            let _ = writeln!(s, "  stage {}: {}", st.index, st.title);
        }
    }
    let _ = writeln!(s, "turns: {}", c.live_turns().count());
    s
}

fn turn_text(t: &TurnRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Stage and Iteration: {}", t.output.cursor);
    if !t.output.summary.is_empty() {
        let _ = writeln!(s, "\nSummary: {}", t.output.summary);
    }
    let _ = writeln!(s, "\nEvaluation: {}", t.output.evaluation);
    for c in t.output.choices() {
        let _ = writeln!(s, "\n[{}] {}", c.index, c.text);
    }
    for l in &t.lints {
        let _ = writeln!(s, "\nlint: {l:?}");
    }
    if let Some(n) = t.chosen {
        let _ = writeln!(s, "\nchosen: {n}");
    }
    s
}

fn brief_text(b: &ExecutorBrief) -> String {
    let mut s = String::new();
    for (i, step) in b.steps.iter().enumerate() {
        let _ = writeln!(s, "{}. {step}", i + 1);
    }
    let _ = writeln!(s, "\nTemplate:\n{}", b.report_template);
    let _ = writeln!(s, "\nslots: {}", b.slots.join(", "));
    s
}

fn read_source(source: &str) -> std::io::Result<String> {
    if source == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(source)
    }
}

pub fn run(cli: Cli) -> CliResult {
    let mut ctx = Ctx { cli_json: cli.json, out: Box::new(std::io::stdout()) };
    match &cli.command {
        Command::Campaign(cmd) => campaign(&cli, &mut ctx, cmd),
        Command::Turn(TurnCmd::Run { c }) => {
            let orch = orchestrator(&cli, true)?;
            let outcome = orch.run_turn(&campaign_id(&c.campaign)?)?;
            ctx.emit(&outcome, || match &outcome {
                TurnOutcome::Parsed { turn } => turn_text(turn),
                TurnOutcome::Failed { error } => {
                    format!("the response did not parse and was recorded as failed: {error}\nrun the turn again\n")
                }
            })?;
            if let TurnOutcome::Failed { .. } = outcome {
                return Err("navigator response did not parse".into());
            }
            Ok(())
        }
        Command::Turn(TurnCmd::Show { c }) => {
            let campaign = open_store(&cli)?.snapshot(&campaign_id(&c.campaign)?)?;
            let turn = campaign.current_turn().ok_or("no turn has been parsed yet")?;
            ctx.emit(turn, || turn_text(turn))
        }
        Command::Choose { index, c } => {
            let campaign = orchestrator(&cli, false)?.choose(&campaign_id(&c.campaign)?, *index)?;
            let turn = campaign.current_turn().expect("a choice needs a turn");
            let task = &turn.output.choices()[*index as usize - 1];
            ctx.emit(&json!({ "chosen": index, "task": task }), || format!("chose task {index}: {}\n", task.text))
        }
        Command::Brief { c } => {
            let brief = orchestrator(&cli, true)?.brief(&campaign_id(&c.campaign)?)?;
            ctx.emit(&brief, || brief_text(&brief))
        }
        Command::Feedback { source, ready, fill, c } => {
            let orch = orchestrator(&cli, false)?;
            let id = campaign_id(&c.campaign)?;
            let mut parts = Vec::new();
            if !fill.is_empty() {
                let mut values = BTreeMap::new();
                for kv in fill {
                    let (k, v) = kv.split_once('=').ok_or_else(|| format!("--fill {kv:?} is not SLOT=VALUE"))?;
                    values.insert(k.to_string(), v.to_string());
                }
                parts.push(orch.fill_report(&id, &values)?);
            }
            let body = read_source(source)?;
            if !body.trim().is_empty() {
                parts.push(body.trim().to_string());
            }
            if *ready {
                parts.push(format!("{SENTINEL_PHRASE}."));
            }
            let outcome = orch.feedback(&id, parts.join("\n\n"))?;
            let cursor = orch.store().snapshot(&id)?.cursor();
            ctx.emit(&json!({ "advance": outcome.advance, "status": outcome.status, "cursor": cursor }), || {
                format!("{:?}; cursor {cursor}\n", outcome.advance)
            })
        }
        Command::Score { task_ref, relevance, progress, helpfulness, import, overwrite } => {
            let orch = orchestrator(&cli, false)?;
            let scores = match import {
                Some(path) => read_scores_file(path)?,
                None => {
                    let task: TaskRef = task_ref.as_deref().expect("required by clap").parse()?;
                    let bit = |b: &Option<u8>| b.ok_or("give relevance, progress and helpfulness as 0 or 1");
                    vec![RubricScore::from_bits(task, bit(relevance)?, bit(progress)?, bit(helpfulness)?)?]
                }
            };
            for s in &scores {
                orch.score(s.clone(), *overwrite)?;
            }
            ctx.emit(&json!({ "recorded": scores.len() }), || format!("recorded {} scores\n", scores.len()))
        }
        Command::Report(cmd) => report(&cli, &mut ctx, cmd),
        Command::Replay { c } => {
            let store = open_store(&cli)?;
            let id = campaign_id(&c.campaign)?;
            let events = store.events(&id)?;
            let campaign = store.replay(&id)?;
            let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
            for e in &events {
                *kinds.entry(e.kind.name()).or_default() += 1;
            }
            let v = json!({
                "campaign": id,
                "events": events.len(),
                "kinds": kinds,
                "status": campaign.status(),
                "cursor": campaign.cursor(),
                "state_hash": campaign.state_hash(),
            });
            ctx.emit(&v, || {
                let mut s = format!("{} events\n", events.len());
                for (k, n) in &kinds {
                    let _ = writeln!(s, "  {k}: {n}");
                }
                let _ = writeln!(s, "status {:?}, cursor {}", campaign.status(), campaign.cursor());
                let _ = writeln!(s, "state hash {}", campaign.state_hash());
                s
            })
        }
        Command::Refine { target, goal, max_rounds, export_dir } => {
            let provider = provider(&cli)?;
            let export_dir = export_dir.clone().unwrap_or_else(|| cli.data_dir.join("templates"));
            let sessions = cli.data_dir.join("refinery");
            let stdin = std::io::stdin();
            let goal = goal.as_ref().map(std::fs::read_to_string).transpose()?;
            refine(
                &mut stdin.lock(),
                &mut ctx.out,
                provider.as_ref(),
                RefineSetup {
                    target,
                    goal,
                    max_rounds: *max_rounds,
                    sessions: &sessions,
                    export_dir: &export_dir,
                    redactor: Redactor::from_env(&cli.credential_env),
                },
            )
        }
        Command::Corpus(CorpusCmd::Verify { strict, corpus }) => {
            let report = locate_corpus(corpus)?.verify()?;
            ctx.emit(&report, || report.render())?;
            let trajectories_ok =
                report.cursor_mismatches.is_empty() && report.divergences.is_empty() && report.incomplete.is_empty();
            if !trajectories_ok || (*strict && !report.parse_failures.is_empty()) {
                return Err("corpus verification failed".into());
            }
            Ok(())
        }
        Command::Corpus(CorpusCmd::Replay { campaigns, corpus }) => {
            let corpus = locate_corpus(corpus)?;
            let names: Vec<String> =
                if campaigns.is_empty() { CAMPAIGNS.iter().map(|c| c.name.to_string()).collect() } else { campaigns.clone() };
            let mut rows = Vec::new();
            for name in names {
                let provider = Arc::new(ScriptedProvider::new(corpus.session_transcript(&name)?));
                let orch = Orchestrator::new(open_store(&cli)?, provider)
                    .with_parse_options(ParseOptions::summary_elided());
                let (campaign, log) = drive_session(&orch, &corpus, &name)?;
                rows.push(json!({
                    "campaign": name,
                    "turns": log.turns,
                    "reruns": log.reruns,
                    "status": campaign.status(),
                    "state_hash": campaign.state_hash(),
                }));
            }
            ctx.emit(&rows, || {
                rows.iter()
                    .map(|r| format!("{}: {} turns, {} hash {}\n", r["campaign"].as_str().unwrap_or(""), r["turns"], r["status"], r["state_hash"].as_str().unwrap_or("")))
                    .collect()
            })
        }
        Command::Serve { screening } => {
            let orch = Arc::new(orchestrator(&cli, true)?);
            let config = GatewayConfig { screening: screening.clone() };
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on 127.0.0.1:{}", cli.port);
            rt.block_on(gateway::serve(orch, config, cli.port))?;
            Ok(())
        }
    }
}

fn campaign(cli: &Cli, ctx: &mut Ctx, cmd: &CampaignCmd) -> CliResult {
    match cmd {
        CampaignCmd::New { subject, stages, id, exemplar_file, exemplar_subject } => {
            let orch = orchestrator(cli, false)?;
            let id = match id {
                Some(id) => campaign_id(id)?,
                None => orch.store().fresh_id(subject)?,
            };
            let exemplar = match (exemplar_file, exemplar_subject) {
                (Some(f), Some(s)) => {
                    Some(Exemplar { subject: s.clone(), summary: std::fs::read_to_string(f)?.trim().to_string() })
                }
                _ => None,
            };
            let c = orch.create_campaign(id, subject.clone(), *stages, exemplar)?;
            ctx.emit(&c, || campaign_text(&c))
        }
        CampaignCmd::List => {
            let store = open_store(cli)?;
            let mut rows = Vec::new();
            for id in store.list()? {
                let c = store.snapshot(&id)?;
                rows.push(json!({ "id": id, "subject": c.subject(), "status": c.status(), "cursor": c.cursor() }));
            }
            ctx.emit(&rows, || {
                rows.iter()
                    .map(|r| {
                        format!(
                            "{:<16} {:<12} {:<9} {}\n",
                            r["id"].as_str().unwrap_or(""),
                            r["subject"].as_str().unwrap_or(""),
                            r["status"].as_str().unwrap_or(""),
                            r["cursor"].as_str().unwrap_or("")
                        )
                    })
                    .collect()
            })
        }
        CampaignCmd::Show { id } => {
            let c = open_store(cli)?.snapshot(&campaign_id(id)?)?;
            ctx.emit(&c, || campaign_text(&c))
        }
        CampaignCmd::Blueprint { id, scope_request, scope_output, titles } => {
            let id = campaign_id(id)?;
            let c = if let Some(path) = scope_request {
                let req: ScopeRequest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                orchestrator(cli, true)?.scope(&id, &req)?
            } else {
                let bp = match scope_output {
                    Some(path) => parse_scope_output(&std::fs::read_to_string(path)?)?,
                    None if !titles.is_empty() => Blueprint::from_titles(titles.iter().cloned())?,
                    None => return Err("give --scope-request, --scope-output or --titles".into()),
                };
                orchestrator(cli, false)?.set_blueprint(&id, bp)?
            };
            ctx.emit(&c, || campaign_text(&c))
        }
    }
}

fn report(cli: &Cli, ctx: &mut Ctx, cmd: &ReportCmd) -> CliResult {
    match cmd {
        ReportCmd::Rubric { c } => {
            let campaign = open_store(cli)?.snapshot(&campaign_id(&c.campaign)?)?;
            let report = rubric_report(&campaign)?;
            ctx.emit(&report, || report.render_table())
        }
        ReportCmd::Iterations => {
            let rows = iteration_report(&*open_store(cli)?)?;
            ctx.emit(&rows, || render_iteration_table(&rows))
        }
        ReportCmd::Screening { file, reference, diffs } => {
            let vocab = Vocabulary::default();
            let records = read_screening_file(file, &vocab)?;
            let summary = dataset_summary(&records)?;
            let diff_rows = if *diffs { parameter_diff_report(&records) } else { Vec::new() };
            let checks = match reference {
                Some(r) => cross_check(&records, &read_screening_file(r, &vocab)?),
                None => Vec::new(),
            };
            let v = json!({ "summary": summary, "diffs": diff_rows, "cross_check": checks });
            ctx.emit(&v, || {
                let mut s = summary.render_table();
                for d in &diff_rows {
                    let names: Vec<&str> = d.changed.iter().map(|p| p.name()).collect();
                    let mark = if d.multi_param { "  (multi-parameter)" } else { "" };
                    let _ = writeln!(s, "{} -> {}: {}{mark}", d.from, d.to, names.join(", "));
                }
                if reference.is_some() {
                    if checks.is_empty() {
                        let _ = writeln!(s, "all rows match the reference");
                    }
                    for c in &checks {
                        let _ = writeln!(s, "{c:?}");
                    }
                }
                s
            })
        }
    }
}

pub struct RefineSetup<'a> {
    pub target: &'a str,
    pub goal: Option<String>,
    pub max_rounds: Option<usize>,
    pub sessions: &'a Path,
    pub export_dir: &'a Path,
    pub redactor: Redactor,
}

const REFINE_HELP: &str = "\
commands:
  compose                          ask the writer model for a candidate
  probe FILE line|substring TEXT   run the candidate on FILE, expecting TEXT
  revise NOTE                      reject the candidate with a note
  accept                           accept the candidate and export it
  show                             print the session
  quit
";

/// Line-oriented refinement loop. The session is kept as JSONL under
/// `sessions` and resumed when the file already exists.
pub fn refine(
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    provider: &dyn ChatProvider,
    setup: RefineSetup<'_>,
) -> CliResult {
    std::fs::create_dir_all(setup.sessions)?;
    let log_path = setup.sessions.join(format!("{}.jsonl", setup.target));
    let mut session = if log_path.exists() {
        let events: Vec<SessionEvent> = std::fs::read_to_string(&log_path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        writeln!(out, "resuming {} ({} events)", log_path.display(), events.len())?;
        RefinementSession::replay(&events)?
    } else {
        let goal = setup.goal.ok_or("a new session needs --goal")?;
        let (session, started) = RefinementSession::start(setup.target, goal, setup.max_rounds)?;
        append_session(&log_path, &setup.redactor, &started)?;
        session
    };
    write!(out, "{REFINE_HELP}")?;
    let mut line = String::new();
    loop {
        write!(out, "refine> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            return Ok(());
        }
        let line = line.trim();
        let (cmd, rest) = line.split_once(' ').unwrap_or((line, ""));
        let result = match cmd {
            "" => continue,
            "quit" | "exit" => return Ok(()),
            "help" => {
                write!(out, "{REFINE_HELP}")?;
                continue;
            }
            "show" => {
                writeln!(out, "{}", serde_json::to_string_pretty(&session)?)?;
                continue;
            }
            "compose" => session.compose_candidate(provider).map(|e| (e, None)),
            "probe" => {
                let mut parts = rest.splitn(3, ' ');
                let (Some(file), Some(mode), Some(text)) = (parts.next(), parts.next(), parts.next()) else {
                    writeln!(out, "usage: probe FILE line|substring TEXT")?;
                    continue;
                };
                let expected = match mode {
                    "line" => Expectation::line(text),
                    "substring" => Expectation::substring(text),
                    _ => {
                        writeln!(out, "mode must be line or substring")?;
                        continue;
                    }
                };
                let probe_input = std::fs::read_to_string(file)?;
                session.probe_candidate(&probe_input, expected, provider).map(|e| (e, None))
            }
            "revise" => session.record_verdict(Verdict::Revise { note: rest.to_string() }),
            "accept" => session.record_verdict(Verdict::Accept),
            other => {
                writeln!(out, "unknown command {other:?}")?;
                continue;
            }
        };
        match result {
            Ok((event, exported)) => {
                append_session(&log_path, &setup.redactor, &event)?;
                match &event {
                    SessionEvent::CandidateComposed { candidate, .. } => writeln!(out, "candidate:\n{candidate}")?,
                    SessionEvent::Probed { probe } => {
                        writeln!(out, "probe output:\n{}", probe.output)?;
                        writeln!(out, "matched: {}", probe.matched)?;
                    }
                    _ => {}
                }
                if let Some(t) = exported {
                    std::fs::create_dir_all(setup.export_dir)?;
                    let path = setup.export_dir.join(format!("{}.txt", t.name));
                    std::fs::write(&path, &t.body)?;
                    writeln!(out, "exported {}", path.display())?;
                    return Ok(());
                }
            }
            Err(e) => writeln!(out, "error: {e}")?,
        }
    }
}

fn append_session(path: &Path, redactor: &Redactor, event: &SessionEvent) -> CliResult {
    let event = redactor.scrub(event)?;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(&event)?)?;
    f.sync_data()?;
    Ok(())
}
