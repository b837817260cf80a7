//! The `planverify` command line.
//!
//! Exit codes: 0 valid, 1 usage or parse error, 2 invalid plan (or a formula
//! that fails), 3 upstream LLM failure. Usage errors from argument parsing
//! also map to 1.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use planverify_core::formats::{
    parse_plan_file, parse_rules, parse_trace, render_report, OutputFormat,
};
use planverify_core::ltl::{check, parse_formula, render_formula};
use planverify_core::plan::{DomainMode, EscortDomain};
use planverify_core::replan::{
    confirm_rules, create_session, run_iterations, LoopConfig, LoopError, RunOptions, Selection,
    Session, SessionStatus,
};
use planverify_core::translator::{LlmClient, MockLlm, PlannerScript, TranslatorError};
use planverify_core::verify;

pub const EXIT_VALID: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_LLM: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "planverify",
    version,
    about = "Verify plans against temporal rules"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a plan file against a rules file.
    Verify(VerifyArgs),
    /// Extract rules from a prompt, confirm them all, and run the replanning loop.
    Loop(LoopArgs),
    /// Evaluate one formula over a trace file.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => OutputFormat::Text,
            Format::Machine => OutputFormat::Machine,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Escort-domain plan: optional `initial E=L ...` line, then one action per line.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Labelled trace, one `state:` line per state. Replaces `--plan`.
    #[arg(long, conflicts_with = "plan", required_unless_present = "plan")]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Script {
    Success,
    Failure,
    Garbled,
}

impl From<Script> for PlannerScript {
    fn from(s: Script) -> Self {
        match s {
            Script::Success => PlannerScript::Success,
            Script::Failure => PlannerScript::Failure,
            Script::Garbled => PlannerScript::Garbled,
        }
    }
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    #[arg(long)]
    pub prompt: PathBuf,
    /// Use the scripted offline client (the default).
    #[arg(long, conflicts_with = "live")]
    pub mock: bool,
    /// Use the HTTP client configured by PLANVERIFY_LLM_URL and PLANVERIFY_LLM_KEY.
    #[arg(long)]
    pub live: bool,
    #[arg(long, value_enum, default_value = "success")]
    pub mock_script: Script,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "max-iter", default_value_t = planverify_core::replan::DEFAULT_MAX_ITERATIONS)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Also write the final session document here.
    #[arg(long)]
    pub session_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub formula: String,
    #[arg(long)]
    pub trace: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with(
    args: impl IntoIterator<Item = String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_VALID
            };
        }
    };
    let result = match cli.command {
        Command::Verify(a) => cmd_verify(&a),
        Command::Loop(a) => cmd_loop(&a),
        Command::Eval(a) => cmd_eval(&a),
    };
    match result {
        Ok((code, text)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(Failure { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

/// Returns the exit code and the text for stdout.
pub fn cmd_verify(a: &VerifyArgs) -> Result<(u8, String), Failure> {
    let rules_path = &a.rules;
    let rules = parse_rules(&read(rules_path)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", rules_path.display())))?;
    let trace = match (&a.plan, &a.trace) {
        (Some(path), _) => {
            let domain = EscortDomain::default();
            let plan = parse_plan_file(&read(path)?, &domain)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            domain
                .derive_trace(&plan)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(path)) => parse_trace(&read(path)?)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
        (None, None) => return Err(Failure::usage("one of --plan or --trace is required")),
    };
    let report = verify(&trace, &rules, a.seed).map_err(|e| Failure::usage(e.to_string()))?;
    let code = if report.plan_valid {
        EXIT_VALID
    } else {
        EXIT_INVALID
    };
    Ok((code, render_report(&report, a.format.into())))
}

fn client_for(a: &LoopArgs) -> Result<Box<dyn LlmClient>, Failure> {
    if !a.live {
        return Ok(Box::new(MockLlm::new(a.mock_script.into())));
    }
    #[cfg(feature = "live")]
    {
        planverify_core::translator::HttpLlmClient::from_env()
            .map(|c| Box::new(c) as Box<dyn LlmClient>)
            .map_err(|e| Failure {
                code: EXIT_LLM,
                message: e.to_string(),
            })
    }
    #[cfg(not(feature = "live"))]
    Err(Failure {
        code: EXIT_LLM,
        message: "built without the `live` feature".into(),
    })
}

fn loop_failure(e: LoopError) -> Failure {
    let code = match &e {
        LoopError::Translator(TranslatorError::LlmUnavailable(_)) => EXIT_LLM,
        _ => EXIT_USAGE,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

/// Runs create, confirm-all and one run of the loop.
pub fn run_loop(a: &LoopArgs, client: &dyn LlmClient) -> Result<Session, Failure> {
    let prompt = read(&a.prompt)?;
    let config = LoopConfig {
        max_iterations: a.max_iter,
        seed: a.seed,
        domain: DomainMode::default(),
        ..LoopConfig::default()
    };
    let mut session = create_session("cli", &prompt, config, client).map_err(loop_failure)?;
    let selections: Vec<Selection> = session
        .drafts
        .iter()
        .map(|d| Selection::accept(&d.id))
        .collect();
    confirm_rules(&mut session, &selections, client).map_err(loop_failure)?;
    run_iterations(&mut session, client, RunOptions::default()).map_err(loop_failure)?;
    Ok(session)
}

pub fn cmd_loop(a: &LoopArgs) -> Result<(u8, String), Failure> {
    let client = client_for(a)?;
    let session = run_loop(a, client.as_ref())?;
    let document = session_document(&session);
    if let Some(path) = &a.session_out {
        std::fs::write(path, &document)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let text = match a.format {
        Format::Machine => document,
        Format::Text => render_history(&session),
    };
    let code = match session.status {
        SessionStatus::Valid => EXIT_VALID,
        // No iteration got a plan text at all: the planner never answered.
        _ if session.iterations.iter().all(|i| i.plan_text.is_empty()) => EXIT_LLM,
        _ => EXIT_INVALID,
    };
    Ok((code, text))
}

pub fn session_document(session: &Session) -> String {
    let mut s = serde_json::to_string_pretty(session).expect("session serializes");
    s.push('\n');
    s
}

pub fn render_history(session: &Session) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Confirmed rules:");
    for c in &session.confirmed {
        let _ = writeln!(
            out,
            "  {}: {} [{}]",
            c.id,
            c.nl_text,
            render_formula(&c.formula)
        );
    }
    for it in &session.iterations {
        let verdict = match (&it.report, &it.error) {
            (Some(r), _) if r.plan_valid => "valid".to_string(),
            (Some(_), _) => "invalid".to_string(),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => "not checked".to_string(),
        };
        let _ = writeln!(
            out,
            "\nIteration {} (seed {}): {verdict}",
            it.index + 1,
            it.seed
        );
        for line in it.plan_text.lines().filter(|l| !l.trim().is_empty()) {
            let _ = writeln!(out, "  | {}", line.trim_end());
        }
        if let Some(r) = &it.report {
            let text = render_report(r, OutputFormat::Text);
            for line in text.lines() {
                let _ = writeln!(out, "  {line}");
            }
        }
    }
    let status = match session.status {
        SessionStatus::Valid => "valid plan found",
        SessionStatus::ExhaustedInvalid => "iteration budget exhausted without a valid plan",
        _ => "incomplete",
    };
    let _ = writeln!(
        out,
        "\nResult: {status} after {} iteration(s).",
        session.iterations.len()
    );
    out
}

pub fn cmd_eval(a: &EvalArgs) -> Result<(u8, String), Failure> {
    let formula = parse_formula(&a.formula).map_err(|e| Failure::usage(format!("formula: {e}")))?;
    let trace = parse_trace(&read(&a.trace)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.trace.display())))?;
    let v = check(&formula, &trace);
    if v.holds {
        return Ok((EXIT_VALID, "holds\n".to_string()));
    }
    let at = v.violation_index.expect("failing verdicts are localized");
    Ok((EXIT_INVALID, format!("fails at index {at}\n")))
}
