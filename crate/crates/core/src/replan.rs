//! Sessions and the bounded verify/feedback/replan loop.
//!
//! A session moves `Drafting -> AwaitingConfirmation -> Running` and ends a
//! run in `Valid` or `ExhaustedInvalid`. Finished sessions accept further
//! rule and strictness edits and can be run again; history is append-only.
//!
//! Iteration `g` (0-based over the whole session, not per run) is verified
//! with sub-seed [`iteration_seed`]`(config.seed, g)`, so a run is replayable
//! from the session document alone.
//!
//! The first iteration of a run verifies the session's current plan (the
//! initial plan, or the last plan of the previous run). Later iterations
//! first ask the planner for a corrected plan. [`restart`] discards the
//! current plan so the next run starts from a fresh planner request.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::checker::{render_feedback, verify, Audience, VerificationReport};
use crate::flexibility::{FlexibilityError, SplitMix64, StrictnessWeight};
use crate::plan::DomainMode;
use crate::templates::ConstraintSpec;
use crate::translator::{
    ConstraintDraft, LlmClient, LlmConfig, ParsedPlan, Translator, TranslatorError,
};

pub const DEFAULT_MAX_ITERATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// At least 1.
    pub max_iterations: usize,
    pub seed: u64,
    pub domain: DomainMode,
    #[serde(default)]
    pub llm: LlmConfig,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            domain: DomainMode::default(),
            llm: LlmConfig::default(),
        }
    }
}

/// The `g+1`-th output of SplitMix64 seeded with `seed`.
pub fn iteration_seed(seed: u64, g: usize) -> u64 {
    let mut rng = SplitMix64::new(seed.wrapping_add(SplitMix64::GAMMA.wrapping_mul(g as u64)));
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Drafting,
    AwaitingConfirmation,
    Running,
    Valid,
    ExhaustedInvalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    /// Position in `Session::iterations`.
    pub index: usize,
    /// 0-based count of `run_iterations` calls that produced this entry.
    pub run: usize,
    pub seed: u64,
    /// Planner output as received.
    pub plan_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ParsedPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<VerificationReport>,
    /// What the planner is told about this iteration.
    pub feedback: String,
    /// Set when the iteration was consumed by an LLM, parse or execution failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Iteration {
    pub fn plan_valid(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.plan_valid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub prompt: String,
    pub config: LoopConfig,
    pub drafts: Vec<ConstraintDraft>,
    /// Confirmed specs in draft order.
    pub confirmed: Vec<ConstraintSpec>,
    pub iterations: Vec<Iteration>,
    pub status: SessionStatus,
    /// Plan text the next run starts from; `None` requests a fresh plan.
    pub current_plan: Option<String>,
    pub runs: usize,
}

impl Session {
    pub fn latest_report(&self) -> Option<&VerificationReport> {
        self.iterations.iter().rev().find_map(|i| i.report.as_ref())
    }

    pub fn draft(&self, id: &str) -> Option<&ConstraintDraft> {
        self.drafts.iter().find(|d| d.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoopError {
    #[error("unknown draft {0:?}")]
    UnknownDraft(String),
    #[error("unknown constraint {0:?}")]
    UnknownConstraint(String),
    #[error(transparent)]
    Flexibility(#[from] FlexibilityError),
    #[error("session is {found:?}; this operation needs {expected}")]
    InvalidState {
        expected: &'static str,
        found: SessionStatus,
    },
    #[error("no confirmed constraints")]
    NoConfirmedRules,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Translator(#[from] TranslatorError),
}

impl LoopError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            LoopError::UnknownDraft(_) => "unknown_draft",
            LoopError::UnknownConstraint(_) => "unknown_constraint",
            LoopError::Flexibility(FlexibilityError::WeightOutOfRange(_)) => "weight_out_of_range",
            LoopError::Flexibility(FlexibilityError::DuplicateId(_)) => "duplicate_id",
            LoopError::Flexibility(FlexibilityError::UnconfirmedConstraint(_)) => {
                "unconfirmed_constraint"
            }
            LoopError::InvalidState { .. } => "invalid_state",
            LoopError::NoConfirmedRules => "no_confirmed_rules",
            LoopError::InvalidConfig(_) => "invalid_config",
            LoopError::Translator(TranslatorError::EmptyPrompt) => "empty_prompt",
            LoopError::Translator(TranslatorError::LlmUnavailable(_)) => "llm_unavailable",
            LoopError::Translator(TranslatorError::UnparseableLlmOutput { .. }) => {
                "unparseable_llm_output"
            }
            LoopError::Translator(TranslatorError::ParamMismatch(_)) => "param_mismatch",
            LoopError::Translator(TranslatorError::UnknownEntity(_)) => "unknown_entity",
            LoopError::Translator(TranslatorError::Template(_)) => "template_error",
        }
    }
}

fn translator<'a>(client: &'a dyn LlmClient, config: &LoopConfig) -> Translator<'a> {
    Translator::new(client, config.domain.clone()).with_config(config.llm.clone())
}

/// Extracts drafts and requests the initial plan, which is stored unverified.
pub fn create_session(
    id: impl Into<String>,
    prompt: &str,
    config: LoopConfig,
    client: &dyn LlmClient,
) -> Result<Session, LoopError> {
    if config.max_iterations == 0 {
        return Err(LoopError::InvalidConfig(
            "max_iterations must be at least 1".into(),
        ));
    }
    let t = translator(client, &config);
    let drafts = t.extract_rules(prompt)?;
    let plan = t.request_plan(prompt)?;
    Ok(Session {
        id: id.into(),
        prompt: prompt.to_string(),
        config,
        drafts,
        confirmed: Vec::new(),
        iterations: Vec::new(),
        status: SessionStatus::AwaitingConfirmation,
        current_plan: Some(plan),
        runs: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Regenerate { feedback: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub draft_id: String,
    #[serde(flatten)]
    pub decision: Decision,
}

impl Selection {
    pub fn accept(id: &str) -> Self {
        Selection {
            draft_id: id.to_string(),
            decision: Decision::Accept,
        }
    }

    pub fn regenerate(id: &str, feedback: &str) -> Self {
        Selection {
            draft_id: id.to_string(),
            decision: Decision::Regenerate {
                feedback: feedback.to_string(),
            },
        }
    }
}

fn editable(session: &Session) -> Result<(), LoopError> {
    match session.status {
        SessionStatus::Drafting => Err(LoopError::InvalidState {
            expected: "drafts to exist",
            found: session.status,
        }),
        _ => Ok(()),
    }
}

/// Accepted drafts become the confirmed set, replacing the previous one;
/// strictness already set on a still-identical rule is kept. Regenerated
/// drafts are replaced and wait for a later submission. The session is
/// `Running` afterwards iff nothing was regenerated and something was accepted.
pub fn confirm_rules(
    session: &mut Session,
    selections: &[Selection],
    client: &dyn LlmClient,
) -> Result<(), LoopError> {
    editable(session)?;
    if let Some(s) = selections
        .iter()
        .find(|s| session.draft(&s.draft_id).is_none())
    {
        return Err(LoopError::UnknownDraft(s.draft_id.clone()));
    }
    let t = translator(client, &session.config);
    let mut drafts = session.drafts.clone();
    let mut accepted = Vec::new();
    let mut regenerated = false;
    for s in selections {
        let pos = drafts
            .iter()
            .position(|d| d.id == s.draft_id)
            .expect("checked above");
        match &s.decision {
            Decision::Accept => accepted.push(s.draft_id.clone()),
            Decision::Regenerate { feedback } => {
                let old = &drafts[pos];
                drafts[pos] = t.draft(&old.id, &old.source_text, feedback)?;
                regenerated = true;
            }
        }
    }
    let confirmed: Vec<ConstraintSpec> = drafts
        .iter()
        .filter(|d| accepted.contains(&d.id))
        .map(|d| {
            let mut spec = d.proposed.clone().confirmed();
            if let Some(prev) = session
                .confirmed
                .iter()
                .find(|c| c.id == spec.id && c.formula == spec.formula)
            {
                spec.strictness = prev.strictness;
            }
            spec
        })
        .collect();
    session.drafts = drafts;
    session.status = if !regenerated && !confirmed.is_empty() {
        SessionStatus::Running
    } else {
        SessionStatus::AwaitingConfirmation
    };
    session.confirmed = confirmed;
    Ok(())
}

/// Appends a draft for a rule the extractor missed.
pub fn add_rule(
    session: &mut Session,
    text: &str,
    client: &dyn LlmClient,
) -> Result<(), LoopError> {
    editable(session)?;
    if text.trim().is_empty() {
        return Err(TranslatorError::EmptyPrompt.into());
    }
    let next = session
        .drafts
        .iter()
        .filter_map(|d| d.id.strip_prefix('R')?.parse::<usize>().ok())
        .max()
        .unwrap_or(0)
        + 1;
    let draft = translator(client, &session.config).draft(&format!("R{next}"), text.trim(), "")?;
    session.drafts.push(draft);
    session.status = SessionStatus::AwaitingConfirmation;
    Ok(())
}

/// Past reports keep the weights they were computed with.
pub fn adjust_strictness(
    session: &mut Session,
    constraint_id: &str,
    weight: f64,
) -> Result<(), LoopError> {
    let weight = StrictnessWeight::new(weight)?;
    let spec = session
        .confirmed
        .iter_mut()
        .find(|c| c.id == constraint_id)
        .ok_or_else(|| LoopError::UnknownConstraint(constraint_id.to_string()))?;
    spec.strictness = weight;
    Ok(())
}

/// Drops the current plan; the next run starts with a fresh planner request.
pub fn restart(session: &mut Session) {
    session.current_plan = None;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub max_iterations: Option<usize>,
}

fn obtain_plan(
    session: &Session,
    t: &Translator<'_>,
    first_of_run: bool,
) -> Result<String, TranslatorError> {
    match (&session.current_plan, session.iterations.last()) {
        (Some(plan), _) if first_of_run => Ok(plan.clone()),
        (Some(plan), Some(last)) => {
            t.request_replan(&session.prompt, &session.confirmed, plan, &last.feedback)
        }
        _ => t.request_plan(&session.prompt),
    }
}

/// Runs at most `max_iterations` iterations, stopping at the first valid
/// plan. Failures inside an iteration are recorded on it and consume it.
pub fn run_iterations(
    session: &mut Session,
    client: &dyn LlmClient,
    options: RunOptions,
) -> Result<(), LoopError> {
    match session.status {
        SessionStatus::Running | SessionStatus::Valid | SessionStatus::ExhaustedInvalid => {}
        found => {
            return Err(LoopError::InvalidState {
                expected: "confirmed rules",
                found,
            })
        }
    }
    if session.confirmed.is_empty() {
        return Err(LoopError::NoConfirmedRules);
    }
    if let Some(seed) = options.seed {
        session.config.seed = seed;
    }
    if let Some(max) = options.max_iterations {
        if max == 0 {
            return Err(LoopError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        session.config.max_iterations = max;
    }
    // Surfaces weight/duplicate problems before any LLM call.
    crate::flexibility::sample_active_set(&session.confirmed, session.config.seed)?;

    let t = translator(client, &session.config);
    let run = session.runs;
    session.runs += 1;
    session.status = SessionStatus::Running;
    for k in 0..session.config.max_iterations {
        let index = session.iterations.len();
        let seed = iteration_seed(session.config.seed, index);
        let mut it = Iteration {
            index,
            run,
            seed,
            plan_text: String::new(),
            plan: None,
            trace_len: None,
            report: None,
            feedback: String::new(),
            error: None,
        };
        match obtain_plan(session, &t, k == 0) {
            Err(e) => {
                it.feedback = format!("No plan was received ({e}). Produce a complete plan.");
                it.error = Some(e.to_string());
            }
            Ok(text) => {
                session.current_plan = Some(text.clone());
                it.plan_text = text;
                evaluate(session, &t, &mut it);
            }
        }
        let valid = it.plan_valid();
        session.iterations.push(it);
        if valid {
            session.status = SessionStatus::Valid;
            return Ok(());
        }
    }
    session.status = SessionStatus::ExhaustedInvalid;
    Ok(())
}

fn evaluate(session: &Session, t: &Translator<'_>, it: &mut Iteration) {
    let plan = match t.interpret_plan(&it.plan_text) {
        Ok(p) => p,
        Err(e) => {
            it.feedback =
                format!("The plan could not be read ({e}). Use exactly the required step syntax.");
            it.error = Some(e.to_string());
            return;
        }
    };
    let trace = session.config.domain.trace_of(&plan);
    it.plan = Some(plan);
    let trace = match trace {
        Ok(trace) => trace,
        Err(e) => {
            it.feedback = format!("The plan cannot be executed: {e}. Produce an executable plan.");
            it.error = Some(e.to_string());
            return;
        }
    };
    it.trace_len = Some(trace.len());
    match verify(&trace, &session.confirmed, it.seed) {
        Ok(report) => {
            it.feedback = render_feedback(&report, Audience::Llm);
            it.report = Some(report);
        }
        Err(e) => {
            it.error = Some(e.to_string());
        }
    }
}

/// Deterministic answer assembled from session state. A question naming a
/// confirmed rule id gets that rule's details first.
pub fn ask(session: &Session, question: &str) -> String {
    let mut out = String::new();
    let mentioned: Vec<&ConstraintSpec> = session
        .confirmed
        .iter()
        .filter(|c| {
            question
                .split(|ch: char| !ch.is_ascii_alphanumeric() && ch != '_')
                .any(|w| w.eq_ignore_ascii_case(&c.id))
        })
        .collect();
    let report = session.latest_report();
    for c in &mentioned {
        let _ = writeln!(
            out,
            "{} ({}, strictness {}%): {} Formula: {}.",
            c.id, c.category, c.strictness, c.nl_text, c.formula
        );
        if let Some(r) = report.and_then(|r| r.result(&c.id)) {
            let status = match r.verdict {
                None => "was not sampled in the last check".to_string(),
                Some(v) if v.holds => "held in the last check".to_string(),
                Some(v) => format!(
                    "was violated at step {} in the last check",
                    v.violation_index.unwrap_or(0)
                ),
            };
            let _ = writeln!(out, "It {status}.");
        }
    }
    if mentioned.is_empty() {
        let _ = writeln!(
            out,
            "The session has {} confirmed rule(s) and {} recorded iteration(s); status is {:?}.",
            session.confirmed.len(),
            session.iterations.len(),
            session.status
        );
        for c in &session.confirmed {
            let _ = writeln!(
                out,
                "- {} (strictness {}%): {}",
                c.id, c.strictness, c.nl_text
            );
        }
        if let Some(r) = report {
            out.push_str(&render_feedback(r, Audience::User));
        }
    }
    if let Some(r) = report {
        let sampled: Vec<&str> = r
            .sampling
            .iter()
            .filter(|d| d.included)
            .map(|d| d.id.as_str())
            .collect();
        let _ = writeln!(
            out,
            "The last check used seed {} and sampled {}.",
            r.seed,
            if sampled.is_empty() {
                "no rules".to_string()
            } else {
                sampled.join(", ")
            }
        );
    }
    out.push_str(
        "Rules at 100% strictness are always checked; a rule at w% is checked in a run with probability w%.\n",
    );
    out
}
