//! LLM-backed rule translation and plan parsing.
//!
//! The LLM only ever proposes a category and template parameters. Formulas
//! are produced by [`crate::templates::instantiate`] and re-parsed from
//! their rendering before they reach a [`ConstraintSpec`], so no raw model
//! text becomes verification logic.
//!
//! Structured replies use a fenced block (```` ```<kind> ````) of
//! line-oriented content. A reply that does not parse gets exactly one
//! repair request; a second failure is [`TranslatorError::UnparseableLlmOutput`].

pub mod client;
pub mod mock;
pub mod prompts;

use serde::{Deserialize, Serialize};

use crate::formats::parse_trace;
use crate::ltl::{parse_formula, render_formula};
use crate::plan::{Action, DomainMode, EscortDomain, PlanSteps, Trace};
use crate::templates::{
    describe, instantiate, ConstraintCategory, ConstraintSpec, TemplateError, TemplateParams,
};

#[cfg(feature = "live")]
pub use client::HttpLlmClient;
pub use client::{LlmClient, LlmConfig, LlmError, OfflineClient};
pub use mock::{MockLlm, PlannerScript};
pub use prompts::PromptTemplates;

use prompts::fill;

pub const REPAIR_MARKER: &str = "#### repair";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslatorError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error(transparent)]
    LlmUnavailable(#[from] LlmError),
    #[error("unparseable LLM output ({context}{}): {detail}", line.map(|l| format!(", line {l}")).unwrap_or_default())]
    UnparseableLlmOutput {
        context: String,
        line: Option<usize>,
        detail: String,
    },
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("prompt template error: {0}")]
    Template(String),
}

impl From<TemplateError> for TranslatorError {
    fn from(e: TemplateError) -> Self {
        TranslatorError::ParamMismatch(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintDraft {
    pub id: String,
    /// The clause as extracted from the prompt.
    pub source_text: String,
    /// Unconfirmed until the user accepts it.
    pub proposed: ConstraintSpec,
    /// Plain-language rendering shown for confirmation.
    pub paraphrase: String,
}

/// Content of the first ```` ```kind ```` block in `reply`.
pub fn fenced_block<'a>(reply: &'a str, kind: &str) -> Option<&'a str> {
    let open = format!("```{kind}");
    let mut offset = 0;
    for line in reply.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        if line.trim_end() == open {
            let body = &reply[offset..];
            let end = body
                .split_inclusive('\n')
                .scan(0usize, |pos, l| {
                    let here = *pos;
                    *pos += l.len();
                    Some((here, l))
                })
                .find(|(_, l)| l.trim_end() == "```")
                .map(|(here, _)| here)?;
            let _ = start;
            return Some(&body[..end]);
        }
    }
    None
}

fn unparseable(context: &str, line: Option<usize>, detail: impl Into<String>) -> TranslatorError {
    TranslatorError::UnparseableLlmOutput {
        context: context.to_string(),
        line,
        detail: detail.into(),
    }
}

pub struct Translator<'a> {
    client: &'a dyn LlmClient,
    pub config: LlmConfig,
    pub templates: PromptTemplates,
    pub domain: DomainMode,
}

impl<'a> Translator<'a> {
    pub fn new(client: &'a dyn LlmClient, domain: DomainMode) -> Self {
        Translator {
            client,
            config: LlmConfig::default(),
            templates: PromptTemplates::default(),
            domain,
        }
    }

    pub fn with_config(mut self, config: LlmConfig) -> Self {
        self.config = config;
        self
    }

    fn ask(&self, prompt: &str) -> Result<String, TranslatorError> {
        Ok(self.client.complete(prompt, &self.config)?)
    }

    /// Sends `prompt`, parses the reply, and on failure sends one repair
    /// request before giving up.
    fn structured<T>(
        &self,
        prompt: &str,
        kind: &str,
        parse: impl Fn(&str) -> Result<T, TranslatorError>,
    ) -> Result<T, TranslatorError> {
        let first = self.ask(prompt)?;
        let err = match parse(&first) {
            Ok(v) => return Ok(v),
            Err(e) => e,
        };
        let repair = format!(
            "{prompt}{REPAIR_MARKER}\nYour previous reply could not be used ({err}). \
             Reply again with exactly one ```{kind} fenced block.\n"
        );
        parse(&self.ask(&repair)?)
    }

    pub fn extract_rules(&self, prompt: &str) -> Result<Vec<ConstraintDraft>, TranslatorError> {
        if prompt.trim().is_empty() {
            return Err(TranslatorError::EmptyPrompt);
        }
        let request = fill(&self.templates.extractor, &[("request", prompt)])?;
        let clauses = self.structured(&request, "rules", |reply| {
            let body = fenced_block(reply, "rules")
                .ok_or_else(|| unparseable("rules", None, "missing ```rules block"))?;
            Ok(body
                .lines()
                .map(|l| l.trim().trim_start_matches(['-', '*']).trim())
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>())
        })?;
        clauses
            .iter()
            .enumerate()
            .map(|(i, clause)| self.draft(&format!("R{}", i + 1), clause, ""))
            .collect()
    }

    /// Maps, parameterizes and back-translates one clause.
    pub fn draft(
        &self,
        id: &str,
        source_text: &str,
        feedback: &str,
    ) -> Result<ConstraintDraft, TranslatorError> {
        let category = self.map_category(source_text, feedback)?;
        let proposed = self.to_ltl(id, source_text, category, feedback)?;
        let paraphrase = self.back_translate(&proposed);
        Ok(ConstraintDraft {
            id: id.to_string(),
            source_text: source_text.to_string(),
            proposed,
            paraphrase,
        })
    }

    pub fn map_category(
        &self,
        rule_text: &str,
        feedback: &str,
    ) -> Result<ConstraintCategory, TranslatorError> {
        let prompt = fill(
            &self.templates.mapper,
            &[("rule", rule_text), ("feedback", feedback)],
        )?;
        self.structured(&prompt, "category", |reply| {
            let body = fenced_block(reply, "category")
                .ok_or_else(|| unparseable("category", None, "missing ```category block"))?;
            body.trim()
                .parse::<ConstraintCategory>()
                .map_err(|e| unparseable("category", None, e.to_string()))
        })
    }

    pub fn to_ltl(
        &self,
        id: &str,
        rule_text: &str,
        category: ConstraintCategory,
        feedback: &str,
    ) -> Result<ConstraintSpec, TranslatorError> {
        let vocabulary = match self.domain.vocabulary() {
            Some(v) => {
                let mut names: Vec<&str> = v.props.iter().map(String::as_str).collect();
                names.extend(v.vars.iter().map(String::as_str));
                names.join(", ")
            }
            None => "any identifier".to_string(),
        };
        let param_names = category.param_names().join(", ");
        let prompt = fill(
            &self.templates.ltl_translator,
            &[
                ("category", category.as_str()),
                ("param_names", &param_names),
                ("vocabulary", &vocabulary),
                ("rule", rule_text),
                ("feedback", feedback),
            ],
        )?;
        let params = self.structured(&prompt, "params", |reply| {
            let body = fenced_block(reply, "params")
                .ok_or_else(|| unparseable("params", None, "missing ```params block"))?;
            let mut fields = Vec::new();
            for (n, line) in body.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once(':')
                    .ok_or_else(|| unparseable("params", Some(n + 1), "expected `name: value`"))?;
                fields.push((k.trim(), v.trim()));
            }
            TemplateParams::from_fields(category, fields).map_err(TranslatorError::from)
        })?;
        self.check_vocabulary(&params)?;
        let formula = instantiate(category, &params)?;
        // Formulas must survive the text round trip before they are trusted.
        let reparsed = parse_formula(&render_formula(&formula))
            .map_err(|e| TranslatorError::ParamMismatch(e.to_string()))?;
        debug_assert_eq!(reparsed, formula);
        let mut spec = ConstraintSpec::new(id, params)?;
        spec.formula = reparsed;
        Ok(spec)
    }

    fn check_vocabulary(&self, params: &TemplateParams) -> Result<(), TranslatorError> {
        let Some(vocab) = self.domain.vocabulary() else {
            return Ok(());
        };
        let formula = instantiate(params.category(), params)?;
        for atom in formula.atoms() {
            if !vocab.knows_prop(atom) {
                return Err(TranslatorError::ParamMismatch(format!(
                    "unknown entity `{atom}`"
                )));
            }
        }
        for var in formula.vars() {
            if !vocab.knows_var(var) {
                return Err(TranslatorError::ParamMismatch(format!(
                    "unknown entity `{var}`"
                )));
            }
        }
        Ok(())
    }

    /// The client's paraphrase if it names every parameter verbatim,
    /// otherwise the template sentence. Never fails.
    pub fn back_translate(&self, spec: &ConstraintSpec) -> String {
        let parameters: Vec<String> = spec
            .params
            .field_values()
            .into_iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect();
        let formula = render_formula(&spec.formula);
        let Ok(prompt) = fill(
            &self.templates.back_translator,
            &[
                ("formula", &formula),
                ("parameters", &parameters.join("\n")),
            ],
        ) else {
            return describe(spec);
        };
        let paraphrase = self
            .ask(&prompt)
            .ok()
            .and_then(|reply| fenced_block(&reply, "paraphrase").map(|b| b.trim().to_string()));
        match paraphrase {
            Some(text)
                if !text.is_empty()
                    && spec
                        .params
                        .mentions()
                        .iter()
                        .all(|m| text.contains(m.as_str())) =>
            {
                text
            }
            _ => describe(spec),
        }
    }

    pub fn request_plan(&self, request: &str) -> Result<String, TranslatorError> {
        let prompt = fill(
            &self.templates.planner,
            &[
                ("domain", &self.domain.prompt_description()),
                ("request", request),
            ],
        )?;
        self.ask(&prompt)
    }

    pub fn request_replan(
        &self,
        request: &str,
        rules: &[ConstraintSpec],
        previous_plan: &str,
        feedback: &str,
    ) -> Result<String, TranslatorError> {
        let rules: Vec<String> = rules
            .iter()
            .map(|r| format!("- {}: {} ({})", r.id, r.formula, r.nl_text))
            .collect();
        let prompt = fill(
            &self.templates.replanner,
            &[
                ("domain", &self.domain.prompt_description()),
                ("request", request),
                ("rules", &rules.join("\n")),
                ("previous_plan", previous_plan),
                ("feedback", feedback),
            ],
        )?;
        self.ask(&prompt)
    }

    /// Parses planner output for the session domain; on failure asks the
    /// client once to reformat it.
    pub fn interpret_plan(&self, raw: &str) -> Result<ParsedPlan, TranslatorError> {
        match self.domain.parse_plan_text(raw) {
            Ok(p) => Ok(p),
            Err(TranslatorError::UnparseableLlmOutput { .. }) => {
                let prompt = fill(
                    &self.templates.plan_parser,
                    &[("domain", &self.domain.prompt_description()), ("plan", raw)],
                )?;
                let reply = self.ask(&prompt)?;
                self.domain.parse_plan_text(&reply)
            }
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParsedPlan {
    Steps { plan: PlanSteps },
    Labeled { trace: Trace },
}

impl DomainMode {
    pub fn parse_plan_text(&self, raw: &str) -> Result<ParsedPlan, TranslatorError> {
        let text = fenced_block(raw, "plan").unwrap_or(raw);
        match self {
            DomainMode::Escort(domain) => Ok(ParsedPlan::Steps {
                plan: parse_plan(text, domain)?,
            }),
            DomainMode::Labeled => parse_trace(text)
                .map(|trace| ParsedPlan::Labeled { trace })
                .map_err(|e| unparseable("trace", e.line, e.message)),
        }
    }

    pub fn trace_of(&self, plan: &ParsedPlan) -> Result<Trace, crate::plan::PlanError> {
        match (self, plan) {
            (DomainMode::Escort(d), ParsedPlan::Steps { plan }) => d.derive_trace(plan),
            (_, ParsedPlan::Labeled { trace }) => Ok(trace.clone()),
            (DomainMode::Labeled, ParsedPlan::Steps { .. }) => Err(
                crate::plan::PlanError::InvalidDomain("action plans need a domain".into()),
            ),
        }
    }
}

fn strip_list_marker(line: &str) -> &str {
    let t = line.trim_start();
    let t = t.trim_start_matches(['-', '*']).trim_start();
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r.trim_start();
        }
    }
    t
}

/// Parses the line-oriented action schema: `escort <person> <from> <to>` or
/// `move <escort> <from> <to>`, one per line. `#` starts a comment; blank
/// lines, fence lines and list markers (`-`, `1.`) are ignored.
pub fn parse_plan(text: &str, domain: &EscortDomain) -> Result<PlanSteps, TranslatorError> {
    let mut actions = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        let words: Vec<&str> = strip_list_marker(line).split_whitespace().collect();
        let action = match words.as_slice() {
            [verb, person, from, to] if verb.eq_ignore_ascii_case("escort") => {
                Action::escort(person, from, to)
            }
            [verb, person, from, to] if verb.eq_ignore_ascii_case("move") => {
                Action::move_alone(person, from, to)
            }
            _ => {
                return Err(unparseable(
                    "plan",
                    Some(line_no),
                    format!("expected `escort P L L` or `move P L L`, got {line:?}"),
                ))
            }
        };
        let (person, from, to) = match &action {
            Action::Escort { person, from, to } | Action::Move { person, from, to } => {
                (person, from, to)
            }
        };
        if !domain.entities().any(|e| e == person) {
            return Err(TranslatorError::UnknownEntity(person.clone()));
        }
        for loc in [from, to] {
            if !domain.locations.contains(loc) {
                return Err(TranslatorError::UnknownEntity(loc.clone()));
            }
        }
        actions.push(action);
    }
    Ok(domain.plan(actions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::scenario_solution;
    use std::sync::Mutex;

    const SCENARIO: &str = include_str!("../../../../fixtures/scenario_prompt.txt");

    fn escort() -> DomainMode {
        DomainMode::Escort(EscortDomain::default())
    }

    /// Replies from a fixed queue, logging prompts.
    struct Queue(Mutex<Vec<Result<String, LlmError>>>, Mutex<Vec<String>>);

    impl Queue {
        fn new(replies: Vec<Result<String, LlmError>>) -> Self {
            let mut r = replies;
            r.reverse();
            Queue(Mutex::new(r), Mutex::new(Vec::new()))
        }
    }

    impl LlmClient for Queue {
        fn complete(&self, prompt: &str, _c: &LlmConfig) -> Result<String, LlmError> {
            self.1.lock().unwrap().push(prompt.to_string());
            self.0
                .lock()
                .unwrap()
                .pop()
                .unwrap_or(Err(LlmError::Unavailable("queue empty".into())))
        }
    }

    #[test]
    fn scenario_prompt_yields_five_drafts() {
        let mock = MockLlm::new(PlannerScript::Success);
        let t = Translator::new(&mock, escort());
        let drafts = t.extract_rules(SCENARIO).unwrap();
        let formulas: Vec<String> = drafts
            .iter()
            .map(|d| d.proposed.formula.to_string())
            .collect();
        assert_eq!(
            formulas,
            vec![
                "G !unescorted_move",
                "G escorted_count <= 1",
                "G !alone_together_P2_P3",
                "G !alone_together_P3_P4",
                "F (at_P2_L2 & at_P3_L2 & at_P4_L2)",
            ]
        );
        let ids: Vec<&str> = drafts.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, vec!["R1", "R2", "R3", "R4", "R5"]);
        assert!(drafts.iter().all(|d| !d.proposed.confirmed));
        assert!(drafts[2].paraphrase.contains("alone_together_P2_P3"));
    }

    #[test]
    fn empty_and_constraint_free_prompts() {
        let mock = MockLlm::new(PlannerScript::Success);
        let t = Translator::new(&mock, escort());
        assert_eq!(t.extract_rules("   "), Err(TranslatorError::EmptyPrompt));
        assert!(t
            .extract_rules("Please plan a nice day.")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn mapping_fixtures() {
        let mock = MockLlm::new(PlannerScript::Success);
        let t = Translator::new(&mock, DomainMode::Labeled);
        let cases = [
            (
                "P2 and P3 cannot be left alone together",
                ConstraintCategory::Global,
            ),
            (
                "only one person can be escorted at a time",
                ConstraintCategory::Global,
            ),
            (
                "dinner must be ready by 6:00 PM Wednesday",
                ConstraintCategory::FixedTimeBlock,
            ),
        ];
        for (text, expected) in cases {
            assert_eq!(t.map_category(text, "").unwrap(), expected);
        }
    }

    #[test]
    fn off_schema_mapping_gets_exactly_one_repair() {
        let mock = MockLlm::new(PlannerScript::Success);
        let t = Translator::new(&mock, escort());
        assert!(matches!(
            t.map_category("something entirely unrelated", ""),
            Err(TranslatorError::UnparseableLlmOutput { .. })
        ));
        assert_eq!(mock.calls_for(prompts::TASK_MAP), 2);

        let mock = MockLlm::new(PlannerScript::Success);
        let t = Translator::new(&mock, escort());
        assert_eq!(
            t.map_category("an ambiguous-format rule", "").unwrap(),
            ConstraintCategory::Global
        );
        assert_eq!(mock.calls_for(prompts::TASK_MAP), 2);
        assert!(mock.calls()[1].contains(REPAIR_MARKER));
    }

    #[test]
    fn to_ltl_compiles_through_templates() {
        let mock = MockLlm::new(PlannerScript::Success);
        let t = Translator::new(&mock, escort());
        let spec = t
            .to_ltl(
                "R4",
                "P3 and P4 cannot be left alone together",
                ConstraintCategory::Global,
                "",
            )
            .unwrap();
        assert_eq!(spec.formula.to_string(), "G !alone_together_P3_P4");

        let t = Translator::new(&mock, DomainMode::Labeled);
        let spec = t
            .to_ltl(
                "C1",
                "Whenever the dough is mixed, the oven must be turned on afterwards.",
                ConstraintCategory::Conditional,
                "",
            )
            .unwrap();
        assert_eq!(spec.formula.to_string(), "G (dough_mixed -> F oven_on)");
    }

    #[test]
    fn unknown_entity_is_a_param_mismatch() {
        let mock = MockLlm::new(PlannerScript::Success);
        let t = Translator::new(&mock, escort());
        let err = t
            .to_ltl(
                "R9",
                "P2 and P9 cannot be left alone together",
                ConstraintCategory::Global,
                "",
            )
            .unwrap_err();
        match err {
            TranslatorError::ParamMismatch(msg) => assert!(msg.contains("alone_together_P2_P9")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn regeneration_feedback_changes_the_pair() {
        let mock = MockLlm::new(PlannerScript::Success);
        let t = Translator::new(&mock, escort());
        let d = t
            .draft(
                "R3",
                "P2 and P3 cannot be left alone together.",
                "this should be about P3 and P4",
            )
            .unwrap();
        assert_eq!(d.proposed.formula.to_string(), "G !alone_together_P3_P4");
    }

    #[test]
    fn back_translation_gate_and_fallback() {
        let spec = ConstraintSpec::new(
            "R4",
            TemplateParams::Exclusive {
                a: crate::plan::Proposition::new("oven_on").unwrap(),
                b: crate::plan::Proposition::new("grill_on").unwrap(),
            },
        )
        .unwrap();

        let offline = OfflineClient;
        let t = Translator::new(&offline, DomainMode::Labeled);
        assert_eq!(t.back_translate(&spec), describe(&spec));

        let good = Queue::new(vec![Ok(
            "```paraphrase\nNever have oven_on and grill_on together.\n```".into(),
        )]);
        let t = Translator::new(&good, DomainMode::Labeled);
        let text = t.back_translate(&spec);
        assert!(text.contains("oven_on") && text.contains("grill_on"));
        assert_ne!(text, describe(&spec));

        let missing = Queue::new(vec![Ok("```paraphrase\nThe oven is never on.\n```".into())]);
        let t = Translator::new(&missing, DomainMode::Labeled);
        assert_eq!(t.back_translate(&spec), describe(&spec));
    }

    #[test]
    fn llm_errors_surface() {
        let q = Queue::new(vec![Err(LlmError::Timeout(5))]);
        let t = Translator::new(&q, escort());
        assert_eq!(
            t.extract_rules("anything"),
            Err(TranslatorError::LlmUnavailable(LlmError::Timeout(5)))
        );
    }

    #[test]
    fn parse_plan_fixtures() {
        let d = EscortDomain::default();
        let text = "# solution\nescort P3 L1 L2\nmove P1 L2 L1\nescort P2 L1 L2\nescort P3 L2 L1\n\
                    escort P4 L1 L2\nmove P1 L2 L1\nescort P3 L1 L2\n";
        let plan = parse_plan(text, &d).unwrap();
        assert_eq!(plan.actions, scenario_solution());
        assert_eq!(
            parse_plan("escort P9 L1 L2", &d),
            Err(TranslatorError::UnknownEntity("P9".into()))
        );
        assert!(parse_plan("", &d).unwrap().actions.is_empty());
        assert!(matches!(
            parse_plan("escort P3 L1 L2\nfly P3 L2 L1", &d),
            Err(TranslatorError::UnparseableLlmOutput { line: Some(2), .. })
        ));
        let numbered = parse_plan("1. escort P3 L1 L2\n2) move P1 L2 L1 # back", &d).unwrap();
        assert_eq!(numbered.actions.len(), 2);
    }

    #[test]
    fn fenced_block_extraction() {
        assert_eq!(
            fenced_block("x\n```plan\na\nb\n```\ny", "plan"),
            Some("a\nb\n")
        );
        assert_eq!(fenced_block("```plan\n```", "plan"), Some(""));
        assert_eq!(fenced_block("```plans\na\n```", "plan"), None);
        assert_eq!(fenced_block("```plan\nunterminated", "plan"), None);
    }
}
