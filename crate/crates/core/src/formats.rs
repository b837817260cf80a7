//! On-disk formats.
//!
//! Rules file (TOML), one `[[rule]]` table per constraint:
//!
//! ```toml
//! [[rule]]
//! id = "R3"
//! category = "global"
//! strictness = 1.0          # optional, default 1.0
//! confirmed = true          # optional, default true
//! formula = "G !alone_together_P2_P3"   # optional, must match the template
//! params = { condition = "!alone_together_P2_P3" }
//! ```
//!
//! Plan file: an optional `initial <entity>=<location> ...` line, then one
//! action per line (`escort P3 L1 L2`, `move P1 L2 L1`). `#` starts a comment.
//!
//! Trace file: one `state: <props> <var>=<int> ...` line per state, in order.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Deserialize;

use crate::checker::{render_feedback, Audience, VerificationReport};
use crate::flexibility::StrictnessWeight;
use crate::ltl::{parse_formula, render_formula};
use crate::plan::{EscortDomain, Placement, PlanSteps, State, Trace};
use crate::templates::{ConstraintCategory, ConstraintSpec, TemplateParams};
use crate::translator::{parse_plan, TranslatorError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    /// 1-based.
    pub line: Option<usize>,
    pub message: String,
}

impl FormatError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        FormatError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        FormatError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for FormatError {}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    #[serde(default)]
    rule: Vec<toml::Spanned<RawRule>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: String,
    category: String,
    params: BTreeMap<String, toml::Value>,
    formula: Option<String>,
    strictness: Option<f64>,
    confirmed: Option<bool>,
}

fn param_text(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        _ => None,
    }
}

pub fn parse_rules(text: &str) -> Result<Vec<ConstraintSpec>, FormatError> {
    let file: RulesFile = toml::from_str(text).map_err(|e| FormatError {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let mut out: Vec<ConstraintSpec> = Vec::new();
    for spanned in file.rule {
        let line = line_of(text, spanned.span().start);
        let raw = spanned.into_inner();
        let category: ConstraintCategory = raw
            .category
            .parse()
            .map_err(|e: crate::templates::TemplateError| FormatError::at(line, e.to_string()))?;
        let mut fields = Vec::new();
        for (k, v) in &raw.params {
            let text = param_text(v).ok_or_else(|| {
                FormatError::at(line, format!("parameter `{k}` must be a string or integer"))
            })?;
            fields.push((k.clone(), text));
        }
        let params = TemplateParams::from_fields(
            category,
            fields.iter().map(|(k, v)| (k.as_str(), v.as_str())),
        )
        .map_err(|e| FormatError::at(line, format!("rule {}: {e}", raw.id)))?;
        let mut spec = ConstraintSpec::new(raw.id.clone(), params)
            .map_err(|e| FormatError::at(line, format!("rule {}: {e}", raw.id)))?;
        if let Some(text) = &raw.formula {
            let stated = parse_formula(text)
                .map_err(|e| FormatError::at(line, format!("rule {}: {e}", raw.id)))?;
            if stated != spec.formula {
                return Err(FormatError::at(
                    line,
                    format!(
                        "rule {}: formula `{}` does not match its template (`{}`)",
                        raw.id,
                        render_formula(&stated),
                        render_formula(&spec.formula)
                    ),
                ));
            }
        }
        if let Some(w) = raw.strictness {
            spec.strictness = StrictnessWeight::new(w)
                .map_err(|e| FormatError::at(line, format!("rule {}: {e}", raw.id)))?;
        }
        spec.confirmed = raw.confirmed.unwrap_or(true);
        if out.iter().any(|r| r.id == spec.id) {
            return Err(FormatError::at(
                line,
                format!("duplicate rule id {:?}", spec.id),
            ));
        }
        out.push(spec);
    }
    Ok(out)
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Inverse of [`parse_rules`] for any valid rule set.
pub fn render_rules(rules: &[ConstraintSpec]) -> String {
    let mut out = String::new();
    for (i, r) in rules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let params: Vec<String> = r
            .params
            .field_values()
            .into_iter()
            .map(|(k, v)| match k {
                "start" | "end" => format!("{k} = {v}"),
                _ => format!("{k} = {}", toml_string(&v)),
            })
            .collect();
        let _ = writeln!(out, "[[rule]]");
        let _ = writeln!(out, "id = {}", toml_string(&r.id));
        let _ = writeln!(out, "category = {}", toml_string(r.category.as_str()));
        let _ = writeln!(out, "strictness = {:?}", r.strictness.value());
        let _ = writeln!(out, "confirmed = {}", r.confirmed);
        let _ = writeln!(
            out,
            "formula = {}",
            toml_string(&render_formula(&r.formula))
        );
        let _ = writeln!(out, "params = {{ {} }}", params.join(", "));
    }
    out
}

fn translator_to_format(e: TranslatorError) -> FormatError {
    match e {
        TranslatorError::UnparseableLlmOutput { line, detail, .. } => FormatError {
            line,
            message: detail,
        },
        other => FormatError::general(other.to_string()),
    }
}

pub fn parse_plan_file(text: &str, domain: &EscortDomain) -> Result<PlanSteps, FormatError> {
    let mut initial: Option<(usize, Placement)> = None;
    let mut body = String::new();
    let mut seen_step = false;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        match line.strip_prefix("initial") {
            Some(rest) if rest.is_empty() || rest.starts_with(char::is_whitespace) => {
                if initial.is_some() || seen_step {
                    return Err(FormatError::at(n + 1, "`initial` must be the first entry"));
                }
                let mut placement = Placement::new();
                for pair in rest.split_whitespace() {
                    let (e, l) = pair.split_once('=').ok_or_else(|| {
                        FormatError::at(n + 1, format!("expected entity=location, got {pair:?}"))
                    })?;
                    placement.insert(e.to_string(), l.to_string());
                }
                initial = Some((n + 1, placement));
                body.push('\n');
            }
            _ => {
                seen_step |= !line.is_empty();
                body.push_str(raw);
                body.push('\n');
            }
        }
    }
    let mut plan = parse_plan(&body, domain).map_err(translator_to_format)?;
    if let Some((line, placement)) = initial {
        plan.initial = domain
            .state_from_placement(&placement)
            .map_err(|e| FormatError::at(line, e.to_string()))?;
    }
    Ok(plan)
}

pub fn render_plan(plan: &PlanSteps, domain: &EscortDomain) -> String {
    let mut out = String::new();
    if plan.initial != domain.initial_state() {
        if let Ok(p) = domain.placement_of(&plan.initial) {
            let pairs: Vec<String> = p.iter().map(|(e, l)| format!("{e}={l}")).collect();
            let _ = writeln!(out, "initial {}", pairs.join(" "));
        }
    }
    for a in &plan.actions {
        let _ = writeln!(out, "{a}");
    }
    out
}

fn parse_state(line: &str, index: usize, line_no: usize) -> Result<State, FormatError> {
    let mut props = Vec::new();
    let mut vars = Vec::new();
    for word in line.split_whitespace() {
        match word.split_once('=') {
            Some((name, value)) => {
                let v: i64 = value.parse().map_err(|_| {
                    FormatError::at(
                        line_no,
                        format!("`{name}` needs an integer value, got {value:?}"),
                    )
                })?;
                vars.push((name, v));
            }
            None => props.push(word),
        }
    }
    State::from_parts(index, props, vars).map_err(|e| FormatError::at(line_no, e.to_string()))
}

/// Parses the trace format. The `state:` prefix is optional; blank lines and
/// comments are skipped.
pub fn parse_trace(text: &str) -> Result<Trace, FormatError> {
    let mut states = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        let line = line.strip_prefix("state:").unwrap_or(line);
        let line = strip_list_prefix(line);
        states.push(parse_state(line, states.len(), n + 1)?);
    }
    Trace::new(states).map_err(|e| FormatError::general(e.to_string()))
}

fn strip_list_prefix(line: &str) -> &str {
    line.trim_start().strip_prefix("- ").unwrap_or(line).trim()
}

pub fn render_trace(trace: &Trace) -> String {
    let mut out = String::new();
    for s in trace.states() {
        let mut words: Vec<String> = s.props.iter().map(ToString::to_string).collect();
        words.extend(s.vars.iter().map(|(k, v)| format!("{k}={v}")));
        if words.is_empty() {
            out.push_str("state:\n");
        } else {
            let _ = writeln!(out, "state: {}", words.join(" "));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Machine,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "machine" | "json" => Ok(OutputFormat::Machine),
            other => Err(format!("unknown output format {other:?}")),
        }
    }
}

/// Text is the user feedback; machine output is the report as JSON.
pub fn render_report(report: &VerificationReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => render_feedback(report, Audience::User),
        OutputFormat::Machine => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}
