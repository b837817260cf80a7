//! Prompt templates with `{{slot}}` placeholders.
//!
//! Every template starts with a `### task: <name>` marker line and lays its
//! inputs out as `#### <slot>` sections, so replies and scripted clients can
//! tell requests apart without guessing.

use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::TranslatorError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub extractor: String,
    pub mapper: String,
    pub ltl_translator: String,
    pub back_translator: String,
    pub planner: String,
    pub replanner: String,
    pub plan_parser: String,
}

pub const TASK_EXTRACT: &str = "extract-rules";
pub const TASK_MAP: &str = "map-category";
pub const TASK_PARAMS: &str = "fill-parameters";
pub const TASK_BACK: &str = "back-translate";
pub const TASK_PLAN: &str = "plan";
pub const TASK_REPLAN: &str = "replan";
pub const TASK_PLAN_PARSE: &str = "reformat-plan";

const EXTRACTOR: &str = "### task: extract-rules
You read a planning request and list every constraint a correct plan must respect.
Copy each constraint as one short self-contained sentence, in the order they appear.
Do not invent constraints. Reply with exactly one fenced block:
```rules
- <constraint sentence>
```
Reply with an empty block if the request states no constraints.
#### request
{{request}}
";

const MAPPER: &str = "### task: map-category
Classify the rule into exactly one of these seven categories:
fixed_time_block, sequential_order, concurrent_events, conditional, exclusive, global, eventual_goal.
Examples:
- \"The meeting must happen between 9 and 10\" -> fixed_time_block
- \"Wash the vegetables before cutting them\" -> sequential_order
- \"The music plays while the guests dance\" -> concurrent_events
- \"Whenever the alarm rings, someone must answer\" -> conditional
- \"The oven and the grill are never on at the same time\" -> exclusive
- \"P2 and P3 cannot be left alone together\" -> global
- \"Everyone must end up in room B\" -> eventual_goal
Reply with exactly one fenced block:
```category
<category>
```
#### rule
{{rule}}
#### feedback
{{feedback}}
";

const LTL_TRANSLATOR: &str = "### task: fill-parameters
Fill the parameters of the `{{category}}` constraint template for the rule.
Parameters: {{param_names}}.
Propositions and variables must come from this vocabulary:
{{vocabulary}}
Formula-valued parameters use the syntax: ! & | -> <-> X G F U W, comparisons like `var <= 3`.
Reply with exactly one fenced block, one `name: value` line per parameter:
```params
<name>: <value>
```
#### rule
{{rule}}
#### feedback
{{feedback}}
";

const BACK_TRANSLATOR: &str = "### task: back-translate
Explain the formal rule below in one plain English sentence for a non-expert.
Mention every parameter value exactly as written.
Reply with exactly one fenced block:
```paraphrase
<sentence>
```
#### formula
{{formula}}
#### parameters
{{parameters}}
";

const PLANNER: &str = "### task: plan
Produce a step-by-step plan that fulfils the request.
{{domain}}
Reply with exactly one fenced block containing the plan:
```plan
<one step per line>
```
#### request
{{request}}
";

const REPLANNER: &str = "### task: replan
Your previous plan was checked by a model checker and rejected.
Produce a corrected, complete plan that fulfils the request and respects every rule.
{{domain}}
Reply with exactly one fenced block containing the plan:
```plan
<one step per line>
```
#### request
{{request}}
#### rules
{{rules}}
#### previous plan
{{previous_plan}}
#### feedback
{{feedback}}
";

const PLAN_PARSER: &str = "### task: reformat-plan
Rewrite the plan below into the required step syntax without changing its content.
{{domain}}
Reply with exactly one fenced block:
```plan
<one step per line>
```
#### plan
{{plan}}
";

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            extractor: EXTRACTOR.into(),
            mapper: MAPPER.into(),
            ltl_translator: LTL_TRANSLATOR.into(),
            back_translator: BACK_TRANSLATOR.into(),
            planner: PLANNER.into(),
            replanner: REPLANNER.into(),
            plan_parser: PLAN_PARSER.into(),
        }
    }
}

fn slot_regex() -> Regex {
    Regex::new(r"\{\{([a-z_]+)\}\}").expect("static regex")
}

pub fn slots(template: &str) -> BTreeSet<String> {
    slot_regex()
        .captures_iter(template)
        .map(|c| c[1].to_string())
        .collect()
}

/// Substitutes every slot. The set of provided names must equal the set of
/// slots in the template; values are inserted verbatim and never rescanned.
pub fn fill(template: &str, values: &[(&str, &str)]) -> Result<String, TranslatorError> {
    let wanted = slots(template);
    let given: BTreeSet<String> = values.iter().map(|(k, _)| k.to_string()).collect();
    if wanted != given {
        let missing: Vec<_> = wanted.difference(&given).cloned().collect();
        let extra: Vec<_> = given.difference(&wanted).cloned().collect();
        return Err(TranslatorError::Template(format!(
            "unfilled slots {missing:?}, unknown slots {extra:?}"
        )));
    }
    let out = slot_regex().replace_all(template, |c: &regex::Captures| {
        let name = &c[1];
        values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v.to_string())
            .unwrap_or_default()
    });
    Ok(out.into_owned())
}

/// First line `### task: <name>` of a prompt.
pub fn task_of(prompt: &str) -> Option<&str> {
    prompt
        .lines()
        .next()?
        .strip_prefix("### task: ")
        .map(str::trim)
}

/// Content of the `#### <name>` section, trimmed.
pub fn section<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
    let header = format!("#### {name}\n");
    let start = prompt.find(&header)? + header.len();
    let rest = &prompt[start..];
    let end = rest.find("\n#### ").map(|i| i + 1).unwrap_or(rest.len());
    let end = rest[..end].find("\n### ").map(|i| i + 1).unwrap_or(end);
    Some(rest[..end].trim())
}
