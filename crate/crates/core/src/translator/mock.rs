//! Deterministic scripted client for offline runs and tests.
//!
//! Replies are a pure function of the prompt: the task marker selects a
//! fixture table, and salient substrings of the prompt's input sections
//! select the row. The planner script decides which plans come back.

use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::client::{LlmClient, LlmConfig, LlmError};
use super::prompts::{
    section, task_of, TASK_BACK, TASK_EXTRACT, TASK_MAP, TASK_PARAMS, TASK_PLAN, TASK_PLAN_PARSE,
    TASK_REPLAN,
};
use crate::plan::{scenario_p2_first, scenario_solution, Action};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlannerScript {
    /// First plan takes P2 first; any replan returns the valid solution.
    #[default]
    Success,
    /// Always the P2-first plan.
    Failure,
    /// Plans that match no step syntax, even after reformatting.
    Garbled,
}

impl std::str::FromStr for PlannerScript {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "success" => Ok(PlannerScript::Success),
            "failure" => Ok(PlannerScript::Failure),
            "garbled" => Ok(PlannerScript::Garbled),
            other => Err(format!("unknown mock script {other:?}")),
        }
    }
}

#[derive(Debug, Default)]
pub struct MockLlm {
    script: PlannerScript,
    calls: Mutex<Vec<String>>,
    /// When set, every call fails as if the provider were unreachable.
    offline: bool,
}

impl MockLlm {
    pub fn new(script: PlannerScript) -> Self {
        MockLlm {
            script,
            calls: Mutex::new(Vec::new()),
            offline: false,
        }
    }

    pub fn offline() -> Self {
        MockLlm {
            offline: true,
            ..MockLlm::default()
        }
    }

    pub fn script(&self) -> PlannerScript {
        self.script
    }

    /// Every prompt received so far, in order.
    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().expect("mock log poisoned").clone()
    }

    pub fn calls_for(&self, task: &str) -> usize {
        self.calls()
            .iter()
            .filter(|p| task_of(p) == Some(task))
            .count()
    }

    fn respond(&self, prompt: &str) -> String {
        let repair = prompt.contains(super::REPAIR_MARKER);
        match task_of(prompt) {
            Some(TASK_EXTRACT) => extract(section(prompt, "request").unwrap_or("")),
            Some(TASK_MAP) => map(
                section(prompt, "rule").unwrap_or(""),
                section(prompt, "feedback").unwrap_or(""),
                repair,
            ),
            Some(TASK_PARAMS) => params(
                section(prompt, "rule").unwrap_or(""),
                section(prompt, "feedback").unwrap_or(""),
            ),
            Some(TASK_BACK) => back_translate(
                section(prompt, "formula").unwrap_or(""),
                section(prompt, "parameters").unwrap_or(""),
            ),
            Some(TASK_PLAN) => self.plan(false),
            Some(TASK_REPLAN) => self.plan(true),
            Some(TASK_PLAN_PARSE) => match self.script {
                PlannerScript::Garbled => "Still thinking about it.".into(),
                _ => self.plan(false),
            },
            _ => "I do not understand the request.".into(),
        }
    }

    fn plan(&self, replan: bool) -> String {
        let actions: Vec<Action> = match (self.script, replan) {
            (PlannerScript::Garbled, _) => {
                return "First I will walk over, then we will see.".into()
            }
            (PlannerScript::Success, true) => scenario_solution(),
            _ => scenario_p2_first(),
        };
        let body: Vec<String> = actions.iter().map(ToString::to_string).collect();
        format!("Here is the plan.\n```plan\n{}\n```\n", body.join("\n"))
    }
}

impl LlmClient for MockLlm {
    fn complete(&self, prompt: &str, _config: &LlmConfig) -> Result<String, LlmError> {
        self.calls
            .lock()
            .expect("mock log poisoned")
            .push(prompt.to_string());
        if self.offline {
            return Err(LlmError::Timeout(0));
        }
        Ok(self.respond(prompt))
    }
}

fn fenced(kind: &str, body: &str) -> String {
    format!("```{kind}\n{body}\n```\n")
}

fn pair_regex() -> Regex {
    Regex::new(r"\b([A-Za-z]\w*) and ([A-Za-z]\w*) cannot be left alone together")
        .expect("static regex")
}

/// Clause fixtures, emitted in table order.
fn extract(request: &str) -> String {
    let lower = request.to_lowercase();
    let mut rules: Vec<String> = Vec::new();
    if lower.contains("must be escorted by you") {
        rules.push("All family members (P2, P3, P4) must be escorted by you.".into());
    }
    if lower.contains("only one person can be escorted at a time") {
        rules.push("Only one person can be escorted at a time.".into());
    }
    for c in pair_regex().captures_iter(request) {
        rules.push(format!(
            "{} and {} cannot be left alone together.",
            &c[1], &c[2]
        ));
    }
    if lower.contains("counseling room (l2)") {
        rules.push("Every family member must end up in the counseling room (L2).".into());
    }
    if lower.contains("whenever the dough is mixed") {
        rules.push("Whenever the dough is mixed, the oven must be turned on afterwards.".into());
    }
    if lower.contains("dinner must be ready by 6:00 pm wednesday") {
        rules.push("Dinner must be ready by 6:00 PM Wednesday.".into());
    }
    if lower.contains("ambiguous-format") {
        rules.push("This ambiguous-format rule must be mapped after a repair.".into());
    }
    let body: Vec<String> = rules.iter().map(|r| format!("- {r}")).collect();
    format!(
        "Extracted constraints:\n{}",
        fenced("rules", &body.join("\n"))
    )
}

fn map(rule: &str, feedback: &str, repair: bool) -> String {
    let text = format!("{rule} {feedback}").to_lowercase();
    let category = if text.contains("ambiguous-format") {
        if !repair {
            return "Category: global".into();
        }
        "global"
    } else if text.contains("left alone together")
        || text.contains("only one person")
        || text.contains("escorted by you")
    {
        "global"
    } else if text.contains("end up in") {
        "eventual_goal"
    } else if text.contains("by 6:00 pm") {
        "fixed_time_block"
    } else if text.contains("whenever") {
        "conditional"
    } else if text.contains("at the same time as") {
        "concurrent_events"
    } else if text.contains("never at the same time") {
        "exclusive"
    } else if text.contains(" before ") {
        "sequential_order"
    } else {
        return "I am not sure which category fits.".into();
    };
    fenced("category", category)
}

fn params(rule: &str, feedback: &str) -> String {
    let about = Regex::new(r"about ([A-Za-z]\w*) and ([A-Za-z]\w*)").expect("static regex");
    let lower = rule.to_lowercase();
    let lines = if let Some(c) = about.captures(feedback) {
        pair_condition(&c[1], &c[2])
    } else if let Some(c) = pair_regex().captures(rule) {
        pair_condition(&c[1], &c[2])
    } else if lower.contains("only one person") {
        "condition: escorted_count <= 1".into()
    } else if lower.contains("escorted by you") {
        "condition: !unescorted_move".into()
    } else if lower.contains("counseling room") {
        "goal: at_P2_L2 & at_P3_L2 & at_P4_L2".into()
    } else if lower.contains("dinner") {
        // Minutes from Monday 00:00 to Wednesday 18:00.
        "event: dinner_ready\nstart: 0\nend: 3960".into()
    } else if lower.contains("dough") {
        "trigger: dough_mixed\nresponse: oven_on".into()
    } else if lower.contains("ambiguous-format") {
        "condition: escorted_count <= 1".into()
    } else {
        return "No parameters found.".into();
    };
    fenced("params", &lines)
}

fn pair_condition(a: &str, b: &str) -> String {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    format!("condition: !alone_together_{x}_{y}")
}

fn back_translate(formula: &str, parameters: &str) -> String {
    let values: Vec<&str> = parameters
        .lines()
        .filter_map(|l| l.split_once(':').map(|(_, v)| v.trim()))
        .collect();
    fenced(
        "paraphrase",
        &format!(
            "This rule requires that {formula} holds over the whole plan (parameters: {}).",
            values.join("; ")
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_prompts_get_identical_replies() {
        let m = MockLlm::new(PlannerScript::Success);
        let cfg = LlmConfig::default();
        let prompt = "### task: plan\n#### request\nhello\n";
        assert_eq!(m.complete(prompt, &cfg), m.complete(prompt, &cfg));
        assert_eq!(m.calls().len(), 2);
    }

    #[test]
    fn pair_extraction_follows_prompt_order() {
        let reply = extract(
            "P3 and P4 cannot be left alone together; P2 and P3 cannot be left alone together",
        );
        let p34 = reply.find("P3 and P4").unwrap();
        let p23 = reply.find("P2 and P3").unwrap();
        assert!(p34 < p23);
    }

    #[test]
    fn offline_mock_times_out() {
        let m = MockLlm::offline();
        assert!(m.complete("x", &LlmConfig::default()).is_err());
    }
}
