//! Verifies a trace against the sampled constraint set.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::flexibility::{classify, sample_active_set, Draw, FlexibilityError, Hardness};
use crate::ltl::{check, Formula, Verdict};
use crate::par::Execution;
use crate::plan::Trace;
use crate::templates::ConstraintSpec;

pub use crate::flexibility::FlexibilityError as CheckError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResult {
    pub constraint_id: String,
    pub sampled: bool,
    /// Present iff `sampled`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub hardness: Hardness,
    pub weight: f64,
    pub formula: Formula,
    pub description: String,
}

impl ConstraintResult {
    pub fn violated(&self) -> bool {
        self.verdict.is_some_and(|v| !v.holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub plan_valid: bool,
    /// One entry per constraint, ascending id.
    pub results: Vec<ConstraintResult>,
    pub soft_violations: Vec<String>,
    pub seed: u64,
    pub trace_len: usize,
    pub sampling: Vec<Draw>,
}

impl VerificationReport {
    pub fn result(&self, id: &str) -> Option<&ConstraintResult> {
        self.results.iter().find(|r| r.constraint_id == id)
    }

    pub fn hard_violations(&self) -> impl Iterator<Item = &ConstraintResult> {
        self.results
            .iter()
            .filter(|r| r.hardness == Hardness::Hard && r.violated())
    }
}

pub fn verify(
    trace: &Trace,
    constraints: &[ConstraintSpec],
    seed: u64,
) -> Result<VerificationReport, FlexibilityError> {
    verify_with(Execution::default(), trace, constraints, seed)
}

/// [`verify`] with an explicit strategy for the per-constraint checks. The
/// report is identical for every strategy.
pub fn verify_with(
    exec: Execution,
    trace: &Trace,
    constraints: &[ConstraintSpec],
    seed: u64,
) -> Result<VerificationReport, FlexibilityError> {
    let active = sample_active_set(constraints, seed)?;
    let mut ordered: Vec<&ConstraintSpec> = constraints.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let results = exec.map(&ordered, |c| {
        let sampled = active.contains(&c.id);
        ConstraintResult {
            constraint_id: c.id.clone(),
            sampled,
            verdict: sampled.then(|| check(&c.formula, trace)),
            hardness: classify(c.strictness),
            weight: c.strictness.value(),
            formula: c.formula.clone(),
            description: c.nl_text.clone(),
        }
    });

    let plan_valid = !results
        .iter()
        .any(|r| r.hardness == Hardness::Hard && r.violated());
    let soft_violations = results
        .iter()
        .filter(|r| r.hardness == Hardness::Soft && r.violated())
        .map(|r| r.constraint_id.clone())
        .collect();
    Ok(VerificationReport {
        plan_valid,
        results,
        soft_violations,
        seed,
        trace_len: trace.len(),
        sampling: active.draws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    User,
    Llm,
}

pub const VALID_LINE: &str = "Plan is valid.";
pub const INVALID_LINE: &str = "Plan is invalid.";

fn step_of(r: &ConstraintResult) -> usize {
    r.verdict.and_then(|v| v.violation_index).unwrap_or(0)
}

pub fn render_feedback(report: &VerificationReport, audience: Audience) -> String {
    match audience {
        Audience::User => user_feedback(report),
        Audience::Llm => llm_feedback(report),
    }
}

fn user_feedback(report: &VerificationReport) -> String {
    let mut out = String::new();
    if report.plan_valid {
        out.push_str(VALID_LINE);
        out.push('\n');
    } else {
        out.push_str(INVALID_LINE);
        out.push('\n');
        for r in report.hard_violations() {
            let _ = writeln!(
                out,
                "Rule {} is broken at step {}: {}",
                r.constraint_id,
                step_of(r),
                r.description
            );
        }
    }
    for id in &report.soft_violations {
        if let Some(r) = report.result(id) {
            let _ = writeln!(
                out,
                "Notice: soft rule {} (strictness {}%) is violated at step {}: {}",
                r.constraint_id,
                r.weight * 100.0,
                step_of(r),
                r.description
            );
        }
    }
    let skipped: Vec<&str> = report
        .results
        .iter()
        .filter(|r| !r.sampled)
        .map(|r| r.constraint_id.as_str())
        .collect();
    if !skipped.is_empty() {
        let _ = writeln!(
            out,
            "Not checked this run (not sampled): {}",
            skipped.join(", ")
        );
    }
    out
}

fn llm_feedback(report: &VerificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "VERIFICATION RESULT: {} (trace of {} states, seed {})",
        if report.plan_valid {
            "VALID"
        } else {
            "INVALID"
        },
        report.trace_len,
        report.seed
    );
    let hard: Vec<&ConstraintResult> = report.hard_violations().collect();
    if !hard.is_empty() {
        out.push_str("Violated constraints:\n");
        for r in &hard {
            let _ = writeln!(
                out,
                "- {}: {} violated at step {} ({})",
                r.constraint_id,
                r.formula,
                step_of(r),
                r.description
            );
        }
    }
    if !report.soft_violations.is_empty() {
        out.push_str("Violated soft constraints (preferred, not required):\n");
        for id in &report.soft_violations {
            if let Some(r) = report.result(id) {
                let _ = writeln!(
                    out,
                    "- {}: {} violated at step {}",
                    r.constraint_id,
                    r.formula,
                    step_of(r)
                );
            }
        }
    }
    if report.plan_valid {
        out.push_str("No hard constraint is violated. Keep the plan unchanged.\n");
    } else {
        out.push_str(
            "Regenerate the complete plan so that every violated constraint above holds at every step. \
             Reply with one action per line.\n",
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flexibility::StrictnessWeight;
    use crate::ltl::parse_formula;
    use crate::plan::{scenario_p2_first, scenario_solution, EscortDomain};
    use crate::templates::TemplateParams;

    fn global(id: &str, cond: &str, w: f64) -> ConstraintSpec {
        ConstraintSpec::new(
            id,
            TemplateParams::Global {
                condition: parse_formula(cond).unwrap(),
            },
        )
        .unwrap()
        .with_strictness(StrictnessWeight::new(w).unwrap())
        .confirmed()
    }

    fn scenario_rules(r4_weight: f64) -> Vec<ConstraintSpec> {
        vec![
            global("R1", "!unescorted_move", 1.0),
            global("R2", "escorted_count <= 1", 1.0),
            global("R3", "!alone_together_P2_P3", 1.0),
            global("R4", "!alone_together_P3_P4", r4_weight),
            ConstraintSpec::new(
                "R5",
                TemplateParams::EventualGoal {
                    goal: parse_formula("at_P2_L2 & at_P3_L2 & at_P4_L2").unwrap(),
                },
            )
            .unwrap()
            .confirmed(),
        ]
    }

    fn trace(actions: Vec<crate::plan::Action>) -> Trace {
        let d = EscortDomain::default();
        d.derive_trace(&d.plan(actions)).unwrap()
    }

    #[test]
    fn solution_is_valid() {
        let report = verify(&trace(scenario_solution()), &scenario_rules(1.0), 7).unwrap();
        assert!(report.plan_valid);
        assert_eq!(report.trace_len, 8);
        assert!(report.soft_violations.is_empty());
        assert!(render_feedback(&report, Audience::User).contains("Plan is valid."));
    }

    #[test]
    fn p2_first_violates_r4_at_step_one() {
        let report = verify(&trace(scenario_p2_first()), &scenario_rules(1.0), 7).unwrap();
        assert!(!report.plan_valid);
        let r4 = report.result("R4").unwrap();
        assert_eq!(r4.verdict, Some(Verdict::fail(1)));
        let violated: Vec<&str> = report
            .hard_violations()
            .map(|r| r.constraint_id.as_str())
            .collect();
        assert_eq!(violated, vec!["R4"]);
        let llm = render_feedback(&report, Audience::Llm);
        assert!(llm.contains("G !alone_together_P3_P4"));
        assert!(llm.contains("step 1"));
        let user = render_feedback(&report, Audience::User);
        assert!(user.contains("Plan is invalid."));
        assert!(user.contains("Rule R4 is broken at step 1"));
    }

    #[test]
    fn unsampled_soft_rule_does_not_invalidate() {
        let rules = scenario_rules(0.5);
        let t = trace(scenario_p2_first());
        let excluded = (0..1000u64)
            .find(|&s| !crate::sample_active_set(&rules, s).unwrap().contains("R4"))
            .unwrap();
        let report = verify(&t, &rules, excluded).unwrap();
        assert!(report.plan_valid);
        let r4 = report.result("R4").unwrap();
        assert!(!r4.sampled);
        assert_eq!(r4.verdict, None);
        assert!(render_feedback(&report, Audience::User).contains("Not checked this run"));
    }

    #[test]
    fn sampled_soft_violation_keeps_plan_valid_and_notifies() {
        let rules = scenario_rules(0.5);
        let t = trace(scenario_p2_first());
        let included = (0..1000u64)
            .find(|&s| crate::sample_active_set(&rules, s).unwrap().contains("R4"))
            .unwrap();
        let report = verify(&t, &rules, included).unwrap();
        assert!(report.plan_valid);
        assert_eq!(report.soft_violations, vec!["R4"]);
        let user = render_feedback(&report, Audience::User);
        assert!(user.contains("valid"));
        assert!(user.contains("soft rule R4"));
    }

    #[test]
    fn unconfirmed_rule_is_an_error() {
        let mut rules = scenario_rules(1.0);
        rules[0].confirmed = false;
        assert!(matches!(
            verify(&trace(vec![]), &rules, 0),
            Err(FlexibilityError::UnconfirmedConstraint(_))
        ));
    }

    #[test]
    fn strategies_produce_identical_reports() {
        let rules = scenario_rules(0.5);
        let t = trace(scenario_p2_first());
        for seed in 0..50 {
            assert_eq!(
                verify_with(Execution::Sequential, &t, &rules, seed).unwrap(),
                verify_with(Execution::Parallel, &t, &rules, seed).unwrap()
            );
        }
    }

    #[test]
    fn feedback_is_deterministic() {
        let rules = scenario_rules(1.0);
        let t = trace(scenario_p2_first());
        let a = verify(&t, &rules, 3).unwrap();
        let b = verify(&t, &rules, 3).unwrap();
        assert_eq!(
            render_feedback(&a, Audience::Llm),
            render_feedback(&b, Audience::Llm)
        );
    }
}
