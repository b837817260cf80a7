//! Plan verification against user-defined temporal constraints.
//!
//! Plans are executed into finite traces of proposition-labelled states and
//! checked against finite-trace LTL formulas compiled from a fixed constraint
//! template. Each rule carries a strictness weight; soft rules are sampled
//! into a verification run with probability equal to their weight. A bounded
//! verify/feedback/replan loop drives an LLM planner (live or mocked) until
//! the plan is valid or the iteration budget runs out.
//!
//! Module map:
//!
//! * [`plan`]: states, traces, actions and the built-in escort domain
//! * [`ltl`]: formula AST, parser, printer and finite-trace evaluation
//! * [`templates`]: constraint categories and their compilation to formulas
//! * [`flexibility`]: strictness weights and seeded active-set sampling
//! * [`checker`]: verification reports and feedback rendering
//! * [`translator`]: LLM client contract, prompts, mock client, rule pipeline
//! * [`replan`]: sessions and the bounded replanning loop
//! * [`formats`]: rules, plan and trace file formats
//! * [`sweep`]: batch verification over many traces or seeds

pub mod checker;
pub mod flexibility;
pub mod formats;
pub mod ltl;
pub mod par;
pub mod plan;
pub mod replan;
pub mod sweep;
pub mod templates;
pub mod translator;

pub use checker::{render_feedback, verify, Audience, ConstraintResult, VerificationReport};
pub use flexibility::{classify, sample_active_set, Hardness, SampledSet, StrictnessWeight};
pub use ltl::{check, eval_at, parse_formula, render_formula, Formula, Verdict};
pub use par::Execution;
pub use plan::{Action, EscortDomain, PlanSteps, Proposition, State, Trace};
pub use templates::{describe, instantiate, ConstraintCategory, ConstraintSpec, TemplateParams};
