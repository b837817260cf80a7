//! The temporal-constraint template.
//!
//! Every rule belongs to one of seven categories. A category plus its
//! parameters compiles to exactly one formula:
//!
//! | category            | formula                                          |
//! |---------------------|--------------------------------------------------|
//! | `fixed_time_block`  | `G (event -> timestamp >= start & timestamp <= end)` |
//! | `sequential_order`  | `!second W first`                                |
//! | `concurrent_events` | `G (a <-> b)`                                    |
//! | `conditional`       | `G (trigger -> F response)`                      |
//! | `exclusive`         | `G !(a & b)`                                     |
//! | `global`            | `G condition`                                    |
//! | `eventual_goal`     | `F goal`                                         |
//!
//! [`describe`] renders the same rule as a fixed English sentence; it is the
//! deterministic fallback whenever an LLM paraphrase is unavailable or
//! unfaithful.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::flexibility::StrictnessWeight;
use crate::ltl::{render_formula, CmpOp, Formula};
use crate::plan::{Proposition, TIMESTAMP_VAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintCategory {
    FixedTimeBlock,
    SequentialOrder,
    ConcurrentEvents,
    Conditional,
    Exclusive,
    Global,
    EventualGoal,
}

impl ConstraintCategory {
    pub const ALL: [ConstraintCategory; 7] = [
        ConstraintCategory::FixedTimeBlock,
        ConstraintCategory::SequentialOrder,
        ConstraintCategory::ConcurrentEvents,
        ConstraintCategory::Conditional,
        ConstraintCategory::Exclusive,
        ConstraintCategory::Global,
        ConstraintCategory::EventualGoal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintCategory::FixedTimeBlock => "fixed_time_block",
            ConstraintCategory::SequentialOrder => "sequential_order",
            ConstraintCategory::ConcurrentEvents => "concurrent_events",
            ConstraintCategory::Conditional => "conditional",
            ConstraintCategory::Exclusive => "exclusive",
            ConstraintCategory::Global => "global",
            ConstraintCategory::EventualGoal => "eventual_goal",
        }
    }

    /// Parameter names, in the order they appear in rules files and prompts.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ConstraintCategory::FixedTimeBlock => &["event", "start", "end"],
            ConstraintCategory::SequentialOrder => &["first", "second"],
            ConstraintCategory::ConcurrentEvents | ConstraintCategory::Exclusive => &["a", "b"],
            ConstraintCategory::Conditional => &["trigger", "response"],
            ConstraintCategory::Global => &["condition"],
            ConstraintCategory::EventualGoal => &["goal"],
        }
    }
}

impl fmt::Display for ConstraintCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintCategory {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        ConstraintCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| TemplateError::UnknownCategory(s.trim().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("parameters do not match category {category}: {detail}")]
    ParamMismatch {
        category: ConstraintCategory,
        detail: String,
    },
    #[error("unknown constraint category {0:?}")]
    UnknownCategory(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "category", rename_all = "snake_case", deny_unknown_fields)]
pub enum TemplateParams {
    FixedTimeBlock {
        event: Proposition,
        start: i64,
        end: i64,
    },
    SequentialOrder {
        first: Proposition,
        second: Proposition,
    },
    ConcurrentEvents {
        a: Proposition,
        b: Proposition,
    },
    Conditional {
        trigger: Proposition,
        response: Proposition,
    },
    Exclusive {
        a: Proposition,
        b: Proposition,
    },
    Global {
        condition: Formula,
    },
    EventualGoal {
        goal: Formula,
    },
}

impl TemplateParams {
    pub fn category(&self) -> ConstraintCategory {
        match self {
            TemplateParams::FixedTimeBlock { .. } => ConstraintCategory::FixedTimeBlock,
            TemplateParams::SequentialOrder { .. } => ConstraintCategory::SequentialOrder,
            TemplateParams::ConcurrentEvents { .. } => ConstraintCategory::ConcurrentEvents,
            TemplateParams::Conditional { .. } => ConstraintCategory::Conditional,
            TemplateParams::Exclusive { .. } => ConstraintCategory::Exclusive,
            TemplateParams::Global { .. } => ConstraintCategory::Global,
            TemplateParams::EventualGoal { .. } => ConstraintCategory::EventualGoal,
        }
    }

    /// Builds parameters from `name -> text` pairs (rules files, LLM output).
    pub fn from_fields<'a>(
        category: ConstraintCategory,
        fields: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<TemplateParams, TemplateError> {
        let mismatch = |detail: String| TemplateError::ParamMismatch { category, detail };
        let mut values: Vec<(&str, &str)> = Vec::new();
        for (k, v) in fields {
            if !category.param_names().contains(&k) {
                return Err(mismatch(format!("unexpected parameter `{k}`")));
            }
            if values.iter().any(|(seen, _)| *seen == k) {
                return Err(mismatch(format!("duplicate parameter `{k}`")));
            }
            values.push((k, v.trim()));
        }
        let get = |name: &str| {
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| mismatch(format!("missing parameter `{name}`")))
        };
        let prop = |name: &str| -> Result<Proposition, TemplateError> {
            let text = get(name)?;
            Proposition::new(text)
                .map_err(|_| mismatch(format!("`{name}` must be an identifier, got {text:?}")))
        };
        let int = |name: &str| -> Result<i64, TemplateError> {
            let text = get(name)?;
            text.parse()
                .map_err(|_| mismatch(format!("`{name}` must be an integer, got {text:?}")))
        };
        let formula = |name: &str| -> Result<Formula, TemplateError> {
            let text = get(name)?;
            text.parse::<Formula>()
                .map_err(|e| mismatch(format!("`{name}`: {e}")))
        };
        Ok(match category {
            ConstraintCategory::FixedTimeBlock => TemplateParams::FixedTimeBlock {
                event: prop("event")?,
                start: int("start")?,
                end: int("end")?,
            },
            ConstraintCategory::SequentialOrder => TemplateParams::SequentialOrder {
                first: prop("first")?,
                second: prop("second")?,
            },
            ConstraintCategory::ConcurrentEvents => TemplateParams::ConcurrentEvents {
                a: prop("a")?,
                b: prop("b")?,
            },
            ConstraintCategory::Conditional => TemplateParams::Conditional {
                trigger: prop("trigger")?,
                response: prop("response")?,
            },
            ConstraintCategory::Exclusive => TemplateParams::Exclusive {
                a: prop("a")?,
                b: prop("b")?,
            },
            ConstraintCategory::Global => TemplateParams::Global {
                condition: formula("condition")?,
            },
            ConstraintCategory::EventualGoal => TemplateParams::EventualGoal {
                goal: formula("goal")?,
            },
        })
    }

    /// Parameter values as text, in [`ConstraintCategory::param_names`] order.
    pub fn field_values(&self) -> Vec<(&'static str, String)> {
        match self {
            TemplateParams::FixedTimeBlock { event, start, end } => vec![
                ("event", event.to_string()),
                ("start", start.to_string()),
                ("end", end.to_string()),
            ],
            TemplateParams::SequentialOrder { first, second } => {
                vec![("first", first.to_string()), ("second", second.to_string())]
            }
            TemplateParams::ConcurrentEvents { a, b } | TemplateParams::Exclusive { a, b } => {
                vec![("a", a.to_string()), ("b", b.to_string())]
            }
            TemplateParams::Conditional { trigger, response } => vec![
                ("trigger", trigger.to_string()),
                ("response", response.to_string()),
            ],
            TemplateParams::Global { condition } => {
                vec![("condition", render_formula(condition))]
            }
            TemplateParams::EventualGoal { goal } => vec![("goal", render_formula(goal))],
        }
    }

    /// The identifiers a faithful paraphrase must mention: proposition
    /// names, the atoms and variables of formula parameters, and integers.
    pub fn mentions(&self) -> Vec<String> {
        match self {
            TemplateParams::Global { condition: f } | TemplateParams::EventualGoal { goal: f } => {
                let mut out: Vec<String> = Vec::new();
                for name in f.names() {
                    if !out.iter().any(|n| n == name) {
                        out.push(name.to_string());
                    }
                }
                out
            }
            _ => self.field_values().into_iter().map(|(_, v)| v).collect(),
        }
    }
}

fn atom(category: ConstraintCategory, p: &Proposition) -> Result<Formula, TemplateError> {
    Formula::atom(p.as_str()).map_err(|e| TemplateError::ParamMismatch {
        category,
        detail: e.to_string(),
    })
}

pub fn instantiate(
    category: ConstraintCategory,
    params: &TemplateParams,
) -> Result<Formula, TemplateError> {
    if params.category() != category {
        return Err(TemplateError::ParamMismatch {
            category,
            detail: format!("got parameters for {}", params.category()),
        });
    }
    let a = |p: &Proposition| atom(category, p);
    Ok(match params {
        TemplateParams::FixedTimeBlock { event, start, end } => {
            if start > end {
                return Err(TemplateError::ParamMismatch {
                    category,
                    detail: format!("start {start} is after end {end}"),
                });
            }
            let window = Formula::and(
                Formula::cmp(TIMESTAMP_VAR, CmpOp::Ge, *start).expect("valid name"),
                Formula::cmp(TIMESTAMP_VAR, CmpOp::Le, *end).expect("valid name"),
            );
            Formula::globally(Formula::implies(a(event)?, window))
        }
        TemplateParams::SequentialOrder { first, second } => {
            Formula::weak_until(Formula::not(a(second)?), a(first)?)
        }
        TemplateParams::ConcurrentEvents { a: x, b: y } => {
            Formula::globally(Formula::iff(a(x)?, a(y)?))
        }
        TemplateParams::Conditional { trigger, response } => Formula::globally(Formula::implies(
            a(trigger)?,
            Formula::finally(a(response)?),
        )),
        TemplateParams::Exclusive { a: x, b: y } => {
            Formula::globally(Formula::not(Formula::and(a(x)?, a(y)?)))
        }
        TemplateParams::Global { condition } => Formula::globally(condition.clone()),
        TemplateParams::EventualGoal { goal } => Formula::finally(goal.clone()),
    })
}

pub fn describe_params(params: &TemplateParams) -> String {
    match params {
        TemplateParams::FixedTimeBlock { event, start, end } => {
            format!("‘{event}’ may only occur between minute {start} and minute {end}.")
        }
        TemplateParams::SequentialOrder { first, second } => {
            format!("‘{second}’ must not occur before ‘{first}’ has occurred.")
        }
        TemplateParams::ConcurrentEvents { a, b } => {
            format!("‘{a}’ and ‘{b}’ must always occur together.")
        }
        TemplateParams::Conditional { trigger, response } => {
            format!("Whenever ‘{trigger}’ occurs, ‘{response}’ must eventually follow.")
        }
        TemplateParams::Exclusive { a, b } => {
            format!("‘{a}’ and ‘{b}’ must never hold at the same time.")
        }
        TemplateParams::Global { condition } => {
            format!("At all times: {}.", render_formula(condition))
        }
        TemplateParams::EventualGoal { goal } => {
            format!("Eventually ‘{}’ must hold.", render_formula(goal))
        }
    }
}

pub fn describe(spec: &ConstraintSpec) -> String {
    describe_params(&spec.params)
}

/// One user rule with its compiled formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ConstraintSpec {
    pub id: String,
    pub category: ConstraintCategory,
    pub params: TemplateParams,
    pub formula: Formula,
    pub nl_text: String,
    pub strictness: StrictnessWeight,
    pub confirmed: bool,
}

impl ConstraintSpec {
    /// Compiles `params`; unconfirmed with full strictness.
    pub fn new(id: impl Into<String>, params: TemplateParams) -> Result<Self, TemplateError> {
        let category = params.category();
        let formula = instantiate(category, &params)?;
        let nl_text = describe_params(&params);
        Ok(ConstraintSpec {
            id: id.into(),
            category,
            params,
            formula,
            nl_text,
            strictness: StrictnessWeight::HARD,
            confirmed: false,
        })
    }

    pub fn with_strictness(mut self, weight: StrictnessWeight) -> Self {
        self.strictness = weight;
        self
    }

    pub fn confirmed(mut self) -> Self {
        self.confirmed = true;
        self
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    id: String,
    category: ConstraintCategory,
    params: TemplateParams,
    formula: Formula,
    nl_text: String,
    strictness: StrictnessWeight,
    confirmed: bool,
}

impl TryFrom<RawSpec> for ConstraintSpec {
    type Error = String;

    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        let compiled = instantiate(raw.category, &raw.params).map_err(|e| e.to_string())?;
        if compiled != raw.formula {
            return Err(format!(
                "rule {}: formula `{}` does not match its template (`{}`)",
                raw.id, raw.formula, compiled
            ));
        }
        Ok(ConstraintSpec {
            id: raw.id,
            category: raw.category,
            params: raw.params,
            formula: raw.formula,
            nl_text: raw.nl_text,
            strictness: raw.strictness,
            confirmed: raw.confirmed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{eval_at, parse_formula};
    use crate::plan::{State, Trace};

    fn p(s: &str) -> Proposition {
        Proposition::new(s).unwrap()
    }

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    #[test]
    fn compiled_shapes() {
        use TemplateParams as T;
        let cases = [
            (
                T::FixedTimeBlock {
                    event: p("meeting"),
                    start: 60,
                    end: 120,
                },
                "G (meeting -> timestamp >= 60 & timestamp <= 120)",
            ),
            (
                T::SequentialOrder {
                    first: p("a"),
                    second: p("b"),
                },
                "!b W a",
            ),
            (
                T::ConcurrentEvents {
                    a: p("a"),
                    b: p("b"),
                },
                "G (a <-> b)",
            ),
            (
                T::Conditional {
                    trigger: p("dough_mixed"),
                    response: p("oven_on"),
                },
                "G (dough_mixed -> F oven_on)",
            ),
            (
                T::Exclusive {
                    a: p("a"),
                    b: p("b"),
                },
                "G !(a & b)",
            ),
            (
                T::Global {
                    condition: f("!alone_together_P2_P3"),
                },
                "G !alone_together_P2_P3",
            ),
            (
                T::EventualGoal {
                    goal: f("at_P4_L2"),
                },
                "F at_P4_L2",
            ),
        ];
        for (params, expected) in cases {
            let formula = instantiate(params.category(), &params).unwrap();
            assert_eq!(render_formula(&formula), expected);
            assert_eq!(formula, f(expected));
        }
    }

    #[test]
    fn category_mismatch_is_rejected() {
        let params = TemplateParams::Exclusive {
            a: p("a"),
            b: p("b"),
        };
        assert!(matches!(
            instantiate(ConstraintCategory::Global, &params),
            Err(TemplateError::ParamMismatch { .. })
        ));
        let bad_window = TemplateParams::FixedTimeBlock {
            event: p("e"),
            start: 5,
            end: 1,
        };
        assert!(instantiate(ConstraintCategory::FixedTimeBlock, &bad_window).is_err());
        let keyword = TemplateParams::Exclusive {
            a: p("G"),
            b: p("b"),
        };
        assert!(instantiate(ConstraintCategory::Exclusive, &keyword).is_err());
    }

    #[test]
    fn sequential_order_is_vacuous_without_events() {
        let formula = instantiate(
            ConstraintCategory::SequentialOrder,
            &TemplateParams::SequentialOrder {
                first: p("a"),
                second: p("b"),
            },
        )
        .unwrap();
        let t = Trace::from_props(&[Vec::<&str>::new(), vec!["c"]]).unwrap();
        assert!(eval_at(&formula, &t, 0).unwrap());
    }

    #[test]
    fn fixed_time_block_inside_window() {
        let formula = instantiate(
            ConstraintCategory::FixedTimeBlock,
            &TemplateParams::FixedTimeBlock {
                event: p("meeting"),
                start: 60,
                end: 120,
            },
        )
        .unwrap();
        let state = |i: usize, ts: i64, meeting: bool| {
            let props: Vec<&str> = if meeting { vec!["meeting"] } else { vec![] };
            State::from_parts(i, props, [("timestamp", ts)]).unwrap()
        };
        let t = Trace::new(vec![
            state(0, 0, false),
            state(1, 90, true),
            state(2, 150, false),
        ])
        .unwrap();
        assert!(eval_at(&formula, &t, 0).unwrap());
        let late = Trace::new(vec![state(0, 0, false), state(1, 121, true)]).unwrap();
        assert!(!eval_at(&formula, &late, 0).unwrap());
    }

    #[test]
    fn phrase_table() {
        let cond = TemplateParams::Conditional {
            trigger: p("dough_mixed"),
            response: p("oven_on"),
        };
        assert_eq!(
            describe_params(&cond),
            "Whenever ‘dough_mixed’ occurs, ‘oven_on’ must eventually follow."
        );
        assert_eq!(
            describe_params(&TemplateParams::EventualGoal {
                goal: f("at_P4_L2")
            }),
            "Eventually ‘at_P4_L2’ must hold."
        );
        assert_eq!(
            describe_params(&TemplateParams::Global {
                condition: f("escorted_count <= 1")
            }),
            "At all times: escorted_count <= 1."
        );
        assert_eq!(
            describe_params(&TemplateParams::Exclusive {
                a: p("a"),
                b: p("b")
            }),
            "‘a’ and ‘b’ must never hold at the same time."
        );
    }

    #[test]
    fn describe_distinguishes_parameters() {
        let mut seen = std::collections::BTreeSet::new();
        for a in ["x", "y", "z"] {
            for (end, b) in ["x", "y", "z"].into_iter().enumerate() {
                let all = [
                    TemplateParams::SequentialOrder {
                        first: p(a),
                        second: p(b),
                    },
                    TemplateParams::ConcurrentEvents { a: p(a), b: p(b) },
                    TemplateParams::Conditional {
                        trigger: p(a),
                        response: p(b),
                    },
                    TemplateParams::Exclusive { a: p(a), b: p(b) },
                    TemplateParams::Global {
                        condition: f(&format!("{a} | {b}")),
                    },
                    TemplateParams::EventualGoal {
                        goal: f(&format!("{a} & {b}")),
                    },
                    TemplateParams::FixedTimeBlock {
                        event: p(a),
                        start: 0,
                        end: end as i64,
                    },
                ];
                for params in all {
                    assert!(seen.insert((params.category(), describe_params(&params))));
                }
            }
        }
    }

    #[test]
    fn from_fields_validates() {
        let params = TemplateParams::from_fields(
            ConstraintCategory::Conditional,
            [("trigger", "a"), ("response", "b")],
        )
        .unwrap();
        assert_eq!(
            params,
            TemplateParams::Conditional {
                trigger: p("a"),
                response: p("b")
            }
        );
        assert!(
            TemplateParams::from_fields(ConstraintCategory::Conditional, [("trigger", "a")])
                .is_err()
        );
        assert!(
            TemplateParams::from_fields(ConstraintCategory::Global, [("condition", "G (")])
                .is_err()
        );
        assert!(TemplateParams::from_fields(
            ConstraintCategory::Exclusive,
            [("a", "x"), ("b", "y"), ("c", "z")]
        )
        .is_err());
        assert_eq!(
            "Eventual Goal".parse::<ConstraintCategory>().unwrap(),
            ConstraintCategory::EventualGoal
        );
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ConstraintSpec::new(
            "R4",
            TemplateParams::Global {
                condition: f("!alone_together_P3_P4"),
            },
        )
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: ConstraintSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let tampered = json.replace("G !alone_together_P3_P4", "G alone_together_P3_P4");
        assert!(serde_json::from_str::<ConstraintSpec>(&tampered).is_err());
    }
}
