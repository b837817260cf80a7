//! States, traces, actions and the escort example domain.
//!
//! The escort domain is the reference fixture: one escort moves family
//! members between two rooms, at most one at a time. Executing a plan in the
//! domain produces a [`Trace`] whose states carry derived propositions:
//!
//! * `at_<entity>_<location>` for every entity,
//! * `alone_together_<Pi>_<Pj>` when two persons share a location the escort
//!   is not at (pair ordered by domain listing),
//! * `unescorted_move` when a person changed location without the escort
//!   travelling alongside,
//!
//! and integer variables `timestamp` (minutes) and `escorted_count`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TIMESTAMP_VAR: &str = "timestamp";
pub const ESCORTED_COUNT_VAR: &str = "escorted_count";
pub const UNESCORTED_MOVE: &str = "unescorted_move";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("invalid identifier {0:?}")]
    InvalidIdentifier(String),
    #[error("{0:?} is used both as a proposition and a variable")]
    VarPropClash(String),
    #[error("trace must contain at least one state")]
    EmptyTrace,
    #[error("state at position {position} carries index {index}")]
    NonContiguousIndex { position: usize, index: usize },
    #[error("{}inapplicable action `{action}`: {reason}", step_prefix(*.step))]
    InapplicableAction {
        step: Option<usize>,
        action: String,
        reason: String,
    },
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("state is not a valid domain state: {0}")]
    MalformedState(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
}

fn step_prefix(step: Option<usize>) -> String {
    match step {
        Some(s) => format!("step {}: ", s + 1),
        None => String::new(),
    }
}

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Proposition(String);

impl Proposition {
    pub fn new(name: impl Into<String>) -> Result<Self, PlanError> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(Proposition(name))
        } else {
            Err(PlanError::InvalidIdentifier(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Proposition {
    type Error = PlanError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Proposition::new(value)
    }
}

impl From<Proposition> for String {
    fn from(p: Proposition) -> String {
        p.0
    }
}

impl std::borrow::Borrow<str> for Proposition {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub index: usize,
    pub props: BTreeSet<Proposition>,
    pub vars: BTreeMap<String, i64>,
}

impl State {
    pub fn empty(index: usize) -> Self {
        State {
            index,
            props: BTreeSet::new(),
            vars: BTreeMap::new(),
        }
    }

    pub fn from_parts<'a>(
        index: usize,
        props: impl IntoIterator<Item = &'a str>,
        vars: impl IntoIterator<Item = (&'a str, i64)>,
    ) -> Result<Self, PlanError> {
        let mut state = State::empty(index);
        for p in props {
            state.props.insert(Proposition::new(p)?);
        }
        for (name, value) in vars {
            if !is_identifier(name) {
                return Err(PlanError::InvalidIdentifier(name.to_string()));
            }
            state.vars.insert(name.to_string(), value);
        }
        state.validate()?;
        Ok(state)
    }

    pub fn holds(&self, prop: &str) -> bool {
        self.props.contains(prop)
    }

    pub fn var(&self, name: &str) -> Option<i64> {
        self.vars.get(name).copied()
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        for name in self.vars.keys() {
            if !is_identifier(name) {
                return Err(PlanError::InvalidIdentifier(name.clone()));
            }
            if self.holds(name) {
                return Err(PlanError::VarPropClash(name.clone()));
            }
        }
        Ok(())
    }
}

/// A non-empty sequence of states indexed `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<State>", into = "Vec<State>")]
pub struct Trace {
    states: Vec<State>,
}

impl Trace {
    pub fn new(states: Vec<State>) -> Result<Self, PlanError> {
        if states.is_empty() {
            return Err(PlanError::EmptyTrace);
        }
        for (position, s) in states.iter().enumerate() {
            if s.index != position {
                return Err(PlanError::NonContiguousIndex {
                    position,
                    index: s.index,
                });
            }
            s.validate()?;
        }
        Ok(Trace { states })
    }

    /// Builds a trace from unindexed states, assigning indices by position.
    pub fn from_states(states: impl IntoIterator<Item = State>) -> Result<Self, PlanError> {
        let states = states
            .into_iter()
            .enumerate()
            .map(|(i, mut s)| {
                s.index = i;
                s
            })
            .collect();
        Trace::new(states)
    }

    /// Convenience for propositional traces: one slice of atom names per state.
    pub fn from_props<S: AsRef<str>>(labels: &[Vec<S>]) -> Result<Self, PlanError> {
        let states = labels
            .iter()
            .enumerate()
            .map(|(i, props)| {
                State::from_parts(i, props.iter().map(|p| p.as_ref()), std::iter::empty())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Trace::new(states)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, i: usize) -> Option<&State> {
        self.states.get(i)
    }
}

impl From<Trace> for Vec<State> {
    fn from(t: Trace) -> Self {
        t.states
    }
}

impl TryFrom<Vec<State>> for Trace {
    type Error = PlanError;

    fn try_from(states: Vec<State>) -> Result<Self, Self::Error> {
        Trace::new(states)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    /// The escort accompanies one person from `from` to `to`.
    Escort {
        person: String,
        from: String,
        to: String,
    },
    /// The escort travels alone.
    Move {
        person: String,
        from: String,
        to: String,
    },
}

impl Action {
    pub fn escort(person: &str, from: &str, to: &str) -> Self {
        Action::Escort {
            person: person.into(),
            from: from.into(),
            to: to.into(),
        }
    }

    pub fn move_alone(person: &str, from: &str, to: &str) -> Self {
        Action::Move {
            person: person.into(),
            from: from.into(),
            to: to.into(),
        }
    }

    fn parts(&self) -> (&str, &str, &str) {
        match self {
            Action::Escort { person, from, to } | Action::Move { person, from, to } => {
                (person, from, to)
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verb = match self {
            Action::Escort { .. } => "escort",
            Action::Move { .. } => "move",
        };
        let (person, from, to) = self.parts();
        write!(f, "{verb} {person} {from} {to}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSteps {
    pub initial: State,
    pub actions: Vec<Action>,
}

impl PlanSteps {
    pub fn new(initial: State, actions: Vec<Action>) -> Self {
        PlanSteps { initial, actions }
    }
}

/// Names the planner may reference; used to reject hallucinated entities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub props: BTreeSet<String>,
    pub vars: BTreeSet<String>,
}

impl Vocabulary {
    pub fn knows_prop(&self, name: &str) -> bool {
        self.props.contains(name)
    }

    pub fn knows_var(&self, name: &str) -> bool {
        self.vars.contains(name)
    }
}

pub type Placement = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscortDomain {
    pub escort: String,
    pub persons: Vec<String>,
    pub locations: Vec<String>,
    pub initial_location: String,
    /// Minutes each action takes.
    #[serde(default = "default_step_minutes")]
    pub step_minutes: i64,
}

fn default_step_minutes() -> i64 {
    1
}

impl Default for EscortDomain {
    fn default() -> Self {
        EscortDomain {
            escort: "P1".into(),
            persons: vec!["P2".into(), "P3".into(), "P4".into()],
            locations: vec!["L1".into(), "L2".into()],
            initial_location: "L1".into(),
            step_minutes: 1,
        }
    }
}

pub fn at_prop(entity: &str, location: &str) -> String {
    format!("at_{entity}_{location}")
}

impl EscortDomain {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |msg: String| Err(PlanError::InvalidDomain(msg));
        if self.locations.len() != 2 {
            return bad(format!(
                "expected 2 locations, got {}",
                self.locations.len()
            ));
        }
        if self.persons.contains(&self.escort) {
            return bad(format!("escort {} is also listed as a person", self.escort));
        }
        if !self.locations.contains(&self.initial_location) {
            return bad(format!(
                "unknown initial location {}",
                self.initial_location
            ));
        }
        let mut seen = BTreeSet::new();
        for id in self
            .entities()
            .chain(self.locations.iter().map(String::as_str))
        {
            if !is_identifier(id) {
                return Err(PlanError::InvalidIdentifier(id.to_string()));
            }
            if !seen.insert(id) {
                return bad(format!("duplicate identifier {id}"));
            }
        }
        Ok(())
    }

    /// Escort first, then persons in listed order.
    pub fn entities(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.escort.as_str()).chain(self.persons.iter().map(String::as_str))
    }

    pub fn pair_prop(&self, a: &str, b: &str) -> Option<String> {
        let ia = self.persons.iter().position(|p| p == a)?;
        let ib = self.persons.iter().position(|p| p == b)?;
        if ia == ib {
            return None;
        }
        let (x, y) = if ia < ib { (a, b) } else { (b, a) };
        Some(format!("alone_together_{x}_{y}"))
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let mut props = BTreeSet::new();
        for e in self.entities() {
            for l in &self.locations {
                props.insert(at_prop(e, l));
            }
        }
        for (i, a) in self.persons.iter().enumerate() {
            for b in &self.persons[i + 1..] {
                props.insert(format!("alone_together_{a}_{b}"));
            }
        }
        props.insert(UNESCORTED_MOVE.to_string());
        let vars = [TIMESTAMP_VAR, ESCORTED_COUNT_VAR]
            .into_iter()
            .map(String::from)
            .collect();
        Vocabulary { props, vars }
    }

    /// Every action with distinct endpoints: escorts of each person in both
    /// directions, then the escort's solo moves.
    pub fn action_alphabet(&self) -> Vec<Action> {
        let mut out = Vec::new();
        let pairs: Vec<(&str, &str)> = self
            .locations
            .iter()
            .flat_map(|a| {
                self.locations
                    .iter()
                    .filter(move |b| *b != a)
                    .map(move |b| (a.as_str(), b.as_str()))
            })
            .collect();
        for p in &self.persons {
            for (from, to) in &pairs {
                out.push(Action::escort(p, from, to));
            }
        }
        for (from, to) in &pairs {
            out.push(Action::move_alone(&self.escort, from, to));
        }
        out
    }

    pub fn initial_placement(&self) -> Placement {
        self.entities()
            .map(|e| (e.to_string(), self.initial_location.clone()))
            .collect()
    }

    pub fn initial_state(&self) -> State {
        self.label(0, &self.initial_placement(), 0, 0, false)
    }

    /// State 0 for an explicit placement; every entity must be placed.
    pub fn state_from_placement(&self, placement: &Placement) -> Result<State, PlanError> {
        self.validate()?;
        for (entity, loc) in placement {
            if !self.entities().any(|e| e == entity) {
                return Err(PlanError::UnknownEntity(entity.clone()));
            }
            if !self.locations.contains(loc) {
                return Err(PlanError::UnknownEntity(loc.clone()));
            }
        }
        if let Some(missing) = self.entities().find(|e| !placement.contains_key(*e)) {
            return Err(PlanError::MalformedState(format!(
                "{missing} has no location"
            )));
        }
        Ok(self.label(0, placement, 0, 0, false))
    }

    pub fn plan(&self, actions: Vec<Action>) -> PlanSteps {
        PlanSteps::new(self.initial_state(), actions)
    }

    /// Reads each entity's location back out of the `at_*` propositions.
    pub fn placement_of(&self, state: &State) -> Result<Placement, PlanError> {
        let mut placement = Placement::new();
        for e in self.entities() {
            let mut found = self
                .locations
                .iter()
                .filter(|l| state.holds(&at_prop(e, l)));
            match (found.next(), found.next()) {
                (Some(l), None) => {
                    placement.insert(e.to_string(), l.clone());
                }
                (None, _) => return Err(PlanError::MalformedState(format!("{e} has no location"))),
                (Some(_), Some(_)) => {
                    return Err(PlanError::MalformedState(format!(
                        "{e} is at more than one location"
                    )))
                }
            }
        }
        Ok(placement)
    }

    /// Builds a fully labelled state from scratch.
    pub fn label(
        &self,
        index: usize,
        placement: &Placement,
        timestamp: i64,
        escorted_count: i64,
        unescorted_move: bool,
    ) -> State {
        let mut props = BTreeSet::new();
        for (entity, loc) in placement {
            props.insert(Proposition(at_prop(entity, loc)));
        }
        let escort_loc = placement.get(&self.escort);
        for (i, a) in self.persons.iter().enumerate() {
            for b in &self.persons[i + 1..] {
                let (la, lb) = (placement.get(a), placement.get(b));
                if la.is_some() && la == lb && la != escort_loc {
                    props.insert(Proposition(format!("alone_together_{a}_{b}")));
                }
            }
        }
        if unescorted_move {
            props.insert(Proposition(UNESCORTED_MOVE.to_string()));
        }
        let vars = BTreeMap::from([
            (TIMESTAMP_VAR.to_string(), timestamp),
            (ESCORTED_COUNT_VAR.to_string(), escorted_count),
        ]);
        State { index, props, vars }
    }

    fn check_known(&self, action: &Action) -> Result<(), PlanError> {
        let (person, from, to) = action.parts();
        if !self.entities().any(|e| e == person) {
            return Err(PlanError::UnknownEntity(person.to_string()));
        }
        for loc in [from, to] {
            if !self.locations.iter().any(|l| l == loc) {
                return Err(PlanError::UnknownEntity(loc.to_string()));
            }
        }
        Ok(())
    }

    pub fn apply_action(&self, state: &State, action: &Action) -> Result<State, PlanError> {
        self.check_known(action)?;
        let inapplicable = |reason: String| PlanError::InapplicableAction {
            step: None,
            action: action.to_string(),
            reason,
        };
        let before = self.placement_of(state)?;
        let timestamp = state
            .var(TIMESTAMP_VAR)
            .ok_or_else(|| PlanError::MalformedState("missing timestamp".into()))?;
        let (person, from, to) = action.parts();
        if from == to {
            return Err(inapplicable("source and destination coincide".into()));
        }
        let mut after = before.clone();
        let escorted_count = match action {
            Action::Escort { .. } => {
                if person == self.escort {
                    return Err(inapplicable(format!("{person} cannot escort themselves")));
                }
                if before[person] != from {
                    return Err(inapplicable(format!("{person} is not at {from}")));
                }
                if before[&self.escort] != from {
                    return Err(inapplicable(format!("{} is not at {from}", self.escort)));
                }
                after.insert(person.to_string(), to.to_string());
                after.insert(self.escort.clone(), to.to_string());
                1
            }
            Action::Move { .. } => {
                if person != self.escort {
                    return Err(inapplicable(format!(
                        "only the escort {} may move unaccompanied",
                        self.escort
                    )));
                }
                if before[person] != from {
                    return Err(inapplicable(format!("{person} is not at {from}")));
                }
                after.insert(person.to_string(), to.to_string());
                0
            }
        };
        let unescorted = self.persons.iter().any(|p| {
            before[p] != after[p]
                && !(before[&self.escort] == before[p] && after[&self.escort] == after[p])
        });
        Ok(self.label(
            state.index + 1,
            &after,
            timestamp + self.step_minutes,
            escorted_count,
            unescorted,
        ))
    }

    pub fn derive_trace(&self, plan: &PlanSteps) -> Result<Trace, PlanError> {
        self.validate()?;
        self.placement_of(&plan.initial)?;
        let mut states = Vec::with_capacity(plan.actions.len() + 1);
        states.push(plan.initial.clone());
        for (step, action) in plan.actions.iter().enumerate() {
            let next = self
                .apply_action(&states[step], action)
                .map_err(|e| match e {
                    PlanError::InapplicableAction { action, reason, .. } => {
                        PlanError::InapplicableAction {
                            step: Some(step),
                            action,
                            reason,
                        }
                    }
                    other => other,
                })?;
            states.push(next);
        }
        Trace::new(states)
    }
}

pub fn apply_action(
    state: &State,
    action: &Action,
    domain: &EscortDomain,
) -> Result<State, PlanError> {
    domain.apply_action(state, action)
}

pub fn derive_trace(plan: &PlanSteps, domain: &EscortDomain) -> Result<Trace, PlanError> {
    domain.derive_trace(plan)
}

/// What a session plans over: an action domain whose traces are derived
/// by execution, or labeled traces supplied state by state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainMode {
    Escort(EscortDomain),
    Labeled,
}

impl Default for DomainMode {
    fn default() -> Self {
        DomainMode::Escort(EscortDomain::default())
    }
}

impl DomainMode {
    /// `None` means any identifier is accepted.
    pub fn vocabulary(&self) -> Option<Vocabulary> {
        match self {
            DomainMode::Escort(d) => Some(d.vocabulary()),
            DomainMode::Labeled => None,
        }
    }

    /// Step syntax and entities, for planner prompts.
    pub fn prompt_description(&self) -> String {
        match self {
            DomainMode::Escort(d) => format!(
                "Entities: escort {} and persons {}. Locations: {}. Everyone starts at {}.\n\
                 Write one action per line, either `escort <person> <from> <to>` (the escort \
                 walks with the person) or `move {} <from> <to>` (the escort walks alone).",
                d.escort,
                d.persons.join(", "),
                d.locations.join(", "),
                d.initial_location,
                d.escort,
            ),
            DomainMode::Labeled => "Write one state per line as `state: <true propositions> \
                 <variable>=<integer> ...`, starting with the initial state."
                .to_string(),
        }
    }
}

/// The seven-step plan that ferries P3 back to the waiting room midway.
pub fn scenario_solution() -> Vec<Action> {
    vec![
        Action::escort("P3", "L1", "L2"),
        Action::move_alone("P1", "L2", "L1"),
        Action::escort("P2", "L1", "L2"),
        Action::escort("P3", "L2", "L1"),
        Action::escort("P4", "L1", "L2"),
        Action::move_alone("P1", "L2", "L1"),
        Action::escort("P3", "L1", "L2"),
    ]
}

/// A plan that takes P2 first and so leaves P3 alone with P4.
pub fn scenario_p2_first() -> Vec<Action> {
    vec![
        Action::escort("P2", "L1", "L2"),
        Action::move_alone("P1", "L2", "L1"),
        Action::escort("P3", "L1", "L2"),
        Action::escort("P2", "L2", "L1"),
        Action::escort("P4", "L1", "L2"),
        Action::move_alone("P1", "L2", "L1"),
        Action::escort("P2", "L1", "L2"),
    ]
}
