//! Direct recursive LTL semantics over finite traces.

use planverify_core::ltl::{CmpOp, Formula};
use planverify_core::plan::Trace;

fn compare(op: CmpOp, lhs: i64, rhs: i64) -> bool {
    match op {
        CmpOp::Lt => lhs < rhs,
        CmpOp::Le => lhs <= rhs,
        CmpOp::Eq => lhs == rhs,
        CmpOp::Ge => lhs >= rhs,
        CmpOp::Gt => lhs > rhs,
    }
}

/// Truth of `f` at position `i < t.len()`.
pub fn holds(f: &Formula, t: &Trace, i: usize) -> bool {
    let n = t.len();
    let s = &t.states()[i];
    match f {
        Formula::Atom(p) => s.props.iter().any(|q| q == p),
        Formula::Cmp { var, op, value } => match s.vars.get(var) {
            Some(v) => compare(*op, *v, *value),
            None => false,
        },
        Formula::Not(a) => !holds(a, t, i),
        Formula::And(a, b) => holds(a, t, i) && holds(b, t, i),
        Formula::Or(a, b) => holds(a, t, i) || holds(b, t, i),
        Formula::Implies(a, b) => !holds(a, t, i) || holds(b, t, i),
        Formula::Iff(a, b) => holds(a, t, i) == holds(b, t, i),
        Formula::Next(a) => i + 1 < n && holds(a, t, i + 1),
        Formula::Globally(a) => (i..n).all(|j| holds(a, t, j)),
        Formula::Finally(a) => (i..n).any(|j| holds(a, t, j)),
        Formula::Until(a, b) => (i..n).any(|k| holds(b, t, k) && (i..k).all(|j| holds(a, t, j))),
        Formula::WeakUntil(a, b) => {
            (i..n).any(|k| holds(b, t, k) && (i..k).all(|j| holds(a, t, j)))
                || (i..n).all(|j| holds(a, t, j))
        }
    }
}

/// Reference violation position for a top-level `G g`: the first failing state.
pub fn first_failure_of_globally(g: &Formula, t: &Trace) -> Option<usize> {
    (0..t.len()).find(|&j| !holds(g, t, j))
}
