use serde::{Deserialize, Serialize};

use super::Formula;
use crate::plan::Trace;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("position {index} is outside a trace of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub violation_index: Option<usize>,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict {
            holds: true,
            violation_index: None,
        }
    }

    pub fn fail(at: usize) -> Self {
        Verdict {
            holds: false,
            violation_index: Some(at),
        }
    }
}

/// Truth value of `f` at every position of `t`, computed bottom-up with one
/// backward sweep per temporal operator.
pub fn eval_positions(f: &Formula, t: &Trace) -> Vec<bool> {
    let n = t.len();
    match f {
        Formula::Atom(p) => t.states().iter().map(|s| s.props.contains(p)).collect(),
        Formula::Cmp { var, op, value } => t
            .states()
            .iter()
            .map(|s| s.var(var).is_some_and(|v| op.apply(v, *value)))
            .collect(),
        Formula::Not(g) => eval_positions(g, t).into_iter().map(|b| !b).collect(),
        Formula::And(a, b) => zip(a, b, t, |x, y| x && y),
        Formula::Or(a, b) => zip(a, b, t, |x, y| x || y),
        Formula::Implies(a, b) => zip(a, b, t, |x, y| !x || y),
        Formula::Iff(a, b) => zip(a, b, t, |x, y| x == y),
        Formula::Next(g) => {
            let inner = eval_positions(g, t);
            (0..n).map(|i| i + 1 < n && inner[i + 1]).collect()
        }
        Formula::Globally(g) => {
            let mut v = eval_positions(g, t);
            for i in (0..n.saturating_sub(1)).rev() {
                v[i] = v[i] && v[i + 1];
            }
            v
        }
        Formula::Finally(g) => {
            let mut v = eval_positions(g, t);
            for i in (0..n.saturating_sub(1)).rev() {
                v[i] = v[i] || v[i + 1];
            }
            v
        }
        Formula::Until(a, b) => sweep_until(a, b, t, false),
        Formula::WeakUntil(a, b) => sweep_until(a, b, t, true),
    }
}

fn zip(a: &Formula, b: &Formula, t: &Trace, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    let va = eval_positions(a, t);
    let vb = eval_positions(b, t);
    va.into_iter().zip(vb).map(|(x, y)| op(x, y)).collect()
}

// u[i] = psi[i] | (phi[i] & u[i+1]); past the end u is false (strong) or
// true (weak).
fn sweep_until(a: &Formula, b: &Formula, t: &Trace, weak: bool) -> Vec<bool> {
    let phi = eval_positions(a, t);
    let psi = eval_positions(b, t);
    let n = t.len();
    let mut out = vec![false; n];
    let mut after = weak;
    for i in (0..n).rev() {
        out[i] = psi[i] || (phi[i] && after);
        after = out[i];
    }
    out
}

pub fn eval_at(f: &Formula, t: &Trace, i: usize) -> Result<bool, EvalError> {
    if i >= t.len() {
        return Err(EvalError::IndexOutOfRange {
            index: i,
            len: t.len(),
        });
    }
    Ok(eval_positions(f, t)[i])
}

/// Evaluates `f` at position 0 and, on failure, localizes the violation.
///
/// Localization, for `f` false at `i`:
/// * atoms, comparisons, `!` and `X` report `i`;
/// * `G g` reports the first `j >= i` where `g` fails;
/// * `F` reports the last index (failure is only known at the end);
/// * `U`/`W` report the first position where the left operand breaks before
///   the right one ever held, or the last index when the left operand held
///   throughout (only possible for `U`);
/// * `&` reports the minimum over failing conjuncts, `|` the later of its
///   two failures, `->` and `<->` the failing side.
pub fn check(f: &Formula, t: &Trace) -> Verdict {
    if eval_positions(f, t)[0] {
        Verdict::pass()
    } else {
        Verdict::fail(localize(f, t, 0))
    }
}

fn localize(f: &Formula, t: &Trace, i: usize) -> usize {
    let last = t.len() - 1;
    match f {
        Formula::Atom(_) | Formula::Cmp { .. } | Formula::Not(_) | Formula::Next(_) => i,
        Formula::Globally(g) => {
            let v = eval_positions(g, t);
            (i..t.len()).find(|&j| !v[j]).unwrap_or(last)
        }
        Formula::Finally(_) => last,
        Formula::Until(a, b) | Formula::WeakUntil(a, b) => {
            let phi = eval_positions(a, t);
            let psi = eval_positions(b, t);
            (i..t.len()).find(|&k| !phi[k] && !psi[k]).unwrap_or(last)
        }
        Formula::And(a, b) => {
            let fails_a = !eval_positions(a, t)[i];
            let fails_b = !eval_positions(b, t)[i];
            match (fails_a, fails_b) {
                (true, true) => localize(a, t, i).min(localize(b, t, i)),
                (true, false) => localize(a, t, i),
                _ => localize(b, t, i),
            }
        }
        Formula::Or(a, b) => localize(a, t, i).max(localize(b, t, i)),
        Formula::Implies(_, b) => localize(b, t, i),
        Formula::Iff(a, b) => {
            if eval_positions(a, t)[i] {
                localize(b, t, i)
            } else {
                localize(a, t, i)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse_formula;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn tr(labels: &[&[&str]]) -> Trace {
        let v: Vec<Vec<&str>> = labels.iter().map(|l| l.to_vec()).collect();
        Trace::from_props(&v).unwrap()
    }

    #[test]
    fn globally_over_all_p() {
        assert!(eval_at(&f("G p"), &tr(&[&["p"], &["p"]]), 0).unwrap());
    }

    #[test]
    fn strong_next_at_end() {
        let t = tr(&[&["p"]]);
        assert!(!eval_at(&f("X p"), &t, 0).unwrap());
        assert!(eval_at(&f("!X p"), &t, 0).unwrap());
    }

    #[test]
    fn until_expansion() {
        assert!(eval_at(&f("p U q"), &tr(&[&["p"], &["p"], &["q"]]), 0).unwrap());
        assert!(!eval_at(&f("p U q"), &tr(&[&["p"], &["p"], &[]]), 0).unwrap());
        assert!(eval_at(&f("p W q"), &tr(&[&["p"], &["p"], &["p"]]), 0).unwrap());
        assert!(!eval_at(&f("p U q"), &tr(&[&["p"], &["p"], &["p"]]), 0).unwrap());
    }

    #[test]
    fn out_of_range() {
        let t = tr(&[&["p"]]);
        assert_eq!(
            eval_at(&f("p"), &t, 1),
            Err(EvalError::IndexOutOfRange { index: 1, len: 1 })
        );
    }

    #[test]
    fn missing_variable_compares_false() {
        let t = tr(&[&[]]);
        assert!(!eval_at(&f("x < 5"), &t, 0).unwrap());
        assert!(!eval_at(&f("x >= 5"), &t, 0).unwrap());
    }

    #[test]
    fn localization_rules() {
        let t = tr(&[&["p"], &["p"], &[], &["p"]]);
        assert_eq!(check(&f("G p"), &t), Verdict::fail(2));
        assert_eq!(check(&f("F q"), &t), Verdict::fail(3));
        assert_eq!(check(&f("p U q"), &t), Verdict::fail(2));
        assert_eq!(check(&f("p W q"), &t), Verdict::fail(2));
        assert_eq!(check(&f("G p & F q"), &t), Verdict::fail(2));
        assert_eq!(check(&f("G p | F q"), &t), Verdict::fail(3));
        assert_eq!(check(&f("p -> G p"), &t), Verdict::fail(2));
        assert_eq!(check(&f("q"), &t), Verdict::fail(0));
        assert_eq!(check(&f("p | !p"), &t), Verdict::pass());

        let all_p = tr(&[&["p"], &["p"]]);
        assert_eq!(check(&f("p U q"), &all_p), Verdict::fail(1));
    }

    #[test]
    fn strong_next_under_globally_fails_at_last_state() {
        let t = tr(&[&["b"], &["a", "b"]]);
        assert_eq!(check(&f("G (a -> X b)"), &t), Verdict::fail(1));
    }
}
