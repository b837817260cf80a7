//! Brute-force simulator for the built-in escort scenario.
//!
//! Entities are indices 0..4 (0 is the escort), locations are 0 and 1.
//! Rules are checked directly on location arrays.

/// `(escorted person or None for a solo move, from, to)`.
pub type Step = (Option<usize>, usize, usize);

pub const NAMES: [&str; 4] = ["P1", "P2", "P3", "P4"];
pub const LOCATIONS: [&str; 2] = ["L1", "L2"];

/// Escorts of P2, P3, P4 (each L1→L2 then L2→L1), then solo moves.
pub fn alphabet() -> Vec<Step> {
    let mut out = Vec::new();
    for p in 1..4 {
        out.push((Some(p), 0, 1));
        out.push((Some(p), 1, 0));
    }
    out.push((None, 0, 1));
    out.push((None, 1, 0));
    out
}

/// `"escort P3 L1 L2"` / `"move P1 L2 L1"`.
pub fn describe(step: &Step) -> String {
    match step.0 {
        Some(p) => format!(
            "escort {} {} {}",
            NAMES[p], LOCATIONS[step.1], LOCATIONS[step.2]
        ),
        None => format!(
            "move {} {} {}",
            NAMES[0], LOCATIONS[step.1], LOCATIONS[step.2]
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Inapplicable,
    Valid,
    Invalid,
}

/// Forbidden unattended pairs: (P2, P3) and (P3, P4).
fn safe(loc: &[usize; 4]) -> bool {
    let alone = |a: usize, b: usize| loc[a] == loc[b] && loc[a] != loc[0];
    !alone(1, 2) && !alone(2, 3)
}

/// Outcome of a sequence from the all-at-L1 start with every rule hard.
pub fn judge(seq: &[Step]) -> Outcome {
    let mut loc = [0usize; 4];
    let mut ok = safe(&loc);
    let mut goal = loc[1..].iter().all(|&l| l == 1);
    for &(person, from, to) in seq {
        if loc[0] != from {
            return Outcome::Inapplicable;
        }
        if let Some(p) = person {
            if loc[p] != from {
                return Outcome::Inapplicable;
            }
            loc[p] = to;
        }
        loc[0] = to;
        ok &= safe(&loc);
        goal |= loc[1..].iter().all(|&l| l == 1);
    }
    if ok && goal {
        Outcome::Valid
    } else {
        Outcome::Invalid
    }
}

/// Sequence number `k` in the shortest-first, lexicographic numbering over
/// `alphabet()`.
pub fn decode(mut k: u64) -> Vec<Step> {
    let a = alphabet();
    let base = a.len() as u64;
    let mut len = 0u32;
    while k >= base.pow(len) {
        k -= base.pow(len);
        len += 1;
    }
    let mut out = vec![a[0]; len as usize];
    for slot in out.iter_mut().rev() {
        *slot = a[(k % base) as usize];
        k /= base;
    }
    out
}

pub fn count_up_to(max_len: u32) -> u64 {
    let base = alphabet().len() as u64;
    (0..=max_len).map(|l| base.pow(l)).sum()
}
