//! Formula enumeration and seeded random generation.

use planverify_core::flexibility::SplitMix64;
use planverify_core::ltl::{CmpOp, Formula};
use planverify_core::plan::{State, Trace};

fn unary(f: &Formula) -> [Formula; 4] {
    [
        Formula::not(f.clone()),
        Formula::next(f.clone()),
        Formula::globally(f.clone()),
        Formula::finally(f.clone()),
    ]
}

fn binary(a: &Formula, b: &Formula) -> [Formula; 6] {
    [
        Formula::and(a.clone(), b.clone()),
        Formula::or(a.clone(), b.clone()),
        Formula::implies(a.clone(), b.clone()),
        Formula::iff(a.clone(), b.clone()),
        Formula::until(a.clone(), b.clone()),
        Formula::weak_until(a.clone(), b.clone()),
    ]
}

/// Every formula over `atoms` with depth at most `depth` (atoms have depth 1).
pub fn all_formulas(atoms: &[&str], depth: usize) -> Vec<Formula> {
    let base: Vec<Formula> = atoms
        .iter()
        .map(|a| Formula::atom(a).expect("valid atom"))
        .collect();
    let mut level = base.clone();
    for _ in 1..depth {
        let mut next = base.clone();
        for f in &level {
            next.extend(unary(f));
        }
        for a in &level {
            for b in &level {
                next.extend(binary(a, b));
            }
        }
        level = next;
    }
    if depth == 0 {
        Vec::new()
    } else {
        level
    }
}

/// `|formulas(depth)|` for `k` atoms, from the recurrence
/// `N(1) = k`, `N(d) = k + 4 N(d-1) + 6 N(d-1)^2`.
pub fn formula_count(k: u64, depth: usize) -> u64 {
    let mut n = k;
    for _ in 1..depth {
        n = k + 4 * n + 6 * n * n;
    }
    if depth == 0 {
        0
    } else {
        n
    }
}

/// Every propositional trace over `atoms` with length in `1..=max_len`.
pub fn all_traces(atoms: &[&str], max_len: usize) -> Vec<Trace> {
    let labels = 1usize << atoms.len();
    let mut out = Vec::new();
    for len in 1..=max_len {
        let total = labels.pow(len as u32);
        for code in 0..total {
            let mut c = code;
            let mut states = Vec::with_capacity(len);
            for i in 0..len {
                let mask = c % labels;
                c /= labels;
                let props: Vec<&str> = atoms
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, a)| *a)
                    .collect();
                states.push(State::from_parts(i, props, []).expect("valid state"));
            }
            out.push(Trace::new(states).expect("non-empty"));
        }
    }
    out
}

/// Seeded generator of formulas and traces over a small vocabulary that
/// includes integer comparisons on `x` (sometimes absent from a state).
pub struct Generator {
    rng: SplitMix64,
}

pub const GEN_ATOMS: [&str; 3] = ["p", "q", "r"];
pub const GEN_VAR: &str = "x";

impl Generator {
    pub fn new(seed: u64) -> Self {
        Generator {
            rng: SplitMix64::new(seed),
        }
    }

    fn below(&mut self, n: u64) -> u64 {
        self.rng.next_u64() % n
    }

    fn leaf(&mut self) -> Formula {
        if self.below(4) == 0 {
            let op = CmpOp::ALL[self.below(5) as usize];
            let value = self.below(7) as i64 - 3;
            Formula::cmp(GEN_VAR, op, value).expect("valid var")
        } else {
            Formula::atom(GEN_ATOMS[self.below(3) as usize]).expect("valid atom")
        }
    }

    pub fn formula(&mut self, max_depth: usize) -> Formula {
        if max_depth <= 1 || self.below(5) == 0 {
            return self.leaf();
        }
        let d = max_depth - 1;
        match self.below(10) {
            0 => Formula::not(self.formula(d)),
            1 => Formula::next(self.formula(d)),
            2 => Formula::globally(self.formula(d)),
            3 => Formula::finally(self.formula(d)),
            4 => Formula::and(self.formula(d), self.formula(d)),
            5 => Formula::or(self.formula(d), self.formula(d)),
            6 => Formula::implies(self.formula(d), self.formula(d)),
            7 => Formula::iff(self.formula(d), self.formula(d)),
            8 => Formula::until(self.formula(d), self.formula(d)),
            _ => Formula::weak_until(self.formula(d), self.formula(d)),
        }
    }

    pub fn trace(&mut self, max_len: usize) -> Trace {
        let len = 1 + self.below(max_len as u64) as usize;
        let states = (0..len)
            .map(|i| {
                let props: Vec<&str> = GEN_ATOMS
                    .iter()
                    .filter(|_| self.below(2) == 1)
                    .copied()
                    .collect();
                let vars = if self.below(5) == 0 {
                    vec![]
                } else {
                    vec![(GEN_VAR, self.below(7) as i64 - 3)]
                };
                State::from_parts(i, props, vars).expect("valid state")
            })
            .collect();
        Trace::new(states).expect("non-empty")
    }
}
