//! Batch verification: many traces, many seeds, or every action sequence
//! up to a length bound. These are the data-parallel workloads; each takes
//! an [`Execution`] strategy and returns results in input order.

use std::ops::Range;

use crate::checker::{verify_with, VerificationReport};
use crate::flexibility::{sample_active_set, FlexibilityError};
use crate::par::Execution;
use crate::plan::{Action, EscortDomain, Trace};
use crate::templates::ConstraintSpec;

pub fn verify_traces(
    exec: Execution,
    traces: &[Trace],
    constraints: &[ConstraintSpec],
    seed: u64,
) -> Vec<Result<VerificationReport, FlexibilityError>> {
    // Batch level is already parallel; keep the inner checks sequential.
    exec.map(traces, |t| {
        verify_with(Execution::Sequential, t, constraints, seed)
    })
}

/// Fraction of seeds in `seeds` for which the plan is judged invalid.
pub fn invalid_fraction(
    exec: Execution,
    trace: &Trace,
    constraints: &[ConstraintSpec],
    seeds: Range<u64>,
) -> Result<f64, FlexibilityError> {
    sample_active_set(constraints, seeds.start)?;
    let n = seeds.end.saturating_sub(seeds.start);
    let invalid = exec.count_range(n, |k| {
        !verify_with(Execution::Sequential, trace, constraints, seeds.start + k)
            .map(|r| r.plan_valid)
            .unwrap_or(true)
    });
    Ok(invalid as f64 / n.max(1) as f64)
}

/// Fraction of seeds whose active set includes constraint `id`.
pub fn inclusion_frequency(
    exec: Execution,
    constraints: &[ConstraintSpec],
    id: &str,
    seeds: Range<u64>,
) -> Result<f64, FlexibilityError> {
    sample_active_set(constraints, seeds.start)?;
    let n = seeds.end.saturating_sub(seeds.start);
    let hits = exec.count_range(n, |k| {
        sample_active_set(constraints, seeds.start + k)
            .map(|s| s.contains(id))
            .unwrap_or(false)
    });
    Ok(hits as f64 / n.max(1) as f64)
}

/// All sequences over `alphabet` of length `0..=max_len`, numbered
/// shortest first and lexicographically (by alphabet position) within a
/// length.
#[derive(Debug, Clone)]
pub struct SequenceSpace {
    alphabet: Vec<Action>,
    max_len: usize,
}

impl SequenceSpace {
    pub fn new(alphabet: Vec<Action>, max_len: usize) -> Self {
        SequenceSpace { alphabet, max_len }
    }

    pub fn for_domain(domain: &EscortDomain, max_len: usize) -> Self {
        SequenceSpace::new(domain.action_alphabet(), max_len)
    }

    fn count_of_len(&self, len: usize) -> u64 {
        (self.alphabet.len() as u64).pow(len as u32)
    }

    pub fn count(&self) -> u64 {
        (0..=self.max_len).map(|l| self.count_of_len(l)).sum()
    }

    pub fn decode(&self, mut k: u64) -> Vec<Action> {
        let base = self.alphabet.len() as u64;
        let mut len = 0;
        while k >= self.count_of_len(len) {
            k -= self.count_of_len(len);
            len += 1;
        }
        let mut digits = vec![0usize; len];
        for d in digits.iter_mut().rev() {
            *d = (k % base) as usize;
            k /= base;
        }
        digits
            .into_iter()
            .map(|d| self.alphabet[d].clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceOutcome {
    /// Some action could not fire in the state it was applied to.
    Inapplicable,
    Valid,
    Invalid,
}

/// Executes and verifies every sequence in `space`.
pub fn verify_sequences(
    exec: Execution,
    domain: &EscortDomain,
    space: &SequenceSpace,
    constraints: &[ConstraintSpec],
    seed: u64,
) -> Result<Vec<SequenceOutcome>, FlexibilityError> {
    sample_active_set(constraints, seed)?;
    Ok(exec.map_range(space.count(), |k| {
        let plan = domain.plan(space.decode(k));
        match domain.derive_trace(&plan) {
            Err(_) => SequenceOutcome::Inapplicable,
            Ok(trace) => match verify_with(Execution::Sequential, &trace, constraints, seed) {
                Ok(r) if r.plan_valid => SequenceOutcome::Valid,
                _ => SequenceOutcome::Invalid,
            },
        }
    }))
}
