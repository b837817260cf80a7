//! Strictness weights and seeded sampling of the active constraint set.
//!
//! A weight of exactly 1 makes a rule hard; anything lower is soft. For each
//! verification run, rules are visited in ascending id order and each draws
//! one uniform number `u` in `[0, 1)` from a SplitMix64 stream seeded with
//! the run seed. A soft rule is active iff `u < weight`; hard rules are
//! always active but still consume their draw, so adding or hardening one
//! rule never shifts the draws of the others.
//!
//! SplitMix64 (Steele, Lea & Flood, 2014): `state += 0x9E3779B97F4A7C15`,
//! then `z = state`, `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//! `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, output `z ^ (z >> 31)`.
//! The uniform is `(output >> 11) * 2^-53`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::templates::ConstraintSpec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlexibilityError {
    #[error("constraint {0} has not been confirmed")]
    UnconfirmedConstraint(String),
    #[error("duplicate constraint id {0}")]
    DuplicateId(String),
    #[error("weight {0} is outside [0, 1]")]
    WeightOutOfRange(String),
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct StrictnessWeight(f64);

impl StrictnessWeight {
    pub const HARD: StrictnessWeight = StrictnessWeight(1.0);
    pub const OFF: StrictnessWeight = StrictnessWeight(0.0);

    pub fn new(value: f64) -> Result<Self, FlexibilityError> {
        if (0.0..=1.0).contains(&value) {
            Ok(StrictnessWeight(value))
        } else {
            Err(FlexibilityError::WeightOutOfRange(value.to_string()))
        }
    }

    /// Slider position in percent, mapped as `percent / 100`.
    pub fn from_percent(percent: f64) -> Result<Self, FlexibilityError> {
        Self::new(percent / 100.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn hardness(self) -> Hardness {
        classify(self)
    }
}

impl TryFrom<f64> for StrictnessWeight {
    type Error = FlexibilityError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        StrictnessWeight::new(v)
    }
}

impl From<StrictnessWeight> for f64 {
    fn from(w: StrictnessWeight) -> f64 {
        w.0
    }
}

impl fmt::Display for StrictnessWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.0 * 100.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hardness {
    Hard,
    Soft,
}

pub fn classify(weight: StrictnessWeight) -> Hardness {
    if weight.0 == 1.0 {
        Hardness::Hard
    } else {
        Hardness::Soft
    }
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// The SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub id: String,
    pub weight: StrictnessWeight,
    pub uniform: f64,
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSet {
    /// Active constraint ids, ascending.
    pub included: Vec<String>,
    pub seed: u64,
    /// One draw per constraint, ascending id order.
    pub draws: Vec<Draw>,
}

impl SampledSet {
    pub fn contains(&self, id: &str) -> bool {
        self.included
            .binary_search_by(|x| x.as_str().cmp(id))
            .is_ok()
    }
}

pub fn sample_active_set(
    constraints: &[ConstraintSpec],
    seed: u64,
) -> Result<SampledSet, FlexibilityError> {
    let mut order: Vec<&ConstraintSpec> = constraints.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in order.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(FlexibilityError::DuplicateId(pair[0].id.clone()));
        }
    }
    if let Some(c) = order.iter().find(|c| !c.confirmed) {
        return Err(FlexibilityError::UnconfirmedConstraint(c.id.clone()));
    }
    let mut rng = SplitMix64::new(seed);
    let mut draws = Vec::with_capacity(order.len());
    let mut included = Vec::new();
    for c in order {
        let uniform = rng.next_f64();
        let hit = match classify(c.strictness) {
            Hardness::Hard => true,
            Hardness::Soft => uniform < c.strictness.value(),
        };
        if hit {
            included.push(c.id.clone());
        }
        draws.push(Draw {
            id: c.id.clone(),
            weight: c.strictness,
            uniform,
            included: hit,
        });
    }
    Ok(SampledSet {
        included,
        seed,
        draws,
    })
}
