//! Reference implementations for cross-checking `planverify-core`.
//!
//! Everything here is written directly from the textbook definitions and
//! shares only data types with the core crate: the LTL evaluator recurses on
//! quantifiers over suffixes, and the escort simulator tracks locations in a
//! fixed-size array and checks the scenario rules without any formulas.

pub mod escort;
pub mod formulas;
pub mod naive;
